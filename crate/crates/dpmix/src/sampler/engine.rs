//! The blocked MCMC engine.
//!
//! One sweep runs the update blocks in a fixed order:
//!
//! * A: per-label counts and the active set from the current allocations;
//! * B.1: stick fractions of active labels from their beta conditionals
//!   (slice variables integrated out);
//! * B.2: cluster parameters of active labels (conjugate or
//!   Metropolis-within-Gibbs);
//! * B.3: label-switching moves;
//! * B.4: slice variables given the final sticks and allocations;
//! * C: slice minimum and the (possibly changed) active set;
//! * D.1: concentration parameter by adaptive Metropolis on the log scale;
//! * D.2: fresh potential sticks until the variant's stopping rule holds,
//!   fixing the largest instantiated label;
//! * E: potential cluster parameters from the prior;
//! * F: global parameters (fixed effects, response precision, the
//!   extra-variation layer, selection switches and probabilities);
//! * G: allocations, one categorical draw per individual over the
//!   instantiated labels.
//!
//! The chain owns a single random stream consumed strictly in this order,
//! which makes runs byte-reproducible for a fixed seed. Invariant
//! spot-checks draw from a separate substream so enabling them cannot change
//! the chain.

use crate::adapt::{rwm_step, AdaptiveKernel};
use crate::covariate::{self, CovContext, CovKernels, CovariateModel};
use crate::covariate::select::{update_selectors, SelectKernels};
use crate::data::Dataset;
use crate::dist::{log_gamma_pdf, sample_beta, sample_gamma, sample_normal, sample_student_t};
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, SamplerVariantKind, VarSelectKind, T_PRIOR_DF};
use crate::response::{self, beta_w, ResponseKernels, ResponseModel};
use crate::rng::RngStream;
use crate::sampler::margpost::log_marg_model_post;
use crate::sampler::moves::{apply_label_switch_moves, MoveArgs, MoveStats};
use crate::sampler::record::{AcceptanceSummary, SweepRecord, SweepSink};
use crate::sampler::variant::{self, xi_width, SliceVariant};
use crate::state::{AllocationState, ChainState, ClusterParams, GlobalParams, StickState};
use crate::util::sample_from_log_weights;

/// Substream id for invariant spot-checks.
const CHECK_STREAM: u64 = 9001;

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Archived sweeps after burn-in.
    pub n_sweeps: usize,
    pub n_burn: usize,
    /// Progress line every this many sweeps (0 = silent).
    pub report_every: usize,
    /// Run the slice invariant checks every sweep.
    pub check_invariants: bool,
    /// Include cluster parameter blocks (phi/mu/sigma/gamma) in records.
    pub log_cluster_params: bool,
}

impl SamplerConfig {
    pub fn from_hyper(hp: &HyperParams) -> SamplerConfig {
        SamplerConfig {
            n_sweeps: hp.n_sweeps,
            n_burn: hp.n_burn,
            report_every: 0,
            check_invariants: true,
            log_cluster_params: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Individuals spread uniformly at random over `n_clus_init` labels.
    UniformAllocation,
    /// Everything drawn from the prior (joint-distribution testing).
    Prior,
}

pub struct ChainRunner {
    pub data: Dataset,
    pub hp: HyperParams,
    pub cfg: SamplerConfig,
    pub state: ChainState,
    cov: Box<dyn CovariateModel>,
    resp: Option<Box<dyn ResponseModel>>,
    variant: Box<dyn SliceVariant>,
    ctx: CovContext,
    members: Vec<Vec<usize>>,
    resp_kernels: ResponseKernels,
    cov_kernels: CovKernels,
    select_kernels: SelectKernels,
    alpha_kernel: AdaptiveKernel,
    move_stats: MoveStats,
    rng: RngStream,
    check_rng: RngStream,
    sweep_idx: usize,
    theta_len: usize,
}

impl ChainRunner {
    /// Build a runner; `x_model` picks the covariate model by name (inferred
    /// from the column kinds when omitted).
    pub fn new(
        data: Dataset,
        hp: HyperParams,
        cfg: SamplerConfig,
        x_model: Option<&str>,
    ) -> Result<ChainRunner> {
        data.validate()?;
        hp.validate(&data)?;
        if hp.variant == SamplerVariantKind::Truncated && hp.n_clus_init > hp.truncation_c {
            return Err(Error::Config(format!(
                "nClusInit = {} exceeds the truncation level {}",
                hp.n_clus_init, hp.truncation_c
            )));
        }
        let name = x_model.unwrap_or_else(|| covariate::infer_name(&data));
        let cov = covariate::by_name(name, &data)?;
        let ctx = CovContext::new(&data, &hp)?;
        let resp = data.response_kind().map(response::for_kind);
        let theta_len = resp.as_ref().map(|m| m.theta_len(&data)).unwrap_or(0);
        let n_beta = theta_len * data.n_fixed_effects();
        let n_lambda = if hp.extra_variation { data.n() } else { 0 };
        let rng = RngStream::new(hp.seed);
        let check_rng = rng.substream(CHECK_STREAM);
        let n = data.n();
        let n_cov = data.n_covariates();
        let variant = variant::by_kind(hp.variant);
        Ok(ChainRunner {
            state: ChainState {
                sticks: StickState::new(1.0),
                alloc: AllocationState::new(n),
                clusters: Vec::new(),
                globals: GlobalParams::new(n_beta, n_cov),
            },
            members: Vec::new(),
            resp_kernels: ResponseKernels::new(n_beta, n_lambda),
            cov_kernels: CovKernels::new(),
            select_kernels: SelectKernels::new(n_cov),
            alpha_kernel: AdaptiveKernel::scalar(1.0),
            move_stats: MoveStats::default(),
            rng,
            check_rng,
            sweep_idx: 0,
            theta_len,
            data,
            hp,
            cfg,
            cov,
            resp,
            variant,
            ctx,
        })
    }

    pub fn response_model(&self) -> Option<&dyn ResponseModel> {
        self.resp.as_deref()
    }

    pub fn covariate_model(&self) -> &dyn CovariateModel {
        self.cov.as_ref()
    }

    pub fn context(&self) -> &CovContext {
        &self.ctx
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn move_stats(&self) -> &MoveStats {
        &self.move_stats
    }

    pub fn rng_mut(&mut self) -> &mut RngStream {
        &mut self.rng
    }

    pub fn init(&mut self, mode: InitMode) -> Result<()> {
        let n = self.data.n();
        let alpha = sample_gamma(self.hp.shape_alpha, self.hp.rate_alpha, &mut self.rng)?;
        self.state.sticks = StickState::new(alpha);

        // global parameters from their priors
        let g = &mut self.state.globals;
        for b in g.beta.iter_mut() {
            *b = self.hp.mu_beta
                + self.hp.sigma_beta * sample_student_t(T_PRIOR_DF, &mut self.rng)?;
        }
        g.tau_y = sample_gamma(self.hp.s_tau_y, self.hp.r_tau_y, &mut self.rng)?;
        g.tau_eps = sample_gamma(self.hp.s_tau_eps, self.hp.r_tau_eps, &mut self.rng)?;
        for j in 0..g.rho.len() {
            match self.hp.var_select {
                VarSelectKind::None => {
                    g.rho_omega[j] = true;
                    g.rho[j] = 0.5;
                    g.zeta[j] = 1.0;
                }
                _ => {
                    g.rho_omega[j] = self.rng.open01() < 0.5;
                    g.rho[j] = if g.rho_omega[j] {
                        sample_beta(self.hp.a_rho, self.hp.b_rho, &mut self.rng)?
                    } else {
                        0.0
                    };
                    g.zeta[j] = if self.rng.open01() < g.rho[j] {
                        sample_beta(crate::covariate::select::SELECT_SLAB_SHAPE, 1.0, &mut self.rng)?
                    } else {
                        sample_beta(1.0, crate::covariate::select::SELECT_SLAB_SHAPE, &mut self.rng)?
                    };
                }
            }
        }

        // allocations and sticks
        match mode {
            InitMode::UniformAllocation => {
                let k = self.hp.n_clus_init;
                for i in 0..n {
                    self.state.alloc.z[i] =
                        ((self.rng.open01() * k as f64) as usize).min(k - 1);
                }
                match self.variant.kind() {
                    SamplerVariantKind::Truncated => {
                        let c = self.hp.truncation_c;
                        for _ in 0..c - 1 {
                            let v = sample_beta(1.0, alpha, &mut self.rng)?;
                            self.state.sticks.push(v);
                        }
                        self.state.sticks.v.push(1.0);
                        self.state.sticks.recompute_psi();
                    }
                    _ => {
                        for _ in 0..k {
                            let v = sample_beta(1.0, alpha, &mut self.rng)?;
                            self.state.sticks.push(v);
                        }
                    }
                }
            }
            InitMode::Prior => {
                if self.variant.kind() == SamplerVariantKind::Truncated {
                    let c = self.hp.truncation_c;
                    for _ in 0..c - 1 {
                        let v = sample_beta(1.0, alpha, &mut self.rng)?;
                        self.state.sticks.push(v);
                    }
                    self.state.sticks.v.push(1.0);
                    self.state.sticks.recompute_psi();
                }
                let cap = 10 * n + 1000;
                for i in 0..n {
                    let r = self.rng.open01();
                    let mut cum = 0.0;
                    let mut label = None;
                    let mut c = 0;
                    loop {
                        if c >= self.state.sticks.len() {
                            if self.variant.kind() == SamplerVariantKind::Truncated {
                                label = Some(self.state.sticks.len() - 1);
                                break;
                            }
                            if c >= cap {
                                return Err(Error::StickExtensionCap { cap, sweep: 0 });
                            }
                            let v = sample_beta(1.0, alpha, &mut self.rng)?;
                            self.state.sticks.push(v);
                        }
                        cum += self.state.sticks.psi[c];
                        if r < cum {
                            label = Some(c);
                            break;
                        }
                        c += 1;
                    }
                    self.state.alloc.z[i] = label.unwrap();
                }
            }
        }

        // cluster parameters from the prior for every instantiated label
        let n_labels = self.state.sticks.len();
        self.state.clusters.clear();
        for _ in 0..n_labels {
            let mut cp = ClusterParams::default();
            self.draw_cluster_prior(&mut cp)?;
            self.state.clusters.push(cp);
        }
        self.resp_kernels.ensure_labels(n_labels, self.theta_len);
        self.cov_kernels
            .ensure_labels(n_labels, self.ctx.layout.discrete.len());

        self.state.alloc.refresh_counts(n_labels);
        self.state.alloc.c_star = n_labels - 1;
        self.members = self.state.alloc.members(n_labels);

        // extra-variation latents around their linear predictors
        if self.hp.extra_variation {
            let g = &self.state.globals;
            let mut lambda = Vec::with_capacity(n);
            for i in 0..n {
                let bw = beta_w(&self.data, g, self.theta_len.max(1), i);
                let center = self.state.clusters[self.state.alloc.z[i]].theta[0] + bw[0];
                lambda.push(sample_normal(center, 1.0 / g.tau_eps, &mut self.rng)?);
            }
            self.state.globals.lambda = lambda;
        }

        // slice variables from their conditional
        self.variant
            .draw_u(&self.state.sticks, &mut self.state.alloc, &self.hp, &mut self.rng)?;
        self.sweep_idx = 0;
        Ok(())
    }

    fn draw_cluster_prior(&mut self, cp: &mut ClusterParams) -> Result<()> {
        self.cov
            .draw_prior(&self.data, &self.ctx, &self.hp, cp, &mut self.rng)?;
        if self.resp.is_some() {
            cp.theta = response::draw_theta_prior(self.theta_len, &self.hp, &mut self.rng)?;
        }
        if self.hp.var_select == VarSelectKind::BinaryCluster {
            let g = &self.state.globals;
            let gamma = (0..self.data.n_covariates())
                .map(|j| (self.rng.open01() < g.rho[j]) as u8)
                .collect();
            cp.gamma = Some(gamma);
        }
        Ok(())
    }

    /// One full sweep (steps A through G).
    pub fn sweep(&mut self) -> Result<()> {
        let t = self.sweep_idx;
        self.step_a();
        self.step_b().map_err(|e| e.at_step(t, 'B'))?;
        self.step_c();
        self.step_d().map_err(|e| e.at_step(t, 'D'))?;
        self.step_e().map_err(|e| e.at_step(t, 'E'))?;
        self.step_f().map_err(|e| e.at_step(t, 'F'))?;
        self.step_g().map_err(|e| e.at_step(t, 'G'))?;
        if self.cfg.check_invariants {
            self.check_invariants()?;
        }
        self.sweep_idx += 1;
        Ok(())
    }

    fn step_a(&mut self) {
        let n_labels = self.state.clusters.len();
        self.state.alloc.refresh_counts(n_labels);
        self.members = self.state.alloc.members(n_labels);
    }

    fn step_b(&mut self) -> Result<()> {
        let z_star = self.state.alloc.z_star;
        let fixed = self.variant.fixed_stick(&self.hp);
        // B.1: stick fractions of active labels
        for c in 0..=z_star {
            if fixed == Some(c) {
                continue;
            }
            let a = 1.0 + self.state.alloc.counts[c] as f64;
            let b = self.state.sticks.alpha + self.state.alloc.counts_above[c] as f64;
            self.state.sticks.v[c] = sample_beta(a, b, &mut self.rng)?;
        }
        self.state.sticks.recompute_psi();

        // B.2: active cluster parameters
        for c in 0..=z_star {
            let mut cp = std::mem::take(&mut self.state.clusters[c]);
            self.cov.update_cluster(
                &self.data,
                &self.ctx,
                &self.hp,
                c,
                &self.members[c],
                &mut cp,
                &self.state.globals,
                &mut self.cov_kernels,
                &mut self.rng,
            )?;
            self.state.clusters[c] = cp;
        }
        if let Some(model) = self.resp.as_deref() {
            response::update_theta(
                model,
                &self.data,
                &self.members[..=z_star],
                &mut self.state.clusters[..=z_star],
                &self.state.globals,
                &mut self.resp_kernels,
                &self.hp,
                &mut self.rng,
            )?;
        }

        // B.3: label switching
        let mut args = MoveArgs {
            sticks: &mut self.state.sticks,
            alloc: &mut self.state.alloc,
            clusters: &mut self.state.clusters,
            resp_kernels: &mut self.resp_kernels,
            cov_kernels: &mut self.cov_kernels,
        };
        apply_label_switch_moves(&mut args, &mut self.move_stats, &mut self.rng)?;
        self.members = self.state.alloc.members(self.state.clusters.len());

        // B.4: slice variables
        self.variant
            .draw_u(&self.state.sticks, &mut self.state.alloc, &self.hp, &mut self.rng)
    }

    fn step_c(&mut self) {
        self.state.alloc.z_star = *self.state.alloc.z.iter().max().expect("no individuals");
        // u_star was set by draw_u; nothing else to do here: the active set
        // is implied by z_star and the potential set is fixed in D.2
    }

    fn step_d(&mut self) -> Result<()> {
        // D.1: concentration parameter on the log scale
        let z_star = self.state.alloc.z_star;
        let fixed = self.variant.fixed_stick(&self.hp);
        let v_active: Vec<f64> = (0..=z_star)
            .filter(|c| fixed != Some(*c))
            .map(|c| self.state.sticks.v[c])
            .collect();
        let target = alpha_log_conditional(&v_active, self.hp.shape_alpha, self.hp.rate_alpha);
        let (new_log_alpha, _) = rwm_step(
            target,
            self.state.sticks.alpha.ln(),
            &mut self.alpha_kernel,
            &mut self.rng,
        );
        self.state.sticks.alpha = new_log_alpha.exp();

        // D.2: potential sticks and the component bound
        let cap = 10 * self.data.n() + 1000;
        let c_star = self.variant.determine_reach(
            &mut self.state.sticks,
            z_star,
            self.state.alloc.u_star,
            &self.hp,
            &mut self.rng,
            cap,
            self.sweep_idx,
        )?;
        self.state.alloc.c_star = c_star;
        let n_labels = c_star + 1;
        self.state
            .clusters
            .resize_with(n_labels, ClusterParams::default);
        self.members.resize_with(n_labels, Vec::new);
        let extend = self.state.alloc.counts.len() < n_labels;
        if extend {
            self.state.alloc.counts.resize(n_labels, 0);
            self.state.alloc.counts_above.resize(n_labels, 0);
        }
        Ok(())
    }

    fn step_e(&mut self) -> Result<()> {
        let z_star = self.state.alloc.z_star;
        let c_star = self.state.alloc.c_star;
        self.resp_kernels.ensure_labels(c_star + 1, self.theta_len);
        self.cov_kernels
            .ensure_labels(c_star + 1, self.ctx.layout.discrete.len());
        for c in z_star + 1..=c_star {
            let mut cp = std::mem::take(&mut self.state.clusters[c]);
            self.draw_cluster_prior(&mut cp)?;
            self.state.clusters[c] = cp;
            self.resp_kernels.reset_label(c);
            self.cov_kernels.reset_label(c);
        }
        Ok(())
    }

    fn step_f(&mut self) -> Result<()> {
        if let Some(model) = self.resp.as_deref() {
            response::update_beta(
                model,
                &self.data,
                &self.state.alloc.z,
                &self.state.clusters,
                &mut self.state.globals,
                &mut self.resp_kernels,
                &self.hp,
                &mut self.rng,
            )?;
            if model.has_tau_y() {
                response::update_tau_y(
                    &self.data,
                    &self.state.alloc.z,
                    &self.state.clusters,
                    &mut self.state.globals,
                    &self.hp,
                    &mut self.rng,
                )?;
            }
            if self.hp.extra_variation {
                response::update_extra_variation(
                    model,
                    &self.data,
                    &self.state.alloc.z,
                    &self.state.clusters,
                    &mut self.state.globals,
                    &mut self.resp_kernels,
                    &self.hp,
                    &mut self.rng,
                )?;
            }
        }
        update_selectors(
            &self.data,
            &self.ctx,
            &self.hp,
            self.cov.as_ref(),
            &self.members,
            &mut self.state.clusters,
            &mut self.state.globals,
            &mut self.select_kernels,
            &mut self.rng,
        )
    }

    fn step_g(&mut self) -> Result<()> {
        let n_labels = self.state.clusters.len();
        let n = self.data.n();
        let g = &self.state.globals;
        let extra = self.hp.extra_variation;
        let t_len = self.theta_len.max(1);
        let mut lw = vec![0.0f64; n_labels];
        for i in 0..n {
            let u_i = self.state.alloc.u.get(i).copied().unwrap_or(1.0);
            let bw = if self.resp.is_some() {
                beta_w(&self.data, g, t_len, i)
            } else {
                vec![0.0; t_len]
            };
            for (c, l) in lw.iter_mut().enumerate() {
                let mut weight =
                    self.variant
                        .log_slice_weight(c, &self.state.sticks, u_i, &self.hp);
                if weight > f64::NEG_INFINITY {
                    let cp = &self.state.clusters[c];
                    weight += self.cov.log_lik(&self.data, &self.ctx, i, cp, g);
                    if let Some(model) = self.resp.as_deref() {
                        weight += if extra {
                            crate::dist::log_normal(
                                g.lambda[i],
                                cp.theta[0] + bw[0],
                                1.0 / g.tau_eps,
                            )
                        } else {
                            model.log_lik(&self.data, i, &cp.theta, &bw, g)
                        };
                    }
                }
                *l = weight;
            }
            let pick = sample_from_log_weights(&lw, &mut self.rng).ok_or(
                Error::ImpossibleState {
                    individual: i,
                    sweep: self.sweep_idx,
                },
            )?;
            self.state.alloc.z[i] = pick;
        }
        self.state.alloc.refresh_counts(n_labels);
        self.members = self.state.alloc.members(n_labels);
        Ok(())
    }

    /// Slice-sampler invariants, checked each sweep when enabled: the
    /// component bound dominates the largest allocation, every slice variable
    /// sits below its component's width, and a ten-component window beyond
    /// the bound stays under the smallest slice variable. Window draws come
    /// from a dedicated substream so they never perturb the chain.
    pub fn check_invariants(&mut self) -> Result<()> {
        let sweep = self.sweep_idx;
        let alloc = &self.state.alloc;
        let sticks = &self.state.sticks;
        let fail = |what: String| Err(Error::InvariantViolation { sweep, what });
        if alloc.c_star < alloc.z_star {
            return fail(format!(
                "component bound {} below largest allocation {}",
                alloc.c_star, alloc.z_star
            ));
        }
        if alloc.counts.iter().sum::<usize>() != self.data.n() {
            return fail("label counts do not partition the individuals".into());
        }
        let psi_sum: f64 = sticks.psi.iter().sum();
        if !(psi_sum <= 1.0 + 1e-9) || sticks.psi.iter().any(|&p| p <= 0.0) {
            return fail(format!("invalid stick weights (sum {psi_sum})"));
        }
        match self.variant.kind() {
            SamplerVariantKind::SliceDependent => {
                for i in 0..self.data.n() {
                    if !(alloc.u[i] > 0.0 && alloc.u[i] < sticks.psi[alloc.z[i]]) {
                        return fail(format!(
                            "slice variable {} of individual {i} escapes (0, {})",
                            alloc.u[i], sticks.psi[alloc.z[i]]
                        ));
                    }
                }
            }
            SamplerVariantKind::SliceIndependent => {
                for i in 0..self.data.n() {
                    let xi = xi_width(alloc.z[i], self.hp.kappa_slice);
                    if !(alloc.u[i] > 0.0 && alloc.u[i] < xi) {
                        return fail(format!(
                            "slice variable {} of individual {i} escapes (0, {xi})",
                            alloc.u[i]
                        ));
                    }
                }
            }
            SamplerVariantKind::Truncated => return Ok(()),
        }
        // window beyond the bound: lazily drawn sticks must sit below u_star
        let mut remaining = sticks.remaining();
        for k in 0..10 {
            let v = sample_beta(1.0, sticks.alpha, &mut self.check_rng)?;
            let psi = v * remaining;
            remaining *= 1.0 - v;
            if psi >= alloc.u_star {
                return fail(format!(
                    "stick {} beyond the bound carries weight {psi} >= u_star {}",
                    alloc.c_star + 1 + k,
                    alloc.u_star
                ));
            }
        }
        Ok(())
    }

    pub fn freeze_adaptation(&mut self) {
        self.resp_kernels.freeze();
        self.cov_kernels.freeze();
        self.select_kernels.freeze();
        self.alpha_kernel.freeze();
    }

    /// Snapshot of the current state as an archive record.
    pub fn record(&self) -> SweepRecord {
        let state = &self.state;
        let n_labels = state.clusters.len();
        let has_discrete = !self.ctx.layout.discrete.is_empty();
        let has_gaussian = !self.ctx.layout.continuous.is_empty();
        let log_params = self.cfg.log_cluster_params;
        let accept = AcceptanceSummary {
            theta: kernel_rate(self.resp_kernels.theta.iter().flatten()),
            beta: kernel_rate(self.resp_kernels.beta.iter()),
            alpha: self.alpha_kernel.acceptance_rate(),
            lambda: kernel_rate(self.resp_kernels.lambda.iter()),
            moves: self.move_stats.rates(),
        };
        let record = SweepRecord {
            sweep: self.sweep_idx,
            z: state.alloc.z.iter().map(|&z| z as u32).collect(),
            alpha: state.sticks.alpha,
            n_clusters: state.alloc.n_nonempty(),
            theta: state.clusters.iter().map(|c| c.theta.clone()).collect(),
            beta: state.globals.beta.clone(),
            rho: state.globals.rho.clone(),
            zeta: state.globals.zeta.clone(),
            psi: state.sticks.psi.clone(),
            phi: (log_params && has_discrete).then(|| {
                state
                    .clusters
                    .iter()
                    .map(|c| c.phi.clone().unwrap_or_default())
                    .collect()
            }),
            mu: (log_params && has_gaussian).then(|| {
                state
                    .clusters
                    .iter()
                    .map(|c| c.mu.as_ref().map(|m| m.iter().cloned().collect()).unwrap_or_default())
                    .collect()
            }),
            sigma: (log_params && has_gaussian).then(|| {
                state
                    .clusters
                    .iter()
                    .map(|c| {
                        c.sigma
                            .as_ref()
                            .map(|m| m.iter().cloned().collect())
                            .unwrap_or_default()
                    })
                    .collect()
            }),
            gamma: (log_params && self.hp.var_select == VarSelectKind::BinaryCluster).then(|| {
                state
                    .clusters
                    .iter()
                    .map(|c| c.gamma.clone().unwrap_or_default())
                    .collect()
            }),
            log_marg_model_post: self.log_marg_model_post(),
            accept,
        };
        debug_assert_eq!(record.theta.len(), n_labels);
        record
    }

    pub fn log_marg_model_post(&self) -> f64 {
        log_marg_model_post(
            &self.data,
            &self.ctx,
            &self.hp,
            self.cov.as_ref(),
            self.resp.as_deref(),
            &self.members,
            &self.state.alloc.counts,
            &self.state.globals,
            self.state.sticks.alpha,
        )
    }

    /// Run the whole chain: init, burn-in, archive.
    pub fn run(&mut self, sink: &mut dyn SweepSink) -> Result<()> {
        self.init(InitMode::UniformAllocation)?;
        let total = self.cfg.n_burn + self.cfg.n_sweeps;
        for t in 0..total {
            self.sweep()?;
            if t + 1 == self.cfg.n_burn {
                self.freeze_adaptation();
            }
            if t >= self.cfg.n_burn {
                let record = self.record();
                sink.accept(&record)?;
            }
            if self.cfg.report_every > 0 && (t + 1) % self.cfg.report_every == 0 {
                eprintln!(
                    "sweep {}/{} ({} clusters, alpha {:.3})",
                    t + 1,
                    total,
                    self.state.alloc.n_nonempty(),
                    self.state.sticks.alpha
                );
            }
        }
        Ok(())
    }

    /// Overwrite the data with draws from the likelihood at the current
    /// parameters (joint-distribution testing).
    pub fn regenerate_data(&mut self) -> Result<()> {
        for i in 0..self.data.n() {
            let zi = self.state.alloc.z[i];
            let cp = std::mem::take(&mut self.state.clusters[zi]);
            self.cov.simulate_row(
                &mut self.data,
                &self.ctx,
                i,
                &cp,
                &self.state.globals,
                &mut self.rng,
            )?;
            if let Some(model) = self.resp.as_deref() {
                let bw = beta_w(&self.data, &self.state.globals, self.theta_len, i);
                model.simulate(
                    &mut self.data,
                    i,
                    &cp.theta,
                    &bw,
                    &self.state.globals,
                    &mut self.rng,
                )?;
            }
            self.state.clusters[zi] = cp;
        }
        Ok(())
    }
}

impl SweepRecord {
    fn with_labels(mut self, n_labels: usize) -> SweepRecord {
        debug_assert_eq!(self.theta.len(), n_labels);
        debug_assert_eq!(self.psi.len(), n_labels);
        self
    }
}

fn kernel_rate<'a>(kernels: impl Iterator<Item = &'a AdaptiveKernel>) -> f64 {
    let (mut acc, mut prop) = (0u64, 0u64);
    for k in kernels {
        acc += k.accepted;
        prop += k.proposed;
    }
    if prop == 0 {
        0.0
    } else {
        acc as f64 / prop as f64
    }
}

/// Log conditional of the concentration parameter on the log scale:
/// gamma prior, one Beta(1, alpha) factor per active stick fraction, and the
/// exp Jacobian.
pub fn alpha_log_conditional(
    v_active: &[f64],
    shape: f64,
    rate: f64,
) -> impl Fn(f64) -> f64 + '_ {
    move |log_alpha: f64| {
        let alpha = log_alpha.exp();
        if !alpha.is_finite() || alpha <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lp = log_gamma_pdf(alpha, shape, rate) + log_alpha;
        for &v in v_active {
            lp += alpha.ln() + (alpha - 1.0) * (-v).ln_1p();
        }
        lp
    }
}
