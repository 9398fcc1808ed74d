//! Response likelihood models for profile regression.
//!
//! Five models are registered by name: `bernoulli`, `binomial`, `poisson`,
//! `gaussian` and `categorical`. Every model links the outcome to the shared
//! cluster allocation through a linear predictor
//! `lambda_i = theta_{z_i} + beta' W_i` (per non-reference category for the
//! categorical model, which uses category 0 as the reference). Intercepts and
//! fixed-effect coefficients carry location-scale t priors with 7 degrees of
//! freedom and move by adaptive random-walk Metropolis; the Gaussian response
//! precision has a conjugate gamma Gibbs update.
//!
//! With extra variation enabled, lambda_i itself becomes a sampled latent
//! with a Normal(theta_{z_i} + beta' W_i, 1/tau_eps) prior; allocation then
//! weighs clusters by that normal density instead of the outcome likelihood.

use statrs::function::gamma::ln_gamma;

use crate::adapt::{rwm_step, AdaptiveKernel};
use crate::data::{Dataset, Outcome, ResponseKind};
use crate::dist::{log_normal, log_t_loc_scale, sample_gamma, sample_student_t};
use crate::error::Result;
use crate::hyper::{HyperParams, T_PRIOR_DF};
use crate::rng::RngStream;
use crate::state::{ClusterParams, GlobalParams};
use crate::util::{expit, log1pexp, logsumexp};

pub trait ResponseModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> ResponseKind;

    /// Length of a cluster's theta vector (1, or R-1 for categorical).
    fn theta_len(&self, data: &Dataset) -> usize;

    /// Log likelihood of outcome `i` given the intercepts of one cluster and
    /// the fixed-effect contribution `bw` (one entry per theta component).
    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], g: &GlobalParams)
        -> f64;

    /// Log likelihood at a raw linear predictor (scalar-predictor models
    /// only; used by the extra-variation latents).
    fn log_lik_at_lambda(&self, _data: &Dataset, _i: usize, _lambda: f64, _g: &GlobalParams) -> f64 {
        unimplemented!("scalar linear predictor not defined for this model")
    }

    /// Response mean emitted by predictions: success probability per trial
    /// for bernoulli/binomial, the rate multiplier exp(lambda) for poisson,
    /// lambda for gaussian, the expected category index for categorical.
    fn mean(&self, theta: &[f64], bw: &[f64], g: &GlobalParams) -> f64;

    /// Replace outcome `i` with a draw from the likelihood.
    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()>;

    fn has_tau_y(&self) -> bool {
        false
    }

    fn allows_extra_variation(&self) -> bool {
        false
    }
}

pub fn registered_names() -> &'static [&'static str] {
    &["bernoulli", "binomial", "poisson", "gaussian", "categorical"]
}

pub fn by_name(name: &str) -> Result<Box<dyn ResponseModel>> {
    match ResponseKind::parse(name)? {
        ResponseKind::Bernoulli => Ok(Box::new(BernoulliResponse)),
        ResponseKind::Binomial => Ok(Box::new(BinomialResponse)),
        ResponseKind::Poisson => Ok(Box::new(PoissonResponse)),
        ResponseKind::Gaussian => Ok(Box::new(GaussianResponse)),
        ResponseKind::Categorical => Ok(Box::new(CategoricalResponse)),
    }
}

pub fn for_kind(kind: ResponseKind) -> Box<dyn ResponseModel> {
    by_name(kind.name()).unwrap()
}

struct BernoulliResponse;
struct BinomialResponse;
struct PoissonResponse;
struct GaussianResponse;
struct CategoricalResponse;

impl ResponseModel for BernoulliResponse {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn kind(&self) -> ResponseKind {
        ResponseKind::Bernoulli
    }

    fn theta_len(&self, _data: &Dataset) -> usize {
        1
    }

    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], g: &GlobalParams) -> f64 {
        self.log_lik_at_lambda(data, i, theta[0] + bw[0], g)
    }

    fn log_lik_at_lambda(&self, data: &Dataset, i: usize, lambda: f64, _g: &GlobalParams) -> f64 {
        let Outcome::Bernoulli(y) = &data.outcome else {
            unreachable!()
        };
        y[i] as f64 * lambda - log1pexp(lambda)
    }

    fn mean(&self, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        expit(theta[0] + bw[0])
    }

    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let lambda = effective_lambda(theta, bw, g, i);
        let p = expit(lambda);
        let Outcome::Bernoulli(y) = &mut data.outcome else {
            unreachable!()
        };
        y[i] = if rng.open01() < p { 1 } else { 0 };
        Ok(())
    }

    fn allows_extra_variation(&self) -> bool {
        true
    }
}

impl ResponseModel for BinomialResponse {
    fn name(&self) -> &'static str {
        "binomial"
    }

    fn kind(&self) -> ResponseKind {
        ResponseKind::Binomial
    }

    fn theta_len(&self, _data: &Dataset) -> usize {
        1
    }

    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], g: &GlobalParams) -> f64 {
        self.log_lik_at_lambda(data, i, theta[0] + bw[0], g)
    }

    // binomial coefficient included so stored likelihoods are comparable
    // across runs
    fn log_lik_at_lambda(&self, data: &Dataset, i: usize, lambda: f64, _g: &GlobalParams) -> f64 {
        let Outcome::Binomial { y, trials } = &data.outcome else {
            unreachable!()
        };
        let (yi, ti) = (y[i] as f64, trials[i] as f64);
        ln_choose(trials[i], y[i]) + yi * lambda - ti * log1pexp(lambda)
    }

    fn mean(&self, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        expit(theta[0] + bw[0])
    }

    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let lambda = effective_lambda(theta, bw, g, i);
        let p = expit(lambda);
        let Outcome::Binomial { y, trials } = &mut data.outcome else {
            unreachable!()
        };
        y[i] = crate::dist::sample_binomial(trials[i], p, rng);
        Ok(())
    }

    fn allows_extra_variation(&self) -> bool {
        true
    }
}

impl ResponseModel for PoissonResponse {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn kind(&self) -> ResponseKind {
        ResponseKind::Poisson
    }

    fn theta_len(&self, _data: &Dataset) -> usize {
        1
    }

    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], g: &GlobalParams) -> f64 {
        self.log_lik_at_lambda(data, i, theta[0] + bw[0], g)
    }

    fn log_lik_at_lambda(&self, data: &Dataset, i: usize, lambda: f64, _g: &GlobalParams) -> f64 {
        let Outcome::Poisson { y, offset } = &data.outcome else {
            unreachable!()
        };
        let yi = y[i] as f64;
        let log_mu = offset[i].ln() + lambda;
        yi * log_mu - log_mu.exp() - ln_gamma(yi + 1.0)
    }

    fn mean(&self, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        (theta[0] + bw[0]).exp()
    }

    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let lambda = effective_lambda(theta, bw, g, i);
        let Outcome::Poisson { y, offset } = &mut data.outcome else {
            unreachable!()
        };
        let mu = offset[i] * lambda.exp();
        y[i] = crate::dist::sample_poisson(mu, rng)?;
        Ok(())
    }

    fn allows_extra_variation(&self) -> bool {
        true
    }
}

impl ResponseModel for GaussianResponse {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn kind(&self) -> ResponseKind {
        ResponseKind::Gaussian
    }

    fn theta_len(&self, _data: &Dataset) -> usize {
        1
    }

    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], g: &GlobalParams) -> f64 {
        let Outcome::Gaussian(y) = &data.outcome else {
            unreachable!()
        };
        log_normal(y[i], theta[0] + bw[0], 1.0 / g.tau_y)
    }

    fn mean(&self, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        theta[0] + bw[0]
    }

    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let draw = crate::dist::sample_normal(theta[0] + bw[0], 1.0 / g.tau_y, rng)?;
        let Outcome::Gaussian(y) = &mut data.outcome else {
            unreachable!()
        };
        y[i] = draw;
        Ok(())
    }

    fn has_tau_y(&self) -> bool {
        true
    }
}

impl ResponseModel for CategoricalResponse {
    fn name(&self) -> &'static str {
        "categorical"
    }

    fn kind(&self) -> ResponseKind {
        ResponseKind::Categorical
    }

    fn theta_len(&self, data: &Dataset) -> usize {
        data.n_response_categories() - 1
    }

    fn log_lik(&self, data: &Dataset, i: usize, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        let Outcome::Categorical { y, .. } = &data.outcome else {
            unreachable!()
        };
        let lp = category_log_probs(theta, bw);
        lp[y[i] as usize]
    }

    fn mean(&self, theta: &[f64], bw: &[f64], _g: &GlobalParams) -> f64 {
        // expected category index
        category_log_probs(theta, bw)
            .iter()
            .enumerate()
            .map(|(r, lp)| r as f64 * lp.exp())
            .sum()
    }

    fn simulate(
        &self,
        data: &mut Dataset,
        i: usize,
        theta: &[f64],
        bw: &[f64],
        _g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let lp = category_log_probs(theta, bw);
        let r = crate::util::sample_from_log_weights(&lp, rng).expect("category probabilities");
        let Outcome::Categorical { y, .. } = &mut data.outcome else {
            unreachable!()
        };
        y[i] = r as u32;
        Ok(())
    }
}

/// Category log probabilities with category 0 as the reference: the linear
/// predictor of each non-reference category is its log odds against the
/// reference, so p_r = exp(lambda_r) / (1 + sum_s exp(lambda_s)).
pub fn category_log_probs(theta: &[f64], bw: &[f64]) -> Vec<f64> {
    let mut lw = Vec::with_capacity(theta.len() + 1);
    lw.push(0.0);
    for (t, b) in theta.iter().zip(bw) {
        lw.push(t + b);
    }
    let norm = logsumexp(&lw);
    lw.iter().map(|l| l - norm).collect()
}

fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn effective_lambda(theta: &[f64], bw: &[f64], g: &GlobalParams, i: usize) -> f64 {
    if g.lambda.is_empty() {
        theta[0] + bw[0]
    } else {
        g.lambda[i]
    }
}

/// Fixed-effect contribution beta' W_i per theta component.
pub fn beta_w(data: &Dataset, g: &GlobalParams, n_rows: usize, i: usize) -> Vec<f64> {
    let l = data.n_fixed_effects();
    let mut out = vec![0.0; n_rows];
    if l == 0 {
        return out;
    }
    let w = data.fixed.row(i);
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (lidx, wv) in w.iter().enumerate() {
            acc += g.beta[r * l + lidx] * wv;
        }
        *o = acc;
    }
    out
}

/// Adaptive kernels for the response side.
#[derive(Clone, Debug, Default)]
pub struct ResponseKernels {
    /// per label, per theta component
    pub theta: Vec<Vec<AdaptiveKernel>>,
    /// per fixed-effect coefficient (row-major (R-1 or 1) x L)
    pub beta: Vec<AdaptiveKernel>,
    /// per individual, extra-variation latents
    pub lambda: Vec<AdaptiveKernel>,
    pub adapting: bool,
}

impl ResponseKernels {
    pub fn new(n_beta: usize, n_lambda: usize) -> ResponseKernels {
        ResponseKernels {
            theta: Vec::new(),
            beta: (0..n_beta).map(|_| AdaptiveKernel::scalar(1.0)).collect(),
            lambda: (0..n_lambda).map(|_| AdaptiveKernel::scalar(1.0)).collect(),
            adapting: true,
        }
    }

    pub fn ensure_labels(&mut self, n_labels: usize, theta_len: usize) {
        while self.theta.len() < n_labels {
            let mut ks: Vec<AdaptiveKernel> =
                (0..theta_len).map(|_| AdaptiveKernel::scalar(1.0)).collect();
            for k in &mut ks {
                k.adapting = self.adapting;
            }
            self.theta.push(ks);
        }
    }

    /// Labels are not identities across sweeps; reset the tuning state when a
    /// label's cluster empties out.
    pub fn reset_label(&mut self, label: usize) {
        if let Some(ks) = self.theta.get_mut(label) {
            for k in ks.iter_mut() {
                *k = AdaptiveKernel::scalar(1.0);
                k.adapting = self.adapting;
            }
        }
    }

    pub fn swap_labels(&mut self, a: usize, b: usize) {
        if a.max(b) < self.theta.len() {
            self.theta.swap(a, b);
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
        for ks in &mut self.theta {
            for k in ks {
                k.freeze();
            }
        }
        for k in &mut self.beta {
            k.freeze();
        }
        for k in &mut self.lambda {
            k.freeze();
        }
    }
}

/// Update every cluster intercept. Clusters without members draw directly
/// from the t prior; others move by one adaptive random-walk Metropolis step
/// per component against [member log likelihood + t prior].
#[allow(clippy::too_many_arguments)]
pub fn update_theta(
    model: &dyn ResponseModel,
    data: &Dataset,
    members: &[Vec<usize>],
    clusters: &mut [ClusterParams],
    g: &GlobalParams,
    kernels: &mut ResponseKernels,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    let t_len = model.theta_len(data);
    kernels.ensure_labels(clusters.len(), t_len);
    let extra = !g.lambda.is_empty();
    for (c, cp) in clusters.iter_mut().enumerate() {
        let rows: &[usize] = members.get(c).map(|m| m.as_slice()).unwrap_or(&[]);
        if cp.theta.len() != t_len {
            cp.theta = draw_theta_prior(t_len, hp, rng)?;
        }
        if rows.is_empty() {
            cp.theta = draw_theta_prior(t_len, hp, rng)?;
            kernels.reset_label(c);
            continue;
        }
        for r in 0..t_len {
            let mut theta_probe = cp.theta.clone();
            let target = |v: f64| -> f64 {
                let mut th = theta_probe.clone();
                th[r] = v;
                let mut lp = log_t_loc_scale(v, hp.mu_theta, hp.sigma_theta, T_PRIOR_DF);
                for &i in rows {
                    let bw = beta_w(data, g, t_len, i);
                    lp += if extra {
                        // lambda_i carries the outcome; theta enters through
                        // the latent's normal prior
                        log_normal(g.lambda[i], th[r] + bw[r], 1.0 / g.tau_eps)
                    } else {
                        model.log_lik(data, i, &th, &bw, g)
                    };
                }
                lp
            };
            let (new_v, _) = rwm_step(target, cp.theta[r], &mut kernels.theta[c][r], rng);
            theta_probe[r] = new_v;
            cp.theta[r] = new_v;
        }
    }
    Ok(())
}

pub fn draw_theta_prior(t_len: usize, hp: &HyperParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    (0..t_len)
        .map(|_| Ok(hp.mu_theta + hp.sigma_theta * sample_student_t(T_PRIOR_DF, rng)?))
        .collect()
}

/// Update every fixed-effect coefficient against its full-data conditional.
/// A model without fixed effects is a no-op.
#[allow(clippy::too_many_arguments)]
pub fn update_beta(
    model: &dyn ResponseModel,
    data: &Dataset,
    z: &[usize],
    clusters: &[ClusterParams],
    g: &mut GlobalParams,
    kernels: &mut ResponseKernels,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    let l = data.n_fixed_effects();
    if l == 0 {
        return Ok(());
    }
    let t_len = model.theta_len(data);
    let extra = !g.lambda.is_empty();
    for r in 0..t_len {
        for lidx in 0..l {
            let flat = r * l + lidx;
            let current = g.beta[flat];
            let target = |v: f64| -> f64 {
                let mut probe = g.clone();
                probe.beta[flat] = v;
                let mut lp = log_t_loc_scale(v, hp.mu_beta, hp.sigma_beta, T_PRIOR_DF);
                for (i, &zi) in z.iter().enumerate() {
                    let bw = beta_w(data, &probe, t_len, i);
                    lp += if extra {
                        log_normal(g.lambda[i], clusters[zi].theta[r] + bw[r], 1.0 / g.tau_eps)
                    } else {
                        model.log_lik(data, i, &clusters[zi].theta, &bw, &probe)
                    };
                }
                lp
            };
            let (new_v, _) = rwm_step(target, current, &mut kernels.beta[flat], rng);
            g.beta[flat] = new_v;
        }
    }
    Ok(())
}

/// Conjugate gamma Gibbs draw of the Gaussian response precision.
pub fn update_tau_y(
    data: &Dataset,
    z: &[usize],
    clusters: &[ClusterParams],
    g: &mut GlobalParams,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    let Outcome::Gaussian(y) = &data.outcome else {
        return Ok(());
    };
    let mut ss = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let bw = beta_w(data, g, 1, i);
        let resid = y[i] - clusters[zi].theta[0] - bw[0];
        ss += resid * resid;
    }
    g.tau_y = sample_gamma(
        hp.s_tau_y + y.len() as f64 / 2.0,
        hp.r_tau_y + 0.5 * ss,
        rng,
    )?;
    Ok(())
}

/// Extra-variation layer: one adaptive Metropolis step per latent lambda_i
/// against [outcome likelihood at lambda + normal prior around
/// theta_{z_i} + beta' W_i], then the conjugate gamma draw of tau_eps from
/// the residuals.
#[allow(clippy::too_many_arguments)]
pub fn update_extra_variation(
    model: &dyn ResponseModel,
    data: &Dataset,
    z: &[usize],
    clusters: &[ClusterParams],
    g: &mut GlobalParams,
    kernels: &mut ResponseKernels,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    if g.lambda.is_empty() {
        return Ok(());
    }
    debug_assert!(model.allows_extra_variation());
    let n = data.n();
    let mut ss = 0.0;
    for i in 0..n {
        let bw = beta_w(data, g, 1, i);
        let center = clusters[z[i]].theta[0] + bw[0];
        let tau = g.tau_eps;
        let target = |v: f64| -> f64 {
            model.log_lik_at_lambda(data, i, v, g) + log_normal(v, center, 1.0 / tau)
        };
        let (new_v, _) = rwm_step(target, g.lambda[i], &mut kernels.lambda[i], rng);
        g.lambda[i] = new_v;
        let eps = new_v - center;
        ss += eps * eps;
    }
    g.tau_eps = sample_gamma(
        hp.s_tau_eps + n as f64 / 2.0,
        hp.r_tau_eps + 0.5 * ss,
        rng,
    )?;
    Ok(())
}
