//! Covariate likelihood models.
//!
//! Three interchangeable models are registered by name: `discrete`
//! (independent categorical columns with Dirichlet priors), `normal`
//! (a multivariate Gaussian block with normal/inverse-Wishart priors) and
//! `mixed` (both blocks, independent given the cluster). A `none` model backs
//! response-only runs.
//!
//! Both variable selection schemes shrink cluster parameters toward a null
//! profile computed from the whole dataset: the observed category proportions
//! for discrete columns and the sample means for continuous ones. The same
//! composite likelihood is used by allocation, parameter updates and
//! selector updates.

pub mod discrete;
pub mod gaussian;
pub mod select;

use nalgebra::DMatrix;

use crate::adapt::AdaptiveKernel;
use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::hyper::{ColumnLayout, HyperParams, VarSelectKind};
use crate::rng::RngStream;
use crate::state::{ClusterParams, GlobalParams};

/// Dataset-wide profile deselected covariates shrink toward.
#[derive(Clone, Debug)]
pub struct NullProfile {
    /// Observed category proportions per discrete column (by discrete position).
    pub phi0: Vec<Vec<f64>>,
    /// Sample mean per continuous column (by continuous position).
    pub xbar: Vec<f64>,
}

impl NullProfile {
    pub fn of(data: &Dataset) -> NullProfile {
        let layout = ColumnLayout::of(data);
        let mut phi0 = Vec::with_capacity(layout.discrete.len());
        for &j in &layout.discrete {
            let k = data.covariates.n_categories(j);
            let mut counts = vec![0usize; k];
            let mut total = 0usize;
            for i in 0..data.n() {
                if !data.covariates.is_missing(i, j) {
                    counts[data.covariates.category(i, j)] += 1;
                    total += 1;
                }
            }
            let props = if total == 0 {
                vec![1.0 / k as f64; k]
            } else {
                counts.iter().map(|&c| c as f64 / total as f64).collect()
            };
            phi0.push(props);
        }
        let mut xbar = Vec::with_capacity(layout.continuous.len());
        for &j in &layout.continuous {
            let mut sum = 0.0;
            let mut total = 0usize;
            for i in 0..data.n() {
                if !data.covariates.is_missing(i, j) {
                    sum += data.covariates.value(i, j);
                    total += 1;
                }
            }
            xbar.push(if total == 0 { 0.0 } else { sum / total as f64 });
        }
        NullProfile { phi0, xbar }
    }
}

/// Shared evaluation context built once per chain.
#[derive(Clone, Debug)]
pub struct CovContext {
    pub layout: ColumnLayout,
    pub null: NullProfile,
    pub var_select: VarSelectKind,
    /// Standard-parameterization inverse-Wishart prior scale, r0^-1.
    pub r0_inv: Option<DMatrix<f64>>,
}

impl CovContext {
    pub fn new(data: &Dataset, hp: &HyperParams) -> Result<CovContext> {
        let layout = ColumnLayout::of(data);
        let r0_inv = if layout.continuous.is_empty() {
            None
        } else {
            let inv = hp
                .r0
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("prior scale r0".into()))?
                .inverse();
            Some(inv)
        };
        Ok(CovContext {
            layout,
            null: NullProfile::of(data),
            var_select: hp.var_select,
            r0_inv,
        })
    }
}

/// Adaptive kernels owned by the covariate side: one per (label, discrete
/// column) for the Metropolis-within-Gibbs updates that soft selection
/// requires.
#[derive(Clone, Debug, Default)]
pub struct CovKernels {
    pub phi: Vec<Vec<AdaptiveKernel>>,
    pub adapting: bool,
}

impl CovKernels {
    pub fn new() -> CovKernels {
        CovKernels {
            phi: Vec::new(),
            adapting: true,
        }
    }

    pub fn ensure_labels(&mut self, n_labels: usize, n_discrete: usize) {
        while self.phi.len() < n_labels {
            let mut ks: Vec<AdaptiveKernel> =
                (0..n_discrete).map(|_| AdaptiveKernel::vector(1.0)).collect();
            for k in &mut ks {
                k.adapting = self.adapting;
            }
            self.phi.push(ks);
        }
    }

    pub fn reset_label(&mut self, label: usize) {
        if let Some(ks) = self.phi.get_mut(label) {
            for k in ks.iter_mut() {
                *k = AdaptiveKernel::vector(1.0);
                k.adapting = self.adapting;
            }
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
        for ks in &mut self.phi {
            for k in ks {
                k.freeze();
            }
        }
    }
}

/// A covariate model: likelihood, conjugate (or Metropolis-within-Gibbs)
/// updates, prior draws, exact marginal likelihood and simulation.
pub trait CovariateModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Log likelihood of row `i` under cluster parameters `cp`, marginalised
    /// over missing entries and composed with the active selection scheme.
    fn log_lik(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
    ) -> f64;

    /// Parameter update for one cluster given its members (conjugate where
    /// conjugacy holds). An empty member list draws from the prior.
    #[allow(clippy::too_many_arguments)]
    fn update_cluster(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        label: usize,
        members: &[usize],
        cp: &mut ClusterParams,
        g: &GlobalParams,
        kernels: &mut CovKernels,
        rng: &mut RngStream,
    ) -> Result<()>;

    /// Fresh prior draw of the covariate block of a cluster.
    fn draw_prior(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        cp: &mut ClusterParams,
        rng: &mut RngStream,
    ) -> Result<()>;

    /// Exact conjugate log marginal likelihood of the member rows (selection
    /// ignored; used by the partition score).
    fn log_marginal(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        members: &[usize],
    ) -> f64;

    /// Overwrite the observed covariate entries of row `i` with a draw from
    /// the likelihood under `cp`.
    fn simulate_row(
        &self,
        data: &mut Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()>;
}

struct DiscreteCovariates;
struct GaussianCovariates;
struct MixedCovariates;
struct NoCovariates;

impl CovariateModel for DiscreteCovariates {
    fn name(&self) -> &'static str {
        "discrete"
    }

    fn log_lik(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
    ) -> f64 {
        discrete::log_lik(data, ctx, i, cp, g)
    }

    fn update_cluster(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        label: usize,
        members: &[usize],
        cp: &mut ClusterParams,
        g: &GlobalParams,
        kernels: &mut CovKernels,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::update_cluster(data, ctx, hp, label, members, cp, g, kernels, rng)
    }

    fn draw_prior(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        cp: &mut ClusterParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::draw_prior(data, ctx, hp, cp, rng)
    }

    fn log_marginal(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        members: &[usize],
    ) -> f64 {
        discrete::log_marginal(data, ctx, hp, members)
    }

    fn simulate_row(
        &self,
        data: &mut Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::simulate_row(data, ctx, i, cp, g, rng)
    }
}

impl CovariateModel for GaussianCovariates {
    fn name(&self) -> &'static str {
        "normal"
    }

    fn log_lik(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
    ) -> f64 {
        gaussian::log_lik(data, ctx, i, cp, g)
    }

    fn update_cluster(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        _label: usize,
        members: &[usize],
        cp: &mut ClusterParams,
        g: &GlobalParams,
        _kernels: &mut CovKernels,
        rng: &mut RngStream,
    ) -> Result<()> {
        gaussian::update_cluster(data, ctx, hp, members, cp, g, rng)
    }

    fn draw_prior(
        &self,
        _data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        cp: &mut ClusterParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        gaussian::draw_prior(ctx, hp, cp, rng)
    }

    fn log_marginal(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        members: &[usize],
    ) -> f64 {
        gaussian::log_marginal(data, ctx, hp, members)
    }

    fn simulate_row(
        &self,
        data: &mut Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        gaussian::simulate_row(data, ctx, i, cp, g, rng)
    }
}

impl CovariateModel for MixedCovariates {
    fn name(&self) -> &'static str {
        "mixed"
    }

    // independence of the two blocks given the cluster: log likelihoods add
    fn log_lik(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
    ) -> f64 {
        discrete::log_lik(data, ctx, i, cp, g) + gaussian::log_lik(data, ctx, i, cp, g)
    }

    fn update_cluster(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        label: usize,
        members: &[usize],
        cp: &mut ClusterParams,
        g: &GlobalParams,
        kernels: &mut CovKernels,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::update_cluster(data, ctx, hp, label, members, cp, g, kernels, rng)?;
        gaussian::update_cluster(data, ctx, hp, members, cp, g, rng)
    }

    fn draw_prior(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        cp: &mut ClusterParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::draw_prior(data, ctx, hp, cp, rng)?;
        gaussian::draw_prior(ctx, hp, cp, rng)
    }

    fn log_marginal(
        &self,
        data: &Dataset,
        ctx: &CovContext,
        hp: &HyperParams,
        members: &[usize],
    ) -> f64 {
        discrete::log_marginal(data, ctx, hp, members)
            + gaussian::log_marginal(data, ctx, hp, members)
    }

    fn simulate_row(
        &self,
        data: &mut Dataset,
        ctx: &CovContext,
        i: usize,
        cp: &ClusterParams,
        g: &GlobalParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        discrete::simulate_row(data, ctx, i, cp, g, rng)?;
        gaussian::simulate_row(data, ctx, i, cp, g, rng)
    }
}

impl CovariateModel for NoCovariates {
    fn name(&self) -> &'static str {
        "none"
    }

    fn log_lik(&self, _: &Dataset, _: &CovContext, _: usize, _: &ClusterParams, _: &GlobalParams) -> f64 {
        0.0
    }

    fn update_cluster(
        &self,
        _: &Dataset,
        _: &CovContext,
        _: &HyperParams,
        _: usize,
        _: &[usize],
        _: &mut ClusterParams,
        _: &GlobalParams,
        _: &mut CovKernels,
        _: &mut RngStream,
    ) -> Result<()> {
        Ok(())
    }

    fn draw_prior(
        &self,
        _: &Dataset,
        _: &CovContext,
        _: &HyperParams,
        _: &mut ClusterParams,
        _: &mut RngStream,
    ) -> Result<()> {
        Ok(())
    }

    fn log_marginal(&self, _: &Dataset, _: &CovContext, _: &HyperParams, _: &[usize]) -> f64 {
        0.0
    }

    fn simulate_row(
        &self,
        _: &mut Dataset,
        _: &CovContext,
        _: usize,
        _: &ClusterParams,
        _: &GlobalParams,
        _: &mut RngStream,
    ) -> Result<()> {
        Ok(())
    }
}

pub fn registered_names() -> &'static [&'static str] {
    &["discrete", "normal", "mixed", "none"]
}

/// Look up a covariate model by name and check it matches the dataset's
/// column kinds.
pub fn by_name(name: &str, data: &Dataset) -> Result<Box<dyn CovariateModel>> {
    let n_disc = data.covariates.discrete_columns().len();
    let n_cont = data.covariates.continuous_columns().len();
    match name.to_ascii_lowercase().as_str() {
        "discrete" => {
            if n_cont > 0 {
                return Err(Error::Config(
                    "xModel 'discrete' but the data has continuous covariates".into(),
                ));
            }
            if n_disc == 0 {
                return Err(Error::Config("xModel 'discrete' but no covariates".into()));
            }
            Ok(Box::new(DiscreteCovariates))
        }
        "normal" | "gaussian" => {
            if n_disc > 0 {
                return Err(Error::Config(
                    "xModel 'normal' but the data has discrete covariates".into(),
                ));
            }
            if n_cont == 0 {
                return Err(Error::Config("xModel 'normal' but no covariates".into()));
            }
            Ok(Box::new(GaussianCovariates))
        }
        "mixed" => {
            if n_disc == 0 || n_cont == 0 {
                return Err(Error::Config(
                    "xModel 'mixed' needs both discrete and continuous covariates".into(),
                ));
            }
            Ok(Box::new(MixedCovariates))
        }
        "none" => {
            if data.n_covariates() > 0 {
                return Err(Error::Config(
                    "xModel 'none' but the data has covariates".into(),
                ));
            }
            Ok(Box::new(NoCovariates))
        }
        other => Err(Error::Config(format!("unknown covariate model '{other}'"))),
    }
}

/// Pick the natural model for a dataset's column kinds.
pub fn infer_name(data: &Dataset) -> &'static str {
    let has_disc = data
        .covariates
        .kinds
        .iter()
        .any(|k| matches!(k, ColumnKind::Discrete { .. }));
    let has_cont = data
        .covariates
        .kinds
        .iter()
        .any(|k| matches!(k, ColumnKind::Continuous));
    match (has_disc, has_cont) {
        (true, true) => "mixed",
        (true, false) => "discrete",
        (false, true) => "normal",
        (false, false) => "none",
    }
}
