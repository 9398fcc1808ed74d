//! Joint-distribution (successive-conditional) correctness testing.
//!
//! Starting from a full prior draw of the parameters, the simulator
//! alternates one MCMC sweep with a regeneration of the data from the
//! likelihood at the current parameters. If every conditional in the sweep
//! is correct, the marginal law of any parameter along the run equals its
//! prior, which a two-sample Kolmogorov-Smirnov check can falsify. The run
//! freezes every adaptive kernel from the start so the transition kernel is
//! homogeneous.

use crate::data::{ColumnKind, Covariates, Dataset, FixedEffects, Outcome};
use crate::dist::{sample_beta, sample_gamma};
use crate::error::Result;
use crate::hyper::{HyperParams, SamplerVariantKind};
use crate::rng::RngStream;
use crate::sampler::engine::{ChainRunner, InitMode, SamplerConfig};

#[derive(Clone, Debug)]
pub struct GewekeConfig {
    pub n: usize,
    pub n_covariates: usize,
    pub alternations: usize,
    pub thin: usize,
    pub seed: u64,
    pub variant: SamplerVariantKind,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            n: 10,
            n_covariates: 2,
            alternations: 50_000,
            thin: 25,
            seed: 1234,
            variant: SamplerVariantKind::SliceDependent,
        }
    }
}

/// Traces of the monitored quantities from the successive-conditional run,
/// plus matched independent prior draws.
#[derive(Clone, Debug, Default)]
pub struct GewekeSamples {
    pub alpha: Vec<f64>,
    pub theta1: Vec<f64>,
    pub v1: Vec<f64>,
    pub prior_alpha: Vec<f64>,
    pub prior_theta1: Vec<f64>,
    pub prior_v1: Vec<f64>,
}

/// Bernoulli outcome with binary covariates, the blanket test model.
pub fn toy_bernoulli_discrete(n: usize, n_covariates: usize) -> Dataset {
    let mut c = Covariates::new(
        (0..n_covariates).map(|j| format!("x{j}")).collect(),
        vec![ColumnKind::Discrete { n_categories: 2 }; n_covariates],
        n,
    );
    for i in 0..n {
        for j in 0..n_covariates {
            c.set(i, j, ((i + j) % 2) as f64);
        }
    }
    Dataset::new(
        Outcome::Bernoulli(vec![0; n]),
        FixedEffects::new(vec![], n),
        c,
    )
    .unwrap()
}

pub fn run_successive_conditional(cfg: &GewekeConfig) -> Result<GewekeSamples> {
    let data = toy_bernoulli_discrete(cfg.n, cfg.n_covariates);
    let mut hp = HyperParams::defaults_for(&data);
    hp.seed = cfg.seed;
    hp.variant = cfg.variant;
    hp.n_clus_init = 3;
    let sampler_cfg = SamplerConfig {
        n_sweeps: 0,
        n_burn: 0,
        report_every: 0,
        check_invariants: true,
        log_cluster_params: false,
    };
    let mut runner = ChainRunner::new(data, hp.clone(), sampler_cfg, None)?;
    runner.init(InitMode::Prior)?;
    runner.freeze_adaptation();
    runner.regenerate_data()?;

    let keep = cfg.alternations / cfg.thin;
    let mut out = GewekeSamples::default();
    for t in 0..cfg.alternations {
        runner.sweep()?;
        runner.regenerate_data()?;
        if t % cfg.thin == 0 {
            out.alpha.push(runner.state.sticks.alpha);
            out.theta1.push(runner.state.clusters[0].theta[0]);
            out.v1.push(runner.state.sticks.v[0]);
        }
    }

    // matched independent prior draws from a separate stream
    let mut prior_rng = RngStream::new(cfg.seed ^ 0x5eed_cafe);
    for _ in 0..keep.max(out.alpha.len()) {
        let alpha = sample_gamma(hp.shape_alpha, hp.rate_alpha, &mut prior_rng)?;
        out.prior_alpha.push(alpha);
        let theta = hp.mu_theta
            + hp.sigma_theta
                * crate::dist::sample_student_t(crate::hyper::T_PRIOR_DF, &mut prior_rng)?;
        out.prior_theta1.push(theta);
        // V_1 marginal mixes Beta(1, alpha) over the alpha prior
        let alpha2 = sample_gamma(hp.shape_alpha, hp.rate_alpha, &mut prior_rng)?;
        out.prior_v1.push(sample_beta(1.0, alpha2, &mut prior_rng)?);
    }
    Ok(out)
}
