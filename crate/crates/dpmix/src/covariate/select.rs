//! Variable selection: composite parameters, hard (per-cluster binary) and
//! soft (continuous) selection switches, and the sparsity layer on the
//! per-covariate selection probabilities rho_j.
//!
//! rho_j carries a spike-and-slab prior: with probability 1/2 an atom at
//! zero (the indicator omega_j = false, selector forced off), with
//! probability 1/2 a Beta(aRho, bRho) draw. Hard selection puts
//! gamma_cj ~ Bernoulli(rho_j) per cluster; soft selection gives zeta_j the
//! mixture density rho_j f1 + (1 - rho_j) f0 where f1 = Beta(s, 1) pulls the
//! switch toward one and f0 = Beta(1, s) toward zero. Both choices keep every
//! rho/omega update an exact Gibbs draw.

use crate::adapt::{rwm_step, AdaptiveKernel};
use crate::data::Dataset;
use crate::dist::sample_beta;
use crate::error::Result;
use crate::hyper::{HyperParams, VarSelectKind};
use crate::rng::RngStream;
use crate::state::{ClusterParams, GlobalParams};
use crate::util::{expit, logit};

use super::{CovContext, CovariateModel};

/// Slab shape of the zeta prior components.
pub const SELECT_SLAB_SHAPE: f64 = 5.0;

/// Convex combination of a cluster parameter with its null-profile value.
/// `selector` is zeta_j in [0,1] for soft selection or gamma_cj in {0,1} for
/// hard selection.
pub fn composite(value: f64, null_value: f64, selector: f64) -> f64 {
    selector * value + (1.0 - selector) * null_value
}

/// Effective selector for covariate `j` under the active selection scheme.
pub fn selector(ctx: &CovContext, g: &GlobalParams, cp: &ClusterParams, j: usize) -> f64 {
    match ctx.var_select {
        VarSelectKind::None => 1.0,
        VarSelectKind::Continuous => g.zeta[j],
        VarSelectKind::BinaryCluster => cp
            .gamma
            .as_ref()
            .map(|gm| gm[j] as f64)
            .unwrap_or(1.0),
    }
}

// zeta prior components: f1 pulls toward one, f0 toward zero.
fn log_f1(z: f64) -> f64 {
    SELECT_SLAB_SHAPE.ln() + (SELECT_SLAB_SHAPE - 1.0) * z.ln()
}

fn log_f0(z: f64) -> f64 {
    SELECT_SLAB_SHAPE.ln() + (SELECT_SLAB_SHAPE - 1.0) * (-z).ln_1p()
}

fn log_zeta_prior(z: f64, rho: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if rho <= 0.0 {
        log_f0(z)
    } else if rho >= 1.0 {
        log_f1(z)
    } else {
        crate::util::logsumexp(&[rho.ln() + log_f1(z), (1.0 - rho).ln() + log_f0(z)])
    }
}

/// Kernels for the soft-selection switches.
#[derive(Clone, Debug, Default)]
pub struct SelectKernels {
    pub zeta: Vec<AdaptiveKernel>,
}

impl SelectKernels {
    pub fn new(n_covariates: usize) -> SelectKernels {
        SelectKernels {
            zeta: (0..n_covariates).map(|_| AdaptiveKernel::scalar(1.0)).collect(),
        }
    }

    pub fn freeze(&mut self) {
        for k in &mut self.zeta {
            k.freeze();
        }
    }
}

/// One sweep of the selection layer: selector switches (gamma per cluster or
/// zeta per covariate), then (omega_j, rho_j) jointly.
#[allow(clippy::too_many_arguments)]
pub fn update_selectors(
    data: &Dataset,
    ctx: &CovContext,
    hp: &HyperParams,
    cov: &dyn CovariateModel,
    members: &[Vec<usize>],
    clusters: &mut [ClusterParams],
    g: &mut GlobalParams,
    kernels: &mut SelectKernels,
    rng: &mut RngStream,
) -> Result<()> {
    match ctx.var_select {
        VarSelectKind::None => Ok(()),
        VarSelectKind::BinaryCluster => {
            update_gamma(data, ctx, cov, members, clusters, g, rng)?;
            update_rho_binary(clusters, g, hp, rng)
        }
        VarSelectKind::Continuous => {
            update_zeta(data, ctx, cov, members, clusters, g, kernels, rng)?;
            update_rho_continuous(g, hp, rng)
        }
    }
}

fn update_gamma(
    data: &Dataset,
    ctx: &CovContext,
    cov: &dyn CovariateModel,
    members: &[Vec<usize>],
    clusters: &mut [ClusterParams],
    g: &GlobalParams,
    rng: &mut RngStream,
) -> Result<()> {
    let n_cov = data.n_covariates();
    for (c, cp) in clusters.iter_mut().enumerate() {
        if cp.gamma.is_none() {
            cp.gamma = Some(vec![1; n_cov]);
        }
        let rows: &[usize] = members.get(c).map(|m| m.as_slice()).unwrap_or(&[]);
        for j in 0..n_cov {
            let rho = g.rho[j];
            if rho <= 0.0 {
                cp.gamma.as_mut().unwrap()[j] = 0;
                continue;
            }
            let mut lw = [0.0f64; 2];
            for (value, lwv) in [(0u8, 0usize), (1u8, 1usize)] {
                cp.gamma.as_mut().unwrap()[j] = value;
                let mut lp = if value == 1 { rho.ln() } else { (1.0 - rho).ln() };
                for &i in rows {
                    lp += cov.log_lik(data, ctx, i, cp, g);
                }
                lw[lwv] = lp;
            }
            let p1 = expit(lw[1] - lw[0]);
            cp.gamma.as_mut().unwrap()[j] = if rng.open01() < p1 { 1 } else { 0 };
        }
    }
    Ok(())
}

fn update_rho_binary(
    clusters: &[ClusterParams],
    g: &mut GlobalParams,
    hp: &HyperParams,
    rng: &mut RngStream,
) -> Result<()> {
    let c_tot = clusters.len();
    for j in 0..g.rho.len() {
        let on = clusters
            .iter()
            .filter(|cp| cp.gamma.as_ref().map(|gm| gm[j] == 1).unwrap_or(false))
            .count();
        if on > 0 {
            g.rho_omega[j] = true;
        } else {
            // two-point conditional: an all-zero column is compatible with the
            // atom, or with a Beta draw through its Bernoulli marginal
            let ln_b = |a: f64, b: f64| statrs::function::beta::ln_beta(a, b);
            let lw0 = 0.0;
            let lw1 = ln_b(hp.a_rho, hp.b_rho + c_tot as f64) - ln_b(hp.a_rho, hp.b_rho);
            g.rho_omega[j] = rng.open01() < expit(lw1 - lw0);
        }
        g.rho[j] = if g.rho_omega[j] {
            sample_beta(
                hp.a_rho + on as f64,
                hp.b_rho + (c_tot - on) as f64,
                rng,
            )?
        } else {
            0.0
        };
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_zeta(
    data: &Dataset,
    ctx: &CovContext,
    cov: &dyn CovariateModel,
    members: &[Vec<usize>],
    clusters: &mut [ClusterParams],
    g: &mut GlobalParams,
    kernels: &mut SelectKernels,
    rng: &mut RngStream,
) -> Result<()> {
    let n_cov = data.n_covariates();
    for j in 0..n_cov {
        let rho = g.rho[j];
        let current = logit(g.zeta[j].clamp(1e-12, 1.0 - 1e-12));
        // full likelihood of every individual under its own cluster as a
        // function of zeta_j, plus the mixture prior and the logit Jacobian
        let (new_eta, _) = {
            let g_ref: &mut GlobalParams = g;
            let target = |eta: f64| -> f64 {
                let z = expit(eta);
                if !(z > 0.0 && z < 1.0) {
                    return f64::NEG_INFINITY;
                }
                let mut lp = log_zeta_prior(z, rho) + z.ln() + (-z).ln_1p();
                let mut probe = g_ref.clone();
                probe.zeta[j] = z;
                for (c, rows) in members.iter().enumerate() {
                    for &i in rows {
                        lp += cov.log_lik(data, ctx, i, &clusters[c], &probe);
                    }
                }
                lp
            };
            rwm_step(target, current, &mut kernels.zeta[j], rng)
        };
        g.zeta[j] = expit(new_eta);
    }
    Ok(())
}

fn update_rho_continuous(g: &mut GlobalParams, hp: &HyperParams, rng: &mut RngStream) -> Result<()> {
    let prior_mean = hp.a_rho / (hp.a_rho + hp.b_rho);
    for j in 0..g.rho.len() {
        let z = g.zeta[j].clamp(1e-12, 1.0 - 1e-12);
        // collapsed (omega, rho) draw given zeta
        let lw0 = log_f0(z);
        let lw1 = crate::util::logsumexp(&[
            prior_mean.ln() + log_f1(z),
            (1.0 - prior_mean).ln() + log_f0(z),
        ]);
        g.rho_omega[j] = rng.open01() < expit(lw1 - lw0);
        if g.rho_omega[j] {
            // latent component indicator, then the conjugate Beta draw
            let p_slab = (prior_mean.ln() + log_f1(z) - lw1).exp();
            let b = if rng.open01() < p_slab { 1.0 } else { 0.0 };
            g.rho[j] = sample_beta(hp.a_rho + b, hp.b_rho + 1.0 - b, rng)?;
        } else {
            g.rho[j] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariate::{by_name, CovContext};
    use crate::data::{ColumnKind, Covariates, FixedEffects, Outcome};
    use crate::util::mean;

    #[test]
    fn composite_endpoints_and_midpoint() {
        assert_eq!(composite(0.8, 0.4, 1.0), 0.8);
        assert_eq!(composite(0.8, 0.4, 0.0), 0.4);
        assert!((composite(0.8, 0.4, 0.5) - 0.6).abs() < 1e-15);
        // same formula for means
        assert!((composite(2.0, -2.0, 0.25) - -1.0).abs() < 1e-15);
    }

    fn one_column_dataset(values: &[f64]) -> Dataset {
        let mut c = Covariates::new(
            vec!["x".into()],
            vec![ColumnKind::Discrete { n_categories: 2 }],
            values.len(),
        );
        for (i, &v) in values.iter().enumerate() {
            c.set(i, 0, v);
        }
        Dataset::new(Outcome::None, FixedEffects::new(vec![], values.len()), c).unwrap()
    }

    #[test]
    fn gamma_flip_is_prior_when_likelihood_ratio_is_one() {
        // single cluster whose phi equals the null profile exactly: the
        // two-point conditional reduces to Bernoulli(rho)
        let data = one_column_dataset(&[1.0, 0.0, 1.0, 0.0]);
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::BinaryCluster;
        let ctx = CovContext::new(&data, &hp).unwrap();
        let cov = by_name("discrete", &data).unwrap();
        let mut g = GlobalParams::new(0, 1);
        let rho = 0.3;
        g.rho[0] = rho;
        let members = vec![vec![0usize, 1, 2, 3]];
        let mut rng = RngStream::new(600);
        let n = 20_000;
        let mut on = 0usize;
        for _ in 0..n {
            let mut clusters = vec![ClusterParams {
                phi: Some(vec![ctx.null.phi0[0].clone()]),
                gamma: Some(vec![1]),
                ..Default::default()
            }];
            update_gamma(&data, &ctx, cov.as_ref(), &members, &mut clusters, &g, &mut rng)
                .unwrap();
            on += clusters[0].gamma.as_ref().unwrap()[0] as usize;
        }
        let freq = on as f64 / n as f64;
        let se = (rho * (1.0 - rho) / n as f64).sqrt();
        assert!((freq - rho).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn rho_zero_forces_gamma_off() {
        let data = one_column_dataset(&[1.0, 0.0]);
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::BinaryCluster;
        let ctx = CovContext::new(&data, &hp).unwrap();
        let cov = by_name("discrete", &data).unwrap();
        let mut g = GlobalParams::new(0, 1);
        g.rho[0] = 0.0;
        g.rho_omega[0] = false;
        let members = vec![vec![0usize, 1]];
        let mut rng = RngStream::new(601);
        let mut clusters = vec![ClusterParams {
            phi: Some(vec![vec![0.9, 0.1]]),
            gamma: Some(vec![1]),
            ..Default::default()
        }];
        update_gamma(&data, &ctx, cov.as_ref(), &members, &mut clusters, &g, &mut rng).unwrap();
        assert_eq!(clusters[0].gamma.as_ref().unwrap()[0], 0);
    }

    #[test]
    fn rho_binary_posterior_tracks_active_switches() {
        let data = one_column_dataset(&[1.0]);
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::BinaryCluster;
        let mut rng = RngStream::new(602);
        // five clusters, all switched on: rho | gamma ~ Beta(0.5 + 5, 0.5)
        let clusters: Vec<ClusterParams> = (0..5)
            .map(|_| ClusterParams {
                gamma: Some(vec![1]),
                ..Default::default()
            })
            .collect();
        let n = 20_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let mut g = GlobalParams::new(0, 1);
            update_rho_binary(&clusters, &mut g, &hp, &mut rng).unwrap();
            assert!(g.rho_omega[0]);
            draws.push(g.rho[0]);
        }
        let (a, b) = (5.5, 0.5);
        let want = a / (a + b);
        let var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
        let se = (var / n as f64).sqrt();
        assert!((mean(&draws) - want).abs() < 3.0 * se);
    }

    #[test]
    fn zeta_stationary_distribution_matches_prior_when_no_data() {
        // with no members the zeta chain should hold its mixture prior;
        // check against independent prior simulation by KS
        let data = one_column_dataset(&[1.0]);
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::Continuous;
        let ctx = CovContext::new(&data, &hp).unwrap();
        let cov = by_name("discrete", &data).unwrap();
        let mut rng = RngStream::new(603);
        let mut g = GlobalParams::new(0, 1);
        let mut kernels = SelectKernels::new(1);
        let mut clusters = vec![ClusterParams {
            phi: Some(vec![vec![0.5, 0.5]]),
            ..Default::default()
        }];
        let members: Vec<Vec<usize>> = vec![vec![]];
        let mut chain = Vec::new();
        for it in 0..120_000 {
            update_zeta(
                &data, &ctx, cov.as_ref(), &members, &mut clusters, &mut g, &mut kernels,
                &mut rng,
            )
            .unwrap();
            update_rho_continuous(&mut g, &hp, &mut rng).unwrap();
            if it >= 20_000 && it % 20 == 0 {
                chain.push(g.zeta[0]);
            }
        }
        // independent prior draws: omega ~ Bern(1/2); rho ~ Beta(0.5, 0.5);
        // zeta ~ rho f1 + (1-rho) f0
        let mut prior_rng = RngStream::new(604);
        let prior: Vec<f64> = (0..chain.len())
            .map(|_| {
                let omega = prior_rng.open01() < 0.5;
                let rho = if omega {
                    sample_beta(hp.a_rho, hp.b_rho, &mut prior_rng).unwrap()
                } else {
                    0.0
                };
                if prior_rng.open01() < rho {
                    sample_beta(SELECT_SLAB_SHAPE, 1.0, &mut prior_rng).unwrap()
                } else {
                    sample_beta(1.0, SELECT_SLAB_SHAPE, &mut prior_rng).unwrap()
                }
            })
            .collect();
        let (_, p) = crate::diag::ks_two_sample(&chain, &prior);
        assert!(p > 0.01, "KS p = {p}");
    }
}
