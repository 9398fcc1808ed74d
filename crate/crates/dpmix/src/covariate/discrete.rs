//! Discrete (categorical) covariate block.

use statrs::function::gamma::ln_gamma;

use crate::adapt::rwm_step_vec;
use crate::data::Dataset;
use crate::dist::{log_dirichlet_pdf, sample_dirichlet, UNIT_LO};
use crate::error::Result;
use crate::hyper::{HyperParams, VarSelectKind};
use crate::rng::RngStream;
use crate::state::{ClusterParams, GlobalParams};
use crate::util::sample_from_log_weights;

use super::select::selector;
use super::{CovContext, CovKernels};

/// Sum over non-missing discrete columns of log phi*_(c, j, x_ij).
pub fn log_lik(
    data: &Dataset,
    ctx: &CovContext,
    i: usize,
    cp: &ClusterParams,
    g: &GlobalParams,
) -> f64 {
    let Some(phi) = cp.phi.as_ref() else {
        return 0.0;
    };
    let mut lp = 0.0;
    for (pos, &j) in ctx.layout.discrete.iter().enumerate() {
        if data.covariates.is_missing(i, j) {
            continue;
        }
        let k = data.covariates.category(i, j);
        let sel = selector(ctx, g, cp, j);
        let p = super::select::composite(phi[pos][k], ctx.null.phi0[pos][k], sel);
        lp += p.max(UNIT_LO).ln();
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
    }
    lp
}

/// Category counts per discrete column over the given rows (missing skipped).
pub fn category_counts(data: &Dataset, ctx: &CovContext, members: &[usize]) -> Vec<Vec<usize>> {
    ctx.layout
        .discrete
        .iter()
        .map(|&j| {
            let mut counts = vec![0usize; data.covariates.n_categories(j)];
            for &i in members {
                if !data.covariates.is_missing(i, j) {
                    counts[data.covariates.category(i, j)] += 1;
                }
            }
            counts
        })
        .collect()
}

/// Update the phi block of one cluster.
///
/// Without selection (and under hard selection, where a switched-off column
/// simply drops its counts) the update is an exact Dirichlet Gibbs draw.
/// Soft selection loses conjugacy, so each column moves by a random-walk
/// Metropolis step on softmax coordinates.
#[allow(clippy::too_many_arguments)]
pub fn update_cluster(
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
    if ctx.layout.discrete.is_empty() {
        return Ok(());
    }
    let counts = category_counts(data, ctx, members);
    let phi = cp
        .phi
        .get_or_insert_with(|| vec![Vec::new(); ctx.layout.discrete.len()]);

    match ctx.var_select {
        VarSelectKind::Continuous => {
            kernels.ensure_labels(label + 1, ctx.layout.discrete.len());
            for (pos, &j) in ctx.layout.discrete.iter().enumerate() {
                let a = hp.a_dir_for(data, j);
                if phi[pos].is_empty() {
                    phi[pos] = sample_dirichlet(a, rng)?;
                }
                let zeta = g.zeta[j];
                let phi0 = &ctx.null.phi0[pos];
                // member categories observed for this column
                let cats: Vec<usize> = members
                    .iter()
                    .filter(|&&i| !data.covariates.is_missing(i, j))
                    .map(|&i| data.covariates.category(i, j))
                    .collect();
                let target = |eta: &[f64]| -> f64 {
                    let p = softmax_probs(eta);
                    let mut lp = log_dirichlet_pdf(&p, a);
                    // Jacobian of the softmax chart
                    for &pk in &p {
                        lp += pk.ln();
                    }
                    for &k in &cats {
                        let comp = super::select::composite(p[k], phi0[k], zeta);
                        if comp <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        lp += comp.ln();
                    }
                    lp
                };
                let eta = to_softmax_coords(&phi[pos]);
                let kernel = &mut kernels.phi[label][pos];
                let (eta_new, _) = rwm_step_vec(target, &eta, kernel, rng);
                phi[pos] = softmax_probs(&eta_new);
            }
        }
        _ => {
            for (pos, &j) in ctx.layout.discrete.iter().enumerate() {
                let a = hp.a_dir_for(data, j);
                let keep_counts = match ctx.var_select {
                    VarSelectKind::BinaryCluster => {
                        cp.gamma.as_ref().map(|gm| gm[j] == 1).unwrap_or(true)
                    }
                    _ => true,
                };
                let post: Vec<f64> = a
                    .iter()
                    .enumerate()
                    .map(|(k, &ak)| ak + if keep_counts { counts[pos][k] as f64 } else { 0.0 })
                    .collect();
                phi[pos] = sample_dirichlet(&post, rng)?;
            }
        }
    }
    Ok(())
}

pub fn draw_prior(
    data: &Dataset,
    ctx: &CovContext,
    hp: &HyperParams,
    cp: &mut ClusterParams,
    rng: &mut RngStream,
) -> Result<()> {
    if ctx.layout.discrete.is_empty() {
        return Ok(());
    }
    let mut phi = Vec::with_capacity(ctx.layout.discrete.len());
    for &j in &ctx.layout.discrete {
        phi.push(sample_dirichlet(hp.a_dir_for(data, j), rng)?);
    }
    cp.phi = Some(phi);
    Ok(())
}

/// Dirichlet-multinomial marginal likelihood of the member rows, one term per
/// column.
pub fn log_marginal(data: &Dataset, ctx: &CovContext, hp: &HyperParams, members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let counts = category_counts(data, ctx, members);
    let mut lm = 0.0;
    for (pos, &j) in ctx.layout.discrete.iter().enumerate() {
        let a = hp.a_dir_for(data, j);
        let a_total: f64 = a.iter().sum();
        let n_j: usize = counts[pos].iter().sum();
        lm += ln_gamma(a_total) - ln_gamma(a_total + n_j as f64);
        for (k, &ak) in a.iter().enumerate() {
            lm += ln_gamma(ak + counts[pos][k] as f64) - ln_gamma(ak);
        }
    }
    lm
}

/// Redraw the observed discrete entries of row `i` from the (composed)
/// likelihood.
pub fn simulate_row(
    data: &mut Dataset,
    ctx: &CovContext,
    i: usize,
    cp: &ClusterParams,
    g: &GlobalParams,
    rng: &mut RngStream,
) -> Result<()> {
    let Some(phi) = cp.phi.as_ref() else {
        return Ok(());
    };
    for (pos, &j) in ctx.layout.discrete.iter().enumerate() {
        if data.covariates.is_missing(i, j) {
            continue;
        }
        let sel = selector(ctx, g, cp, j);
        let lw: Vec<f64> = phi[pos]
            .iter()
            .zip(&ctx.null.phi0[pos])
            .map(|(&p, &p0)| super::select::composite(p, p0, sel).max(UNIT_LO).ln())
            .collect();
        let k = sample_from_log_weights(&lw, rng).expect("category weights");
        data.covariates.set(i, j, k as f64);
    }
    Ok(())
}

/// Probabilities from softmax coordinates with the last category as the
/// fixed reference (eta has K-1 entries).
pub fn softmax_probs(eta: &[f64]) -> Vec<f64> {
    let mut lw: Vec<f64> = eta.to_vec();
    lw.push(0.0);
    let m = crate::util::logsumexp(&lw);
    lw.iter().map(|&e| (e - m).exp().max(UNIT_LO)).collect()
}

pub fn to_softmax_coords(p: &[f64]) -> Vec<f64> {
    let last = p[p.len() - 1].max(UNIT_LO);
    p[..p.len() - 1]
        .iter()
        .map(|&pk| (pk.max(UNIT_LO) / last).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, Covariates, FixedEffects, Outcome};
    use crate::util::mean;

    fn binary_dataset(rows: &[[f64; 2]]) -> Dataset {
        let mut c = Covariates::new(
            vec!["x1".into(), "x2".into()],
            vec![
                ColumnKind::Discrete { n_categories: 2 },
                ColumnKind::Discrete { n_categories: 2 },
            ],
            rows.len(),
        );
        for (i, r) in rows.iter().enumerate() {
            c.set(i, 0, r[0]);
            c.set(i, 1, r[1]);
        }
        Dataset::new(Outcome::None, FixedEffects::new(vec![], rows.len()), c).unwrap()
    }

    fn setup(data: &Dataset) -> (HyperParams, CovContext) {
        let hp = HyperParams::defaults_for(data);
        let ctx = CovContext::new(data, &hp).unwrap();
        (hp, ctx)
    }

    #[test]
    fn loglik_uniform_product() {
        // ten binary columns with uniform phi: 10 * log(0.5)
        let mut c = Covariates::new(
            (0..10).map(|j| format!("x{j}")).collect(),
            vec![ColumnKind::Discrete { n_categories: 2 }; 10],
            1,
        );
        for j in 0..10 {
            c.set(0, j, 1.0);
        }
        let data = Dataset::new(Outcome::None, FixedEffects::new(vec![], 1), c).unwrap();
        let (_, ctx) = setup(&data);
        let cp = ClusterParams {
            phi: Some(vec![vec![0.5, 0.5]; 10]),
            ..Default::default()
        };
        let g = GlobalParams::new(0, 10);
        let lp = log_lik(&data, &ctx, 0, &cp, &g);
        assert!((lp - 10.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loglik_skips_missing() {
        let mut c = Covariates::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![ColumnKind::Discrete { n_categories: 2 }; 3],
            1,
        );
        c.set(0, 0, 1.0);
        c.set_missing(0, 1);
        c.set(0, 2, 0.0);
        let data = Dataset::new(Outcome::None, FixedEffects::new(vec![], 1), c).unwrap();
        let (_, ctx) = setup(&data);
        let cp = ClusterParams {
            phi: Some(vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.6, 0.4]]),
            ..Default::default()
        };
        let g = GlobalParams::new(0, 3);
        let lp = log_lik(&data, &ctx, 0, &cp, &g);
        assert!((lp - (0.7f64.ln() + 0.6f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn loglik_direct_evaluation() {
        let data = binary_dataset(&[[1.0, 0.0]]);
        let (_, ctx) = setup(&data);
        let cp = ClusterParams {
            phi: Some(vec![vec![0.2, 0.8], vec![0.5, 0.5]]),
            ..Default::default()
        };
        let g = GlobalParams::new(0, 2);
        let lp = log_lik(&data, &ctx, 0, &cp, &g);
        assert!((lp - (0.8f64.ln() + 0.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_update_is_prior_draw() {
        let data = binary_dataset(&[[0.0, 0.0]]);
        let (hp, ctx) = setup(&data);
        let mut rng = RngStream::new(400);
        let g = GlobalParams::new(0, 2);
        let mut kernels = CovKernels::new();
        let n = 20_000;
        let mut first = Vec::with_capacity(n);
        for _ in 0..n {
            let mut cp = ClusterParams::default();
            update_cluster(&data, &ctx, &hp, 0, &[], &mut cp, &g, &mut kernels, &mut rng)
                .unwrap();
            first.push(cp.phi.unwrap()[0][0]);
        }
        // prior is Dirichlet(1,1): mean 1/2, var 1/12
        let se = ((1.0 / 12.0) / n as f64).sqrt();
        assert!((mean(&first) - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn posterior_mean_moment_formula() {
        // a = (1,1), counts = (9,1): posterior mean of phi_0 is 10/12
        let rows: Vec<[f64; 2]> = (0..10)
            .map(|i| [if i < 9 { 0.0 } else { 1.0 }, 0.0])
            .collect();
        let data = binary_dataset(&rows);
        let (hp, ctx) = setup(&data);
        let members: Vec<usize> = (0..10).collect();
        let mut rng = RngStream::new(401);
        let g = GlobalParams::new(0, 2);
        let mut kernels = CovKernels::new();
        let n = 20_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let mut cp = ClusterParams::default();
            update_cluster(&data, &ctx, &hp, 0, &members, &mut cp, &g, &mut kernels, &mut rng)
                .unwrap();
            let phi = cp.phi.unwrap();
            let total: f64 = phi[0].iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            draws.push(phi[0][0]);
        }
        let want = 10.0 / 12.0;
        let var = (10.0 * 2.0) / (144.0 * 13.0); // Beta(10,2) variance
        let se = (var / n as f64).sqrt();
        assert!((mean(&draws) - want).abs() < 3.0 * se, "{}", mean(&draws));
    }

    #[test]
    fn soft_selection_update_matches_grid_oracle() {
        // one binary covariate, fixed zeta; posterior of phi_1 under the
        // composite likelihood computed on a dense grid
        let rows: Vec<[f64; 2]> = vec![[1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]];
        let mut c = Covariates::new(
            vec!["x1".into()],
            vec![ColumnKind::Discrete { n_categories: 2 }],
            4,
        );
        for (i, r) in rows.iter().enumerate() {
            c.set(i, 0, r[0]);
        }
        let data = Dataset::new(Outcome::None, FixedEffects::new(vec![], 4), c).unwrap();
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::Continuous;
        let ctx = CovContext::new(&data, &hp).unwrap();
        let mut g = GlobalParams::new(0, 1);
        let zeta = 0.7;
        g.zeta[0] = zeta;
        let phi0 = ctx.null.phi0[0].clone(); // observed proportions (0.25, 0.75)

        // grid oracle over phi_1 = P(category 1)
        let m = 20_000;
        let mut norm = 0.0;
        let mut ex = 0.0;
        for t in 0..m {
            let p1 = (t as f64 + 0.5) / m as f64;
            // prior Dirichlet(1,1) is flat; likelihood: 3 obs of cat 1, 1 of cat 0
            let c1 = zeta * p1 + (1.0 - zeta) * phi0[1];
            let c0 = zeta * (1.0 - p1) + (1.0 - zeta) * phi0[0];
            let w = c1.powi(3) * c0;
            norm += w;
            ex += w * p1;
        }
        let oracle_mean = ex / norm;

        let members: Vec<usize> = (0..4).collect();
        let mut rng = RngStream::new(402);
        let mut kernels = CovKernels::new();
        let mut cp = ClusterParams::default();
        // chain over repeated MwG updates
        let mut draws = Vec::new();
        for it in 0..60_000 {
            update_cluster(&data, &ctx, &hp, 0, &members, &mut cp, &g, &mut kernels, &mut rng)
                .unwrap();
            if it >= 10_000 {
                draws.push(cp.phi.as_ref().unwrap()[0][1]);
            }
        }
        let (mcmc_mean, se) = crate::diag::batch_means_se(&draws, 25);
        assert!(
            (mcmc_mean - oracle_mean).abs() < 3.0 * se.max(1e-4),
            "mcmc {mcmc_mean} vs oracle {oracle_mean} (se {se})"
        );
    }

    #[test]
    fn hard_selection_keeps_conjugacy() {
        // gamma = 0: counts must not touch the posterior (prior draw)
        let data = binary_dataset(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        let mut hp = HyperParams::defaults_for(&data);
        hp.var_select = VarSelectKind::BinaryCluster;
        let ctx = CovContext::new(&data, &hp).unwrap();
        let g = GlobalParams::new(0, 2);
        let mut rng = RngStream::new(403);
        let mut kernels = CovKernels::new();
        let members: Vec<usize> = (0..4).collect();
        let n = 20_000;
        let (mut off_draws, mut on_draws) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let mut cp = ClusterParams {
                gamma: Some(vec![0, 1]),
                ..Default::default()
            };
            update_cluster(&data, &ctx, &hp, 0, &members, &mut cp, &g, &mut kernels, &mut rng)
                .unwrap();
            let phi = cp.phi.unwrap();
            off_draws.push(phi[0][1]);
            on_draws.push(phi[1][1]);
        }
        // column 0 switched off: Beta(1,1), mean 1/2
        let se_off = ((1.0 / 12.0) / n as f64).sqrt();
        assert!((mean(&off_draws) - 0.5).abs() < 3.0 * se_off);
        // column 1 on: Beta(1+4, 1), mean 5/6
        let var_on = 5.0 / (36.0 * 7.0);
        let se_on = (var_on / n as f64).sqrt();
        assert!((mean(&on_draws) - 5.0 / 6.0).abs() < 3.0 * se_on);
    }

    #[test]
    fn marginal_likelihood_singleton() {
        // one row, one binary column, a = (1,1): m = 1/2
        let data = binary_dataset(&[[1.0, 0.0]]);
        let (hp, ctx) = setup(&data);
        let lm = log_marginal(&data, &ctx, &hp, &[0]);
        assert!((lm - (0.25f64).ln()).abs() < 1e-12); // 1/2 per column, two columns
        assert_eq!(log_marginal(&data, &ctx, &hp, &[]), 0.0);
    }

    #[test]
    fn softmax_coords_round_trip() {
        let p = vec![0.2, 0.5, 0.3];
        let eta = to_softmax_coords(&p);
        let q = softmax_probs(&eta);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
