//! Multivariate Gaussian covariate block.
//!
//! The prior is semi-conjugate: mu_c ~ Normal(mu0, Sigma0) independent of
//! Sigma_c ~ InvWishart(r0, kappa0) in the crate's convention
//! (E[Sigma_c] = r0^-1/(kappa0 - J - 1)). The Gibbs pair draws Sigma_c given
//! mu_c from its inverse-Wishart conditional (standard-parameterization scale
//! r0^-1 plus the residual outer-product sum) and then mu_c given Sigma_c
//! from the selection-aware normal conditional.
//!
//! Missing entries contribute the observed-coordinate marginal to the
//! likelihood; inside the parameter update they are filled in with a draw
//! from their conditional given the observed coordinates, which leaves the
//! observed-data posterior invariant.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::dist::{sample_inv_wishart, sample_mv_normal, sample_wishart, symmetrize};
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::rng::RngStream;
use crate::state::{ClusterParams, GlobalParams};

use super::select::selector;
use super::CovContext;

const LN_2PI: f64 = 1.8378770664093453;

/// Composite mean of the Gaussian block: per coordinate,
/// sel * mu + (1 - sel) * xbar.
pub fn effective_mean(ctx: &CovContext, cp: &ClusterParams, g: &GlobalParams) -> DVector<f64> {
    let mu = cp.mu.as_ref().expect("gaussian block missing");
    DVector::from_fn(mu.len(), |gpos, _| {
        let j = ctx.layout.continuous[gpos];
        super::select::composite(mu[gpos], ctx.null.xbar[gpos], selector(ctx, g, cp, j))
    })
}

/// Log likelihood of row `i`: multivariate normal over the observed
/// coordinates (marginal sub-block).
pub fn log_lik(
    data: &Dataset,
    ctx: &CovContext,
    i: usize,
    cp: &ClusterParams,
    g: &GlobalParams,
) -> f64 {
    if ctx.layout.continuous.is_empty() || cp.mu.is_none() {
        return 0.0;
    }
    let sigma = cp.sigma.as_ref().expect("gaussian block missing");
    let mu_star = effective_mean(ctx, cp, g);
    let observed: Vec<usize> = ctx
        .layout
        .continuous
        .iter()
        .enumerate()
        .filter(|&(_, &j)| !data.covariates.is_missing(i, j))
        .map(|(gpos, _)| gpos)
        .collect();
    if observed.is_empty() {
        return 0.0;
    }
    let d = observed.len();
    let x = DVector::from_fn(d, |r, _| {
        data.covariates.value(i, ctx.layout.continuous[observed[r]])
    });
    let m = DVector::from_fn(d, |r, _| mu_star[observed[r]]);
    let s = DMatrix::from_fn(d, d, |r, c| sigma[(observed[r], observed[c])]);
    log_mv_normal(&x, &m, &s)
}

pub fn log_mv_normal(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x.len();
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => return f64::NEG_INFINITY,
    };
    let log_det = 2.0 * chol.l().diagonal().map(|v| v.ln()).sum();
    let diff = x - mean;
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved);
    -0.5 * (d as f64 * LN_2PI + log_det + quad)
}

/// Selection-aware normal conditional for the cluster mean:
/// cov = (Sigma0^-1 + n Gamma Sigma_c^-1 Gamma)^-1 and
/// mean = cov [Sigma0^-1 mu0 + n Gamma Sigma_c^-1 (xbar_c - (I - Gamma) xbar)].
/// With every selector at 1 this is the standard no-selection conditional.
pub fn mu_conditional(
    n_c: usize,
    xbar_c: &DVector<f64>,
    gamma_diag: &DVector<f64>,
    sigma_c: &DMatrix<f64>,
    mu0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    xbar_all: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let j = mu0.len();
    let sigma0_inv = sigma0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Sigma0".into()))?
        .inverse();
    let sigma_c_inv = sigma_c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("cluster covariance".into()))?
        .inverse();
    let gamma_m = DMatrix::from_diagonal(gamma_diag);
    let prec = &sigma0_inv + (n_c as f64) * &gamma_m * &sigma_c_inv * &gamma_m;
    let cov = symmetrize(
        &prec
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("mean conditional precision".into()))?
            .inverse(),
    );
    let shrunk = xbar_c - (DMatrix::identity(j, j) - &gamma_m) * xbar_all;
    let rhs = &sigma0_inv * mu0 + (n_c as f64) * &gamma_m * &sigma_c_inv * shrunk;
    let mean = &cov * rhs;
    Ok((mean, cov))
}

/// Gibbs update of (Sigma_c, mu_c) for one cluster. Empty clusters reduce to
/// prior draws through the same code path.
pub fn update_cluster(
    data: &Dataset,
    ctx: &CovContext,
    hp: &HyperParams,
    members: &[usize],
    cp: &mut ClusterParams,
    g: &GlobalParams,
    rng: &mut RngStream,
) -> Result<()> {
    let jg = ctx.layout.continuous.len();
    if jg == 0 {
        return Ok(());
    }
    if cp.mu.is_none() || cp.sigma.is_none() {
        draw_prior(ctx, hp, cp, rng)?;
    }
    let r0_inv = ctx.r0_inv.as_ref().expect("gaussian context");
    let n_c = members.len();

    // complete rows under the current parameters (missing coordinates drawn
    // from their conditional)
    let mu_star = effective_mean(ctx, cp, g);
    let sigma = cp.sigma.clone().unwrap();
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n_c);
    for &i in members {
        rows.push(complete_row(data, ctx, i, &mu_star, &sigma, rng)?);
    }

    // Sigma_c | mu_c: inverse-Wishart with residuals against the composite mean
    let mut resid = DMatrix::<f64>::zeros(jg, jg);
    for row in &rows {
        let d = row - &mu_star;
        resid += &d * d.transpose();
    }
    let psi_post = symmetrize(&(r0_inv + resid));
    let prec_scale = psi_post
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("posterior scale".into()))?
        .inverse();
    let prec = sample_wishart(&prec_scale, hp.kappa0 + n_c as f64, rng)?;
    let sigma_new = symmetrize(
        &prec
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("sampled precision".into()))?
            .inverse(),
    );

    // mu_c | Sigma_c through the selection-aware conditional
    let gamma_diag = DVector::from_fn(jg, |gpos, _| {
        selector(ctx, g, cp, ctx.layout.continuous[gpos])
    });
    let xbar_c = if n_c == 0 {
        DVector::zeros(jg)
    } else {
        let mut s = DVector::zeros(jg);
        for row in &rows {
            s += row;
        }
        s / n_c as f64
    };
    let xbar_all = DVector::from_column_slice(&ctx.null.xbar);
    let (mean, cov) = mu_conditional(
        n_c,
        &xbar_c,
        &gamma_diag,
        &sigma_new,
        &hp.mu0,
        &hp.sigma0,
        &xbar_all,
    )?;
    let mu_new = sample_mv_normal(&mean, &cov, rng)?;
    cp.sigma = Some(sigma_new);
    cp.mu = Some(mu_new);
    Ok(())
}

fn complete_row(
    data: &Dataset,
    ctx: &CovContext,
    i: usize,
    mu_star: &DVector<f64>,
    sigma: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let jg = ctx.layout.continuous.len();
    let mut out = DVector::zeros(jg);
    let mut missing = Vec::new();
    let mut observed = Vec::new();
    for (gpos, &j) in ctx.layout.continuous.iter().enumerate() {
        if data.covariates.is_missing(i, j) {
            missing.push(gpos);
        } else {
            observed.push(gpos);
            out[gpos] = data.covariates.value(i, j);
        }
    }
    if missing.is_empty() {
        return Ok(out);
    }
    if observed.is_empty() {
        let draw = sample_mv_normal(mu_star, sigma, rng)?;
        return Ok(draw);
    }
    // conditional normal of the missing block given the observed block
    let (nm, no) = (missing.len(), observed.len());
    let s_oo = DMatrix::from_fn(no, no, |r, c| sigma[(observed[r], observed[c])]);
    let s_mo = DMatrix::from_fn(nm, no, |r, c| sigma[(missing[r], observed[c])]);
    let s_mm = DMatrix::from_fn(nm, nm, |r, c| sigma[(missing[r], missing[c])]);
    let chol = s_oo
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("observed sub-block".into()))?;
    let diff = DVector::from_fn(no, |r, _| out[observed[r]] - mu_star[observed[r]]);
    let solved = chol.solve(&diff);
    let cond_mean = DVector::from_fn(nm, |r, _| mu_star[missing[r]]) + &s_mo * solved;
    let cond_cov = symmetrize(&(&s_mm - &s_mo * chol.solve(&s_mo.transpose())));
    let draw = sample_mv_normal(&cond_mean, &cond_cov, rng)?;
    for (r, &gpos) in missing.iter().enumerate() {
        out[gpos] = draw[r];
    }
    Ok(out)
}

pub fn draw_prior(
    ctx: &CovContext,
    hp: &HyperParams,
    cp: &mut ClusterParams,
    rng: &mut RngStream,
) -> Result<()> {
    if ctx.layout.continuous.is_empty() {
        return Ok(());
    }
    cp.sigma = Some(sample_inv_wishart(&hp.r0, hp.kappa0, rng)?);
    cp.mu = Some(sample_mv_normal(&hp.mu0, &hp.sigma0, rng)?);
    Ok(())
}

/// Normal-inverse-Wishart marginal likelihood of the complete member rows
/// (matrix-variate Student form), the score contribution of the Gaussian
/// block. Unit prior precision ties the mean to Sigma; rows with missing
/// coordinates are left out.
pub fn log_marginal(data: &Dataset, ctx: &CovContext, hp: &HyperParams, members: &[usize]) -> f64 {
    let jg = ctx.layout.continuous.len();
    if jg == 0 {
        return 0.0;
    }
    let rows: Vec<DVector<f64>> = members
        .iter()
        .filter(|&&i| {
            ctx.layout
                .continuous
                .iter()
                .all(|&j| !data.covariates.is_missing(i, j))
        })
        .map(|&i| {
            DVector::from_fn(jg, |r, _| data.covariates.value(i, ctx.layout.continuous[r]))
        })
        .collect();
    let n = rows.len();
    if n == 0 {
        return 0.0;
    }
    let psi0 = ctx.r0_inv.as_ref().expect("gaussian context");
    let k0 = 1.0f64;
    let v0 = hp.kappa0;
    let mut xbar = DVector::zeros(jg);
    for row in &rows {
        xbar += row;
    }
    xbar /= n as f64;
    let mut s = DMatrix::<f64>::zeros(jg, jg);
    for row in &rows {
        let d = row - &xbar;
        s += &d * d.transpose();
    }
    let kn = k0 + n as f64;
    let vn = v0 + n as f64;
    let dm = &xbar - &hp.mu0;
    let psin = psi0 + s + (k0 * n as f64 / kn) * &dm * dm.transpose();
    let jf = jg as f64;
    -0.5 * (n as f64) * jf * std::f64::consts::PI.ln() + ln_mv_gamma(jg, vn / 2.0)
        - ln_mv_gamma(jg, v0 / 2.0)
        + 0.5 * v0 * log_det(psi0)
        - 0.5 * vn * log_det(&psin)
        + 0.5 * jf * (k0.ln() - kn.ln())
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    let chol = m.clone().cholesky().expect("log_det of non-SPD matrix");
    2.0 * chol.l().diagonal().map(|v| v.ln()).sum()
}

fn ln_mv_gamma(j: usize, a: f64) -> f64 {
    let mut v = (j * (j - 1)) as f64 / 4.0 * std::f64::consts::PI.ln();
    for i in 1..=j {
        v += ln_gamma(a + (1.0 - i as f64) / 2.0);
    }
    v
}

/// Redraw the observed continuous entries of row `i` from the likelihood.
pub fn simulate_row(
    data: &mut Dataset,
    ctx: &CovContext,
    i: usize,
    cp: &ClusterParams,
    g: &GlobalParams,
    rng: &mut RngStream,
) -> Result<()> {
    if ctx.layout.continuous.is_empty() || cp.mu.is_none() {
        return Ok(());
    }
    let mu_star = effective_mean(ctx, cp, g);
    let sigma = cp.sigma.as_ref().unwrap();
    let draw = sample_mv_normal(&mu_star, sigma, rng)?;
    for (gpos, &j) in ctx.layout.continuous.iter().enumerate() {
        if !data.covariates.is_missing(i, j) {
            data.covariates.set(i, j, draw[gpos]);
        }
    }
    Ok(())
}
