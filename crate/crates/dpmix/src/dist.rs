//! Random-variate generation and log densities for every distribution the
//! model needs.
//!
//! Scalar variates are delegated to `rand_distr` (its gamma sampler is a
//! squeeze/rejection method that stays valid for shape < 1, which matters
//! because hyperparameters are user-settable). Beta and Dirichlet draws are
//! built from gamma draws with explicit underflow guards, the multivariate
//! normal and inverse-Wishart samplers are implemented here on top of
//! nalgebra Cholesky factors.
//!
//! Inverse-Wishart convention used throughout the crate: a draw
//! `W = sample_inv_wishart(R, k)` satisfies `W^-1 ~ Wishart(R, k)`, so
//! `E[W] = R^-1 / (k - J - 1)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StudentT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Clamp bounds keeping stick and probability draws inside the open unit
/// interval so no slice ever has zero width.
pub const UNIT_LO: f64 = 1e-300;
pub const UNIT_HI: f64 = 1.0 - 1e-15;

fn require_positive(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::ParameterDomain(format!("{name} must be finite and > 0, got {x}")));
    }
    Ok(())
}

/// Gamma(shape, rate) draw, strictly positive.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    require_positive("gamma shape", shape)?;
    require_positive("gamma rate", rate)?;
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::ParameterDomain(format!("gamma({shape}, {rate}): {e}")))?;
    let x: f64 = g.sample(rng);
    Ok(x.max(f64::MIN_POSITIVE))
}

/// Beta(a, b) draw, clamped to the open interval (0, 1).
pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    require_positive("beta a", a)?;
    require_positive("beta b", b)?;
    let x = sample_gamma(a, 1.0, rng)?;
    let y = sample_gamma(b, 1.0, rng)?;
    let s = x + y;
    let v = if s > 0.0 && s.is_finite() {
        x / s
    } else {
        // Both gammas underflowed: the limiting draw is a vertex chosen with
        // probability a/(a+b).
        if rng.open01() < a / (a + b) {
            1.0
        } else {
            0.0
        }
    };
    Ok(v.clamp(UNIT_LO, UNIT_HI))
}

/// Dirichlet(a) draw on the simplex; components strictly positive and summing
/// to one within 1e-12.
pub fn sample_dirichlet(a: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    if a.len() < 2 {
        return Err(Error::ParameterDomain(format!(
            "dirichlet needs at least 2 components, got {}",
            a.len()
        )));
    }
    for &ak in a {
        require_positive("dirichlet concentration", ak)?;
    }
    let mut g: Vec<f64> = Vec::with_capacity(a.len());
    for &ak in a {
        g.push(sample_gamma(ak, 1.0, rng)?);
    }
    let total: f64 = g.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        // All gammas underflowed; pick a vertex with probability a_k / sum(a).
        let s: f64 = a.iter().sum();
        let target = rng.open01() * s;
        let mut acc = 0.0;
        let mut idx = a.len() - 1;
        for (k, &ak) in a.iter().enumerate() {
            acc += ak;
            if target <= acc {
                idx = k;
                break;
            }
        }
        g.iter_mut().for_each(|x| *x = UNIT_LO);
        g[idx] = 1.0;
    }
    let total: f64 = g.iter().sum();
    let mut out: Vec<f64> = g.iter().map(|x| (x / total).max(UNIT_LO)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    Ok(out)
}

/// Standard normal draw.
pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    n.sample(rng)
}

/// Scalar normal draw with mean and variance.
pub fn sample_normal(mean: f64, var: f64, rng: &mut RngStream) -> Result<f64> {
    require_positive("normal variance", var)?;
    Ok(mean + var.sqrt() * sample_std_normal(rng))
}

/// Student-t draw with `nu` degrees of freedom (location 0, scale 1).
pub fn sample_student_t(nu: f64, rng: &mut RngStream) -> Result<f64> {
    require_positive("t degrees of freedom", nu)?;
    let t = StudentT::new(nu)
        .map_err(|e| Error::ParameterDomain(format!("student t({nu}): {e}")))?;
    Ok(t.sample(rng))
}

/// Multivariate normal draw.
pub fn sample_mv_normal(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("mv normal covariance {cov:.4}")))?;
    let z = DVector::from_fn(mean.len(), |_, _| sample_std_normal(rng));
    Ok(mean + chol.l() * z)
}

/// Inverse-Wishart draw under the convention documented in the module header:
/// the returned matrix W satisfies W^-1 ~ Wishart(scale, dof), giving
/// E[W] = scale^-1 / (dof - J - 1). Requires dof > J - 1.
pub fn sample_inv_wishart(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let j = scale.nrows();
    if !(dof.is_finite() && dof > j as f64 - 1.0) {
        return Err(Error::ParameterDomain(format!(
            "inverse-Wishart dof {dof} must exceed J - 1 = {}",
            j as f64 - 1.0
        )));
    }
    let prec = sample_wishart(scale, dof, rng)?;
    let chol = prec
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Wishart draw".into()))?;
    let w = chol.inverse();
    Ok(symmetrize(&w))
}

/// Wishart(scale, dof) draw by the Bartlett decomposition.
pub fn sample_wishart(scale: &DMatrix<f64>, dof: f64, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let j = scale.nrows();
    if !(dof.is_finite() && dof > j as f64 - 1.0) {
        return Err(Error::ParameterDomain(format!(
            "Wishart dof {dof} must exceed J - 1 = {}",
            j as f64 - 1.0
        )));
    }
    let chol = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("Wishart scale {scale:.4}")))?;
    let mut a = DMatrix::<f64>::zeros(j, j);
    for i in 0..j {
        // chi-square with dof - i degrees of freedom
        let chi2 = 2.0 * sample_gamma((dof - i as f64) / 2.0, 1.0, rng)?;
        a[(i, i)] = chi2.sqrt();
        for k in 0..i {
            a[(i, k)] = sample_std_normal(rng);
        }
    }
    let la = chol.l() * a;
    Ok(symmetrize(&(&la * la.transpose())))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Log density of the location-scale Student-t.
pub fn log_t_loc_scale(x: f64, mu: f64, sigma: f64, nu: f64) -> f64 {
    debug_assert!(sigma > 0.0 && nu > 0.0);
    let z = (x - mu) / sigma;
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - sigma.ln()
        - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
}

/// Log density of Normal(mean, var).
pub fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Log density of Gamma(shape, rate); -inf outside the support.
pub fn log_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of Beta(a, b); -inf outside (0, 1).
pub fn log_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
}

/// Log density of Dirichlet(a) at x; -inf off the simplex interior.
pub fn log_dirichlet_pdf(x: &[f64], a: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), a.len());
    let mut lp = ln_gamma(a.iter().sum());
    for (&xi, &ai) in x.iter().zip(a) {
        if xi <= 0.0 || xi >= 1.0 {
            return f64::NEG_INFINITY;
        }
        lp += (ai - 1.0) * xi.ln() - ln_gamma(ai);
    }
    lp
}

/// Poisson(rate) draw via inversion for small rates and rand_distr otherwise.
pub fn sample_poisson(rate: f64, rng: &mut RngStream) -> Result<u32> {
    require_positive("poisson rate", rate)?;
    let p = rand_distr::Poisson::new(rate)
        .map_err(|e| Error::ParameterDomain(format!("poisson({rate}): {e}")))?;
    let x: f64 = p.sample(rng);
    Ok(x as u32)
}

/// Binomial(n, p) draw.
pub fn sample_binomial(n: u32, p: f64, rng: &mut RngStream) -> u32 {
    let mut y = 0;
    for _ in 0..n {
        if rng.random::<f64>() < p {
            y += 1;
        }
    }
    y
}
