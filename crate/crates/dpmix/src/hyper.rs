//! Prior hyperparameters and sampler configuration.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Degrees of freedom of the location-scale t prior used for response
/// intercepts and fixed-effect coefficients.
pub const T_PRIOR_DF: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerVariantKind {
    Truncated,
    SliceDependent,
    SliceIndependent,
}

impl SamplerVariantKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "truncated" => Ok(SamplerVariantKind::Truncated),
            "slicedependent" => Ok(SamplerVariantKind::SliceDependent),
            "sliceindependent" => Ok(SamplerVariantKind::SliceIndependent),
            other => Err(Error::Config(format!("unknown sampler variant '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerVariantKind::Truncated => "truncated",
            SamplerVariantKind::SliceDependent => "slice-dependent",
            SamplerVariantKind::SliceIndependent => "slice-independent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarSelectKind {
    None,
    Continuous,
    BinaryCluster,
}

impl VarSelectKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" => Ok(VarSelectKind::None),
            "continuous" => Ok(VarSelectKind::Continuous),
            "binarycluster" => Ok(VarSelectKind::BinaryCluster),
            other => Err(Error::Config(format!(
                "unknown variable selection type '{other}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VarSelectKind::None => "none",
            VarSelectKind::Continuous => "continuous",
            VarSelectKind::BinaryCluster => "binaryCluster",
        }
    }
}

/// Every prior hyperparameter plus the sampler block.
///
/// The Gaussian covariate block follows the crate's inverse-Wishart
/// convention: `Sigma_c ~ sample_inv_wishart(r0, kappa0)`, i.e.
/// `E[Sigma_c] = r0^-1 / (kappa0 - J - 1)`.
#[derive(Clone, Debug)]
pub struct HyperParams {
    // Gaussian covariate block
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub r0: DMatrix<f64>,
    pub kappa0: f64,
    // discrete covariate block: Dirichlet concentration per discrete column
    pub a_dir: Vec<Vec<f64>>,
    // response block
    pub mu_theta: f64,
    pub sigma_theta: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
    pub shape_alpha: f64,
    pub rate_alpha: f64,
    pub s_tau_y: f64,
    pub r_tau_y: f64,
    pub s_tau_eps: f64,
    pub r_tau_eps: f64,
    pub a_rho: f64,
    pub b_rho: f64,
    // sampler block
    pub variant: SamplerVariantKind,
    pub truncation_c: usize,
    pub kappa_slice: f64,
    pub var_select: VarSelectKind,
    pub extra_variation: bool,
    pub n_sweeps: usize,
    pub n_burn: usize,
    pub n_clus_init: usize,
    pub seed: u64,
}

impl HyperParams {
    /// Defaults for a dataset. The Gaussian block is data-driven: prior means
    /// at the column means, prior spreads matched to the column variances.
    pub fn defaults_for(data: &Dataset) -> HyperParams {
        let cont = data.covariates.continuous_columns();
        let jg = cont.len();
        let mut mu0 = DVector::zeros(jg);
        let mut var = DVector::from_element(jg, 1.0);
        for (g, &j) in cont.iter().enumerate() {
            let mut vals = Vec::new();
            for i in 0..data.n() {
                if !data.covariates.is_missing(i, j) {
                    vals.push(data.covariates.value(i, j));
                }
            }
            if !vals.is_empty() {
                mu0[g] = crate::util::mean(&vals);
                if vals.len() > 1 {
                    var[g] = crate::util::variance(&vals).max(1e-6);
                }
            }
        }
        let kappa0 = jg as f64 + 2.0;
        // r0 chosen so the prior mean of Sigma_c is the observed spread:
        // E[Sigma] = r0^-1/(kappa0 - J - 1) = diag(var).
        let r0 = DMatrix::from_diagonal(&var.map(|v| 1.0 / v));
        let sigma0 = DMatrix::from_diagonal(&var);

        let a_dir = data
            .covariates
            .discrete_columns()
            .iter()
            .map(|&j| vec![1.0; data.covariates.n_categories(j)])
            .collect();

        HyperParams {
            mu0,
            sigma0,
            r0,
            kappa0,
            a_dir,
            mu_theta: 0.0,
            sigma_theta: 2.5,
            mu_beta: 0.0,
            sigma_beta: 2.5,
            shape_alpha: 1.0,
            rate_alpha: 0.5,
            s_tau_y: 2.5,
            r_tau_y: 2.5,
            s_tau_eps: 2.5,
            r_tau_eps: 2.5,
            a_rho: 0.5,
            b_rho: 0.5,
            variant: SamplerVariantKind::SliceDependent,
            truncation_c: 50,
            kappa_slice: 0.8,
            var_select: VarSelectKind::None,
            extra_variation: false,
            n_sweeps: 1000,
            n_burn: 1000,
            n_clus_init: 20,
            seed: 20177,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let jg = data.covariates.continuous_columns().len();
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
            Ok(())
        };
        positive("sigmaTheta", self.sigma_theta)?;
        positive("sigmaBeta", self.sigma_beta)?;
        positive("shapeAlpha", self.shape_alpha)?;
        positive("rateAlpha", self.rate_alpha)?;
        positive("sTauY", self.s_tau_y)?;
        positive("rTauY", self.r_tau_y)?;
        positive("sTauEps", self.s_tau_eps)?;
        positive("rTauEps", self.r_tau_eps)?;
        positive("aRho", self.a_rho)?;
        positive("bRho", self.b_rho)?;
        if jg > 0 {
            if self.mu0.len() != jg || self.sigma0.nrows() != jg || self.r0.nrows() != jg {
                return Err(Error::Config(format!(
                    "Gaussian covariate priors must have dimension {jg}"
                )));
            }
            if !(self.kappa0 > jg as f64 - 1.0) {
                return Err(Error::Config(format!(
                    "kappa0 = {} must exceed J - 1 = {}",
                    self.kappa0,
                    jg as f64 - 1.0
                )));
            }
        }
        let disc = data.covariates.discrete_columns();
        if self.a_dir.len() != disc.len() {
            return Err(Error::Config(format!(
                "aDir has {} entries but there are {} discrete covariates",
                self.a_dir.len(),
                disc.len()
            )));
        }
        for (a, &j) in self.a_dir.iter().zip(&disc) {
            if a.len() != data.covariates.n_categories(j) {
                return Err(Error::Config(format!(
                    "aDir for covariate '{}' must have {} entries",
                    data.covariates.names[j],
                    data.covariates.n_categories(j)
                )));
            }
            for &ak in a {
                positive("aDir entry", ak)?;
            }
        }
        if !(self.kappa_slice > 0.0 && self.kappa_slice < 1.0) {
            return Err(Error::Config(format!(
                "kappaSlice must lie in (0, 1), got {}",
                self.kappa_slice
            )));
        }
        if self.variant == SamplerVariantKind::Truncated && self.truncation_c < 2 {
            return Err(Error::Config(
                "truncation level must be at least 2".into(),
            ));
        }
        if self.n_clus_init == 0 {
            return Err(Error::Config("nClusInit must be at least 1".into()));
        }
        if self.extra_variation {
            match data.response_kind() {
                Some(crate::data::ResponseKind::Bernoulli)
                | Some(crate::data::ResponseKind::Binomial)
                | Some(crate::data::ResponseKind::Poisson) => {}
                other => {
                    return Err(Error::Config(format!(
                        "extra response variation is only available for bernoulli, binomial and poisson outcomes (got {:?})",
                        other.map(|k| k.name())
                    )))
                }
            }
        }
        if self.var_select != VarSelectKind::None && data.n_covariates() == 0 {
            return Err(Error::Config(
                "variable selection requires covariates".into(),
            ));
        }
        Ok(())
    }

    /// Dirichlet prior for discrete covariate `j` (index into all covariates).
    pub fn a_dir_for(&self, data: &Dataset, j: usize) -> &[f64] {
        let disc = data.covariates.discrete_columns();
        let pos = disc.iter().position(|&c| c == j).expect("not a discrete column");
        &self.a_dir[pos]
    }
}

/// Reusable map from covariate column index to position among discrete
/// columns, avoiding repeated scans in likelihood loops.
#[derive(Clone, Debug)]
pub struct ColumnLayout {
    pub discrete: Vec<usize>,
    pub continuous: Vec<usize>,
    pub discrete_pos: Vec<Option<usize>>,
    pub continuous_pos: Vec<Option<usize>>,
}

impl ColumnLayout {
    pub fn of(data: &Dataset) -> ColumnLayout {
        let j = data.n_covariates();
        let discrete = data.covariates.discrete_columns();
        let continuous = data.covariates.continuous_columns();
        let mut discrete_pos = vec![None; j];
        let mut continuous_pos = vec![None; j];
        for (p, &c) in discrete.iter().enumerate() {
            discrete_pos[c] = Some(p);
        }
        for (p, &c) in continuous.iter().enumerate() {
            continuous_pos[c] = Some(p);
        }
        ColumnLayout {
            discrete,
            continuous,
            discrete_pos,
            continuous_pos,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, Covariates, FixedEffects, Outcome};

    fn dataset() -> Dataset {
        let mut c = Covariates::new(
            vec!["x1".into(), "x2".into()],
            vec![
                ColumnKind::Discrete { n_categories: 3 },
                ColumnKind::Continuous,
            ],
            4,
        );
        for i in 0..4 {
            c.set(i, 0, (i % 3) as f64);
            c.set(i, 1, i as f64);
        }
        Dataset::new(
            Outcome::Bernoulli(vec![0, 1, 0, 1]),
            FixedEffects::new(vec![], 4),
            c,
        )
        .unwrap()
    }

    #[test]
    fn defaults_match_contract() {
        let data = dataset();
        let hp = HyperParams::defaults_for(&data);
        assert_eq!(hp.shape_alpha, 1.0);
        assert_eq!(hp.rate_alpha, 0.5);
        assert_eq!(hp.mu_theta, 0.0);
        assert_eq!(hp.sigma_theta, 2.5);
        assert_eq!(hp.mu_beta, 0.0);
        assert_eq!(hp.sigma_beta, 2.5);
        assert_eq!(hp.a_rho, 0.5);
        assert_eq!(hp.b_rho, 0.5);
        assert!(hp.a_dir[0].iter().all(|&a| a == 1.0));
        assert_eq!(hp.kappa_slice, 0.8);
        hp.validate(&data).unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        let data = dataset();
        let mut hp = HyperParams::defaults_for(&data);
        hp.kappa_slice = 1.0;
        assert!(hp.validate(&data).is_err());
        let mut hp = HyperParams::defaults_for(&data);
        hp.kappa0 = -1.0;
        assert!(hp.validate(&data).is_err());
        let mut hp = HyperParams::defaults_for(&data);
        hp.extra_variation = true;
        assert!(hp.validate(&data).is_ok());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            SamplerVariantKind::Truncated,
            SamplerVariantKind::SliceDependent,
            SamplerVariantKind::SliceIndependent,
        ] {
            assert_eq!(SamplerVariantKind::parse(v.name()).unwrap(), v);
        }
        assert!(SamplerVariantKind::parse("polya").is_err());
    }
}
