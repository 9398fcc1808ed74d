//! In-memory data model: outcomes, typed covariates with a missingness mask,
//! and fixed effects.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseKind {
    Bernoulli,
    Binomial,
    Poisson,
    Gaussian,
    Categorical,
}

impl ResponseKind {
    pub fn parse(s: &str) -> Result<ResponseKind> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" | "binary" => Ok(ResponseKind::Bernoulli),
            "binomial" => Ok(ResponseKind::Binomial),
            "poisson" => Ok(ResponseKind::Poisson),
            "gaussian" | "normal" => Ok(ResponseKind::Gaussian),
            "categorical" => Ok(ResponseKind::Categorical),
            other => Err(Error::Config(format!("unknown response model '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ResponseKind::Bernoulli => "bernoulli",
            ResponseKind::Binomial => "binomial",
            ResponseKind::Poisson => "poisson",
            ResponseKind::Gaussian => "gaussian",
            ResponseKind::Categorical => "categorical",
        }
    }
}

/// Outcome column, one variant per response model. `None` fits a
/// covariate-only mixture.
#[derive(Clone, Debug)]
pub enum Outcome {
    None,
    Bernoulli(Vec<u8>),
    Binomial { y: Vec<u32>, trials: Vec<u32> },
    Poisson { y: Vec<u32>, offset: Vec<f64> },
    Gaussian(Vec<f64>),
    Categorical { y: Vec<u32>, n_categories: usize },
}

impl Outcome {
    pub fn kind(&self) -> Option<ResponseKind> {
        match self {
            Outcome::None => None,
            Outcome::Bernoulli(_) => Some(ResponseKind::Bernoulli),
            Outcome::Binomial { .. } => Some(ResponseKind::Binomial),
            Outcome::Poisson { .. } => Some(ResponseKind::Poisson),
            Outcome::Gaussian(_) => Some(ResponseKind::Gaussian),
            Outcome::Categorical { .. } => Some(ResponseKind::Categorical),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Outcome::None => 0,
            Outcome::Bernoulli(y) => y.len(),
            Outcome::Binomial { y, .. } => y.len(),
            Outcome::Poisson { y, .. } => y.len(),
            Outcome::Gaussian(y) => y.len(),
            Outcome::Categorical { y, .. } => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Discrete { n_categories: usize },
    Continuous,
}

/// Covariate block: an n x J matrix with per-column kind and missing mask.
/// Discrete values are stored as the category index.
#[derive(Clone, Debug)]
pub struct Covariates {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    values: Vec<f64>,
    missing: Vec<bool>,
    n: usize,
    j: usize,
}

impl Covariates {
    pub fn new(names: Vec<String>, kinds: Vec<ColumnKind>, n: usize) -> Self {
        let j = kinds.len();
        assert_eq!(names.len(), j);
        Covariates {
            names,
            kinds,
            values: vec![0.0; n * j],
            missing: vec![false; n * j],
            n,
            j,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_columns(&self) -> usize {
        self.j
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.j + j]
    }

    pub fn category(&self, i: usize, j: usize) -> usize {
        self.values[i * self.j + j] as usize
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.j + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.j + j] = v;
        self.missing[i * self.j + j] = false;
    }

    pub fn set_missing(&mut self, i: usize, j: usize) {
        self.missing[i * self.j + j] = true;
        self.values[i * self.j + j] = f64::NAN;
    }

    pub fn discrete_columns(&self) -> Vec<usize> {
        (0..self.j)
            .filter(|&j| matches!(self.kinds[j], ColumnKind::Discrete { .. }))
            .collect()
    }

    pub fn continuous_columns(&self) -> Vec<usize> {
        (0..self.j)
            .filter(|&j| matches!(self.kinds[j], ColumnKind::Continuous))
            .collect()
    }

    pub fn n_categories(&self, j: usize) -> usize {
        match self.kinds[j] {
            ColumnKind::Discrete { n_categories } => n_categories,
            ColumnKind::Continuous => panic!("column {j} is continuous"),
        }
    }

    pub fn any_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }
}

/// Fixed-effects block W (n x L), never missing.
#[derive(Clone, Debug)]
pub struct FixedEffects {
    pub names: Vec<String>,
    values: Vec<f64>,
    n: usize,
    l: usize,
}

impl FixedEffects {
    pub fn new(names: Vec<String>, n: usize) -> Self {
        let l = names.len();
        FixedEffects {
            names,
            values: vec![0.0; n * l],
            n,
            l,
        }
    }

    pub fn n_effects(&self) -> usize {
        self.l
    }

    pub fn value(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.l + l]
    }

    pub fn set(&mut self, i: usize, l: usize, v: f64) {
        self.values[i * self.l + l] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.l..(i + 1) * self.l]
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub outcome: Outcome,
    pub fixed: FixedEffects,
    pub covariates: Covariates,
    n: usize,
}

impl Dataset {
    pub fn new(outcome: Outcome, fixed: FixedEffects, covariates: Covariates) -> Result<Dataset> {
        let n = covariates.n();
        let ds = Dataset {
            outcome,
            fixed,
            covariates,
            n,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.n_columns()
    }

    pub fn n_fixed_effects(&self) -> usize {
        self.fixed.n_effects()
    }

    pub fn response_kind(&self) -> Option<ResponseKind> {
        self.outcome.kind()
    }

    /// Number of response categories (categorical outcome), otherwise 2.
    pub fn n_response_categories(&self) -> usize {
        match &self.outcome {
            Outcome::Categorical { n_categories, .. } => *n_categories,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Config("dataset has no rows".into()));
        }
        if !self.outcome.is_empty() && self.outcome.len() != n {
            return Err(Error::Config(format!(
                "outcome has {} rows but covariates have {n}",
                self.outcome.len()
            )));
        }
        match &self.outcome {
            Outcome::Bernoulli(y) => {
                for (i, &yi) in y.iter().enumerate() {
                    if yi > 1 {
                        return Err(Error::Data {
                            row: i,
                            column: "outcome".into(),
                            msg: format!("bernoulli outcome must be 0 or 1, got {yi}"),
                        });
                    }
                }
            }
            Outcome::Binomial { y, trials } => {
                for i in 0..y.len() {
                    if trials[i] == 0 {
                        return Err(Error::Data {
                            row: i,
                            column: "trials".into(),
                            msg: "binomial trials must be a positive integer".into(),
                        });
                    }
                    if y[i] > trials[i] {
                        return Err(Error::Data {
                            row: i,
                            column: "outcome".into(),
                            msg: format!("outcome {} exceeds trials {}", y[i], trials[i]),
                        });
                    }
                }
            }
            Outcome::Poisson { offset, .. } => {
                for (i, &e) in offset.iter().enumerate() {
                    if !(e.is_finite() && e > 0.0) {
                        return Err(Error::Data {
                            row: i,
                            column: "offset".into(),
                            msg: format!("poisson offset must be > 0, got {e}"),
                        });
                    }
                }
            }
            Outcome::Gaussian(y) => {
                for (i, &v) in y.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::Data {
                            row: i,
                            column: "outcome".into(),
                            msg: "gaussian outcome must be finite".into(),
                        });
                    }
                }
            }
            Outcome::Categorical { y, n_categories } => {
                if *n_categories < 2 {
                    return Err(Error::Config(
                        "categorical outcome needs at least 2 categories".into(),
                    ));
                }
                for (i, &yi) in y.iter().enumerate() {
                    if yi as usize >= *n_categories {
                        return Err(Error::Data {
                            row: i,
                            column: "outcome".into(),
                            msg: format!("category {yi} out of range 0..{n_categories}"),
                        });
                    }
                }
            }
            Outcome::None => {}
        }
        for j in 0..self.covariates.n_columns() {
            if let ColumnKind::Discrete { n_categories } = self.covariates.kinds[j] {
                if n_categories < 2 {
                    return Err(Error::Config(format!(
                        "discrete covariate '{}' needs at least 2 categories",
                        self.covariates.names[j]
                    )));
                }
                for i in 0..n {
                    if self.covariates.is_missing(i, j) {
                        continue;
                    }
                    let v = self.covariates.value(i, j);
                    if v.fract() != 0.0 || v < 0.0 || v as usize >= n_categories {
                        return Err(Error::Data {
                            row: i,
                            column: self.covariates.names[j].clone(),
                            msg: format!("category value {v} out of range 0..{n_categories}"),
                        });
                    }
                }
            } else {
                for i in 0..n {
                    if !self.covariates.is_missing(i, j)
                        && !self.covariates.value(i, j).is_finite()
                    {
                        return Err(Error::Data {
                            row: i,
                            column: self.covariates.names[j].clone(),
                            msg: "continuous covariate must be finite or NA".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
