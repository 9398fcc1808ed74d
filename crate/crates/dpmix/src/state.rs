//! Chain state: stick-breaking weights, allocations with slice variables,
//! cluster-specific and global parameters, and the bookkeeping that bounds
//! how many mixture components a sweep has to touch.
//!
//! Cluster labels are dense integers starting at 0 in memory; they are
//! rendered 1-based in all output files. The per-sweep label sets are
//! `active = 0..=z_star` (labels holding at least the largest allocation),
//! `potential = z_star+1..=c_star` (instantiated empty labels that may gain
//! members at the next allocation), and everything above `c_star` is never
//! touched.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stick-breaking state: fractions V, derived weights psi, concentration.
#[derive(Clone, Debug)]
pub struct StickState {
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
    pub alpha: f64,
}

/// Weights from stick fractions: psi_c = v_c * prod_{l<c} (1 - v_l).
/// Every fraction must lie in (0, 1); the final one may be exactly 1
/// (truncated sampler).
pub fn stick_weights(v: &[f64]) -> Result<Vec<f64>> {
    let mut psi = Vec::with_capacity(v.len());
    let mut remaining = 1.0f64;
    for (c, &vc) in v.iter().enumerate() {
        let last = c + 1 == v.len();
        let ok = vc > 0.0 && (vc < 1.0 || (last && vc == 1.0));
        if !ok {
            return Err(Error::ParameterDomain(format!(
                "stick fraction v[{c}] = {vc} outside (0, 1)"
            )));
        }
        psi.push(vc * remaining);
        remaining *= 1.0 - vc;
    }
    Ok(psi)
}

impl StickState {
    pub fn new(alpha: f64) -> StickState {
        StickState {
            v: Vec::new(),
            psi: Vec::new(),
            alpha,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn recompute_psi(&mut self) {
        self.psi = stick_weights(&self.v).expect("invalid stick state");
    }

    /// Product of (1 - v_c) over all sticks, i.e. the unbroken remainder.
    pub fn remaining(&self) -> f64 {
        self.v.iter().map(|v| 1.0 - v).product()
    }

    pub fn push(&mut self, v: f64) {
        let remaining = self.remaining();
        self.v.push(v);
        self.psi.push(v * remaining);
    }

    pub fn truncate(&mut self, len: usize) {
        self.v.truncate(len);
        self.psi.truncate(len);
    }

    pub fn partial_sum(&self, count: usize) -> f64 {
        self.psi[..count].iter().sum()
    }
}

/// Allocations, slice variables and derived bounds/counts.
#[derive(Clone, Debug)]
pub struct AllocationState {
    /// Cluster label per individual (0-based).
    pub z: Vec<usize>,
    /// Slice variable per individual; empty for the truncated sampler.
    pub u: Vec<f64>,
    /// Largest allocated label.
    pub z_star: usize,
    /// Smallest slice variable (1.0 when u is unused).
    pub u_star: f64,
    /// Largest label instantiated this sweep.
    pub c_star: usize,
    /// n_c: members per label, for labels 0..=c_star.
    pub counts: Vec<usize>,
    /// n_c^+: members with a label strictly above c.
    pub counts_above: Vec<usize>,
}

impl AllocationState {
    pub fn new(n: usize) -> AllocationState {
        AllocationState {
            z: vec![0; n],
            u: Vec::new(),
            z_star: 0,
            u_star: 1.0,
            c_star: 0,
            counts: vec![n],
            counts_above: vec![0],
        }
    }

    pub fn refresh_counts(&mut self, n_labels: usize) {
        let (counts, above) = refresh_counts(&self.z, n_labels);
        self.counts = counts;
        self.counts_above = above;
        self.z_star = *self.z.iter().max().expect("no individuals");
    }

    pub fn n_nonempty(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Member lists per label, 0..n_labels.
    pub fn members(&self, n_labels: usize) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); n_labels];
        for (i, &zi) in self.z.iter().enumerate() {
            m[zi].push(i);
        }
        m
    }
}

/// Exact per-label counts n_c and tail counts n_c^+ = #|{i : z_i > c}|.
pub fn refresh_counts(z: &[usize], n_labels: usize) -> (Vec<usize>, Vec<usize>) {
    assert!(!z.is_empty());
    let mut counts = vec![0usize; n_labels];
    for &zi in z {
        counts[zi] += 1;
    }
    let mut above = vec![0usize; n_labels];
    let mut acc = 0usize;
    for c in (0..n_labels).rev() {
        above[c] = acc;
        acc += counts[c];
    }
    (counts, above)
}

/// Bounds for a slice sweep: largest allocated label, smallest slice
/// variable, and the smallest label count whose partial psi sum exceeds
/// 1 - u_star. Fails with `InsufficientSticks` when the instantiated sticks
/// cannot certify the bound; the caller must extend V and retry.
pub fn compute_active_bounds(
    z: &[usize],
    u: &[f64],
    sticks: &StickState,
) -> Result<(usize, f64, usize)> {
    let z_star = *z.iter().max().expect("no individuals");
    let u_star = u.iter().cloned().fold(f64::INFINITY, f64::min);
    debug_assert!(u_star > 0.0);
    let mut acc = 0.0;
    for c in 0..sticks.len() {
        acc += sticks.psi[c];
        if c >= z_star && acc > 1.0 - u_star {
            return Ok((z_star, u_star, c));
        }
    }
    Err(Error::InsufficientSticks { have: sticks.len() })
}

/// Per-cluster parameters. Which fields are populated depends on the
/// covariate model, the response model and the variable selection type.
#[derive(Clone, Debug, Default)]
pub struct ClusterParams {
    /// Gaussian covariate block mean.
    pub mu: Option<DVector<f64>>,
    /// Gaussian covariate block covariance.
    pub sigma: Option<DMatrix<f64>>,
    /// Per discrete column: category probabilities.
    pub phi: Option<Vec<Vec<f64>>>,
    /// Response intercept(s): length 1, or R-1 for a categorical response.
    pub theta: Vec<f64>,
    /// Hard selection switches, one per covariate (binary-cluster selection).
    pub gamma: Option<Vec<u8>>,
}

/// Global (non-cluster-specific) parameters.
#[derive(Clone, Debug)]
pub struct GlobalParams {
    /// Fixed-effect coefficients, row-major (R-1 or 1) x L.
    pub beta: Vec<f64>,
    /// Gaussian response precision.
    pub tau_y: f64,
    /// Extra-variation precision.
    pub tau_eps: f64,
    /// Extra-variation linear predictors, one per individual (sampled state).
    pub lambda: Vec<f64>,
    /// Soft selection switches, one per covariate.
    pub zeta: Vec<f64>,
    /// Selection probabilities, one per covariate.
    pub rho: Vec<f64>,
    /// Sparsity indicators: false pins rho_j (and the selector) to zero.
    pub rho_omega: Vec<bool>,
}

impl GlobalParams {
    pub fn new(n_beta: usize, n_covariates: usize) -> GlobalParams {
        GlobalParams {
            beta: vec![0.0; n_beta],
            tau_y: 1.0,
            tau_eps: 1.0,
            lambda: Vec::new(),
            zeta: vec![0.5; n_covariates],
            rho: vec![0.5; n_covariates],
            rho_omega: vec![true; n_covariates],
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub sticks: StickState,
    pub alloc: AllocationState,
    pub clusters: Vec<ClusterParams>,
    pub globals: GlobalParams,
}

impl ChainState {
    /// Number of instantiated labels (active plus potential).
    pub fn n_labels(&self) -> usize {
        self.alloc.c_star + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn whole_stick() {
        assert_eq!(stick_weights(&[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn product_formula() {
        let psi = stick_weights(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(psi, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(stick_weights(&[0.5, 1.0, 0.5]).is_err()); // interior 1
        assert!(stick_weights(&[-0.1]).is_err());
        assert!(stick_weights(&[0.0]).is_err());
    }

    #[test]
    fn telescoping_identity() {
        let mut rng = RngStream::new(300);
        let v: Vec<f64> = (0..20)
            .map(|_| crate::dist::sample_beta(1.0, 2.0, &mut rng).unwrap())
            .collect();
        let psi = stick_weights(&v).unwrap();
        let total: f64 = psi.iter().sum();
        let expect = 1.0 - v.iter().map(|v| 1.0 - v).product::<f64>();
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn counts_simple_cases() {
        let (n, above) = refresh_counts(&[0, 0, 1], 2);
        assert_eq!(n, vec![2, 1]);
        assert_eq!(above, vec![1, 0]);
        let (n, above) = refresh_counts(&[0, 0, 0], 1);
        assert_eq!(n, vec![3]);
        assert_eq!(above, vec![0]);
    }

    #[test]
    fn bounds_partial_sum_rule() {
        // psi = (0.5, 0.25, 0.125, ...), u_star = 0.3:
        // partial sums 0.5, 0.75 > 0.7 at the second component.
        let mut sticks = StickState::new(1.0);
        for _ in 0..6 {
            sticks.push(0.5);
        }
        let z = vec![0, 0, 0];
        let u = vec![0.4, 0.3, 0.9];
        let (z_star, u_star, c_star) = compute_active_bounds(&z, &u, &sticks).unwrap();
        assert_eq!(z_star, 0);
        assert_eq!(u_star, 0.3);
        assert_eq!(c_star, 1); // 0-based: second component
    }

    #[test]
    fn bounds_single_cluster() {
        let mut sticks = StickState::new(1.0);
        sticks.push(0.999);
        let z = vec![0, 0];
        let u = vec![0.5, 0.25];
        let (z_star, _, c_star) = compute_active_bounds(&z, &u, &sticks).unwrap();
        assert_eq!(z_star, 0);
        assert!(c_star >= z_star);
    }

    #[test]
    fn bounds_error_when_sticks_exhausted() {
        let mut sticks = StickState::new(1.0);
        sticks.push(0.1);
        let z = vec![0];
        let u = vec![1e-6];
        assert!(matches!(
            compute_active_bounds(&z, &u, &sticks),
            Err(Error::InsufficientSticks { .. })
        ));
    }

    proptest! {
        #[test]
        fn psi_positive_and_summing_below_one(v in proptest::collection::vec(1e-6f64..0.999999, 1..40)) {
            let psi = stick_weights(&v).unwrap();
            prop_assert!(psi.iter().all(|&p| p > 0.0));
            prop_assert!(psi.iter().sum::<f64>() <= 1.0 + 1e-12);
        }

        #[test]
        fn c_star_dominates_z_star(
            v in proptest::collection::vec(0.01f64..0.99, 8..30),
            z in proptest::collection::vec(0usize..4, 1..20),
            seed in 0u64..1000,
        ) {
            let sticks = StickState { psi: stick_weights(&v).unwrap(), v, alpha: 1.0 };
            let mut rng = RngStream::new(seed);
            // slice variables consistent with the allocations
            let u: Vec<f64> = z.iter().map(|&zi| {
                let w = sticks.psi.get(zi).copied().unwrap_or(1e-4);
                rng.open01() * w
            }).collect();
            if let Ok((z_star, _, c_star)) = compute_active_bounds(&z, &u, &sticks) {
                prop_assert!(c_star >= z_star);
            }
        }
    }
}
