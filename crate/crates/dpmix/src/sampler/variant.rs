//! The three interchangeable sampler variants behind one trait, selected by
//! name at runtime.
//!
//! * `truncated`: a finite approximation with a fixed number of components;
//!   the last stick fraction is pinned at one so the weights sum to exactly
//!   one, and allocation weighs every component by psi_c.
//! * `slice-dependent`: auxiliary variables U_i ~ Unif(0, psi_{z_i}); a
//!   component is an allocation candidate only while psi_c > U_i.
//! * `slice-independent`: U_i ~ Unif(0, xi_{z_i}) against the deterministic
//!   decreasing sequence xi_c = (1 - kappa) kappa^c, with the importance
//!   correction psi_c / xi_c in the allocation weight.

use crate::dist::sample_beta;
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, SamplerVariantKind};
use crate::rng::RngStream;
use crate::state::{AllocationState, StickState};

pub trait SliceVariant: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> SamplerVariantKind;

    fn uses_slice(&self) -> bool {
        true
    }

    /// Index of a stick fraction pinned by the variant (the final, unit
    /// stick of the truncated sampler), which conditional updates must skip.
    fn fixed_stick(&self, _hp: &HyperParams) -> Option<usize> {
        None
    }

    /// Draw the slice variables given final sticks and allocations.
    fn draw_u(
        &self,
        sticks: &StickState,
        alloc: &mut AllocationState,
        hp: &HyperParams,
        rng: &mut RngStream,
    ) -> Result<()>;

    /// Redraw/extend the sticks beyond the active labels and return the new
    /// largest instantiated label (0-based). Discards the previous sweep's
    /// potential sticks and draws fresh ones from the prior.
    fn determine_reach(
        &self,
        sticks: &mut StickState,
        z_star: usize,
        u_star: f64,
        hp: &HyperParams,
        rng: &mut RngStream,
        cap: usize,
        sweep: usize,
    ) -> Result<usize>;

    /// Allocation log-weight contribution of candidate label `c` for an
    /// individual with slice variable `u_i` (-inf when the slice excludes it).
    fn log_slice_weight(&self, c: usize, sticks: &StickState, u_i: f64, hp: &HyperParams) -> f64;
}

pub fn by_kind(kind: SamplerVariantKind) -> Box<dyn SliceVariant> {
    match kind {
        SamplerVariantKind::Truncated => Box::new(Truncated),
        SamplerVariantKind::SliceDependent => Box::new(SliceDependent),
        SamplerVariantKind::SliceIndependent => Box::new(SliceIndependent),
    }
}

pub fn by_name(name: &str) -> Result<Box<dyn SliceVariant>> {
    Ok(by_kind(SamplerVariantKind::parse(name)?))
}

pub fn registered_names() -> &'static [&'static str] {
    &["truncated", "slice-dependent", "slice-independent"]
}

struct Truncated;
struct SliceDependent;
struct SliceIndependent;

impl SliceVariant for Truncated {
    fn name(&self) -> &'static str {
        "truncated"
    }

    fn kind(&self) -> SamplerVariantKind {
        SamplerVariantKind::Truncated
    }

    fn uses_slice(&self) -> bool {
        false
    }

    fn fixed_stick(&self, hp: &HyperParams) -> Option<usize> {
        Some(hp.truncation_c - 1)
    }

    fn draw_u(
        &self,
        _sticks: &StickState,
        alloc: &mut AllocationState,
        _hp: &HyperParams,
        _rng: &mut RngStream,
    ) -> Result<()> {
        alloc.u.clear();
        alloc.u_star = 1.0;
        Ok(())
    }

    fn determine_reach(
        &self,
        sticks: &mut StickState,
        z_star: usize,
        _u_star: f64,
        hp: &HyperParams,
        rng: &mut RngStream,
        _cap: usize,
        _sweep: usize,
    ) -> Result<usize> {
        let c = hp.truncation_c;
        debug_assert!(z_star < c);
        sticks.truncate(z_star + 1);
        while sticks.len() < c - 1 {
            let v = sample_beta(1.0, sticks.alpha, rng)?;
            sticks.push(v);
        }
        if sticks.len() < c {
            sticks.v.push(1.0);
            sticks.psi.push(f64::NAN);
        }
        sticks.v[c - 1] = 1.0;
        sticks.recompute_psi();
        Ok(c - 1)
    }

    fn log_slice_weight(&self, c: usize, sticks: &StickState, _u_i: f64, _hp: &HyperParams) -> f64 {
        sticks.psi[c].ln()
    }
}

impl SliceVariant for SliceDependent {
    fn name(&self) -> &'static str {
        "slice-dependent"
    }

    fn kind(&self) -> SamplerVariantKind {
        SamplerVariantKind::SliceDependent
    }

    fn draw_u(
        &self,
        sticks: &StickState,
        alloc: &mut AllocationState,
        _hp: &HyperParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let n = alloc.z.len();
        alloc.u.resize(n, 0.0);
        let mut u_star = f64::INFINITY;
        for i in 0..n {
            let width = sticks.psi[alloc.z[i]];
            let u = (rng.open01() * width).max(f64::MIN_POSITIVE);
            alloc.u[i] = u;
            u_star = u_star.min(u);
        }
        alloc.u_star = u_star;
        Ok(())
    }

    fn determine_reach(
        &self,
        sticks: &mut StickState,
        z_star: usize,
        u_star: f64,
        _hp: &HyperParams,
        rng: &mut RngStream,
        cap: usize,
        sweep: usize,
    ) -> Result<usize> {
        sticks.truncate(z_star + 1);
        loop {
            let count = sticks.len();
            if sticks.partial_sum(count) > 1.0 - u_star {
                return Ok(count - 1);
            }
            if count >= cap {
                return Err(Error::StickExtensionCap { cap, sweep });
            }
            let v = sample_beta(1.0, sticks.alpha, rng)?;
            sticks.push(v);
        }
    }

    fn log_slice_weight(&self, c: usize, sticks: &StickState, u_i: f64, _hp: &HyperParams) -> f64 {
        if sticks.psi[c] > u_i {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// xi_c = (1 - kappa) kappa^c for 0-based c.
pub fn xi_width(c: usize, kappa: f64) -> f64 {
    (1.0 - kappa) * kappa.powi(c as i32)
}

impl SliceVariant for SliceIndependent {
    fn name(&self) -> &'static str {
        "slice-independent"
    }

    fn kind(&self) -> SamplerVariantKind {
        SamplerVariantKind::SliceIndependent
    }

    fn draw_u(
        &self,
        _sticks: &StickState,
        alloc: &mut AllocationState,
        hp: &HyperParams,
        rng: &mut RngStream,
    ) -> Result<()> {
        let n = alloc.z.len();
        alloc.u.resize(n, 0.0);
        let mut u_star = f64::INFINITY;
        for i in 0..n {
            let width = xi_width(alloc.z[i], hp.kappa_slice);
            let u = (rng.open01() * width).max(f64::MIN_POSITIVE);
            alloc.u[i] = u;
            u_star = u_star.min(u);
        }
        alloc.u_star = u_star;
        Ok(())
    }

    fn determine_reach(
        &self,
        sticks: &mut StickState,
        z_star: usize,
        u_star: f64,
        hp: &HyperParams,
        rng: &mut RngStream,
        cap: usize,
        sweep: usize,
    ) -> Result<usize> {
        // every label whose xi exceeds u_star can receive members, so all of
        // them need instantiated sticks; the partial-sum rule is kept on top
        // so the component bound certifies the same slice property as the
        // dependent sampler
        let mut xi_needed = z_star + 1;
        while xi_width(xi_needed, hp.kappa_slice) > u_star {
            xi_needed += 1;
            if xi_needed >= cap {
                return Err(Error::StickExtensionCap { cap, sweep });
            }
        }
        sticks.truncate(z_star + 1);
        loop {
            let count = sticks.len();
            if count >= xi_needed && sticks.partial_sum(count) > 1.0 - u_star {
                return Ok(count - 1);
            }
            if count >= cap {
                return Err(Error::StickExtensionCap { cap, sweep });
            }
            let v = sample_beta(1.0, sticks.alpha, rng)?;
            sticks.push(v);
        }
    }

    fn log_slice_weight(&self, c: usize, sticks: &StickState, u_i: f64, hp: &HyperParams) -> f64 {
        let xi = xi_width(c, hp.kappa_slice);
        if xi > u_i {
            sticks.psi[c].ln() - xi.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp_for(kind: SamplerVariantKind) -> HyperParams {
        use crate::data::{Covariates, Dataset, FixedEffects, Outcome};
        let mut c = Covariates::new(
            vec!["x".into()],
            vec![crate::data::ColumnKind::Discrete { n_categories: 2 }],
            2,
        );
        c.set(0, 0, 0.0);
        c.set(1, 0, 1.0);
        let data = Dataset::new(Outcome::None, FixedEffects::new(vec![], 2), c).unwrap();
        let mut hp = HyperParams::defaults_for(&data);
        hp.variant = kind;
        hp.truncation_c = 6;
        hp
    }

    #[test]
    fn registry_resolves_all_names() {
        for name in registered_names() {
            assert_eq!(by_name(name).unwrap().name(), *name);
        }
        assert!(by_name("collapsed").is_err());
    }

    #[test]
    fn dependent_slice_keeps_u_below_psi() {
        let hp = hp_for(SamplerVariantKind::SliceDependent);
        let v = by_kind(hp.variant);
        let mut sticks = StickState::new(1.0);
        sticks.push(0.4);
        sticks.push(0.5);
        let mut alloc = AllocationState::new(50);
        for i in 0..50 {
            alloc.z[i] = i % 2;
        }
        let mut rng = RngStream::new(800);
        v.draw_u(&sticks, &mut alloc, &hp, &mut rng).unwrap();
        for i in 0..50 {
            assert!(alloc.u[i] > 0.0 && alloc.u[i] < sticks.psi[alloc.z[i]]);
        }
        assert!(alloc.u_star <= alloc.u.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn dependent_reach_satisfies_partial_sum_rule() {
        let hp = hp_for(SamplerVariantKind::SliceDependent);
        let v = by_kind(hp.variant);
        let mut sticks = StickState::new(1.0);
        sticks.push(0.3);
        let mut rng = RngStream::new(801);
        let c_star = v
            .determine_reach(&mut sticks, 0, 0.05, &hp, &mut rng, 10_000, 0)
            .unwrap();
        assert!(sticks.partial_sum(c_star + 1) > 0.95);
        assert!(c_star + 1 == sticks.len());
        // immediate stop when the condition already holds
        let mut sticks = StickState::new(1.0);
        sticks.push(0.999);
        let c_star = v
            .determine_reach(&mut sticks, 0, 0.5, &hp, &mut rng, 10_000, 0)
            .unwrap();
        assert_eq!(c_star, 0);
    }

    #[test]
    fn independent_reach_covers_xi_rule() {
        let hp = hp_for(SamplerVariantKind::SliceIndependent);
        let v = by_kind(hp.variant);
        let mut sticks = StickState::new(1.0);
        sticks.push(0.9);
        let u_star = 0.01;
        let mut rng = RngStream::new(802);
        let c_star = v
            .determine_reach(&mut sticks, 0, u_star, &hp, &mut rng, 10_000, 0)
            .unwrap();
        // every label beyond c_star must have xi <= u_star
        assert!(xi_width(c_star + 1, hp.kappa_slice) <= u_star);
        assert!(xi_width(c_star, hp.kappa_slice) > u_star);
    }

    #[test]
    fn truncated_reach_pins_last_stick() {
        let hp = hp_for(SamplerVariantKind::Truncated);
        let v = by_kind(hp.variant);
        let mut sticks = StickState::new(2.0);
        sticks.push(0.4);
        sticks.push(0.2);
        let mut rng = RngStream::new(803);
        let c_star = v
            .determine_reach(&mut sticks, 1, 1.0, &hp, &mut rng, 10_000, 0)
            .unwrap();
        assert_eq!(c_star, hp.truncation_c - 1);
        assert_eq!(sticks.len(), hp.truncation_c);
        assert_eq!(sticks.v[hp.truncation_c - 1], 1.0);
        let total: f64 = sticks.psi.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // actives are preserved
        assert_eq!(sticks.v[0], 0.4);
        assert_eq!(sticks.v[1], 0.2);
    }

    #[test]
    fn slice_weights_gate_on_u() {
        let mut sticks = StickState::new(1.0);
        sticks.push(0.5);
        sticks.push(0.5);
        let hp = hp_for(SamplerVariantKind::SliceDependent);
        let dep = by_kind(SamplerVariantKind::SliceDependent);
        assert_eq!(dep.log_slice_weight(0, &sticks, 0.4, &hp), 0.0);
        assert_eq!(
            dep.log_slice_weight(1, &sticks, 0.4, &hp),
            f64::NEG_INFINITY
        );
        let hp_i = hp_for(SamplerVariantKind::SliceIndependent);
        let ind = by_kind(SamplerVariantKind::SliceIndependent);
        // xi_0 = 0.2: u = 0.1 passes, weight ln(psi/xi)
        let w = ind.log_slice_weight(0, &sticks, 0.1, &hp_i);
        assert!((w - (0.5f64 / 0.2).ln()).abs() < 1e-12);
        assert_eq!(ind.log_slice_weight(0, &sticks, 0.3, &hp_i), f64::NEG_INFINITY);
        let hp_t = hp_for(SamplerVariantKind::Truncated);
        let tru = by_kind(SamplerVariantKind::Truncated);
        assert!((tru.log_slice_weight(1, &sticks, 0.9, &hp_t) - 0.25f64.ln()).abs() < 1e-12);
    }
}
