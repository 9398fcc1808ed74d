//! Generic adaptive random-walk Metropolis kernel.
//!
//! Step sizes adapt by Robbins-Monro on the log scale,
//! `log_step += (1/ceil(t/50)^0.75) * (accepted - target_rate)`,
//! and are frozen after burn-in so the stationary distribution of the chain
//! is exact.

use crate::rng::RngStream;

pub const SCALAR_TARGET_RATE: f64 = 0.44;
pub const VECTOR_TARGET_RATE: f64 = 0.234;

#[derive(Clone, Debug)]
pub struct AdaptiveKernel {
    pub log_step: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub target_rate: f64,
    pub adapting: bool,
}

impl AdaptiveKernel {
    pub fn new(initial_step: f64, target_rate: f64) -> Self {
        assert!(initial_step > 0.0 && target_rate > 0.0 && target_rate < 1.0);
        AdaptiveKernel {
            log_step: initial_step.ln(),
            accepted: 0,
            proposed: 0,
            target_rate,
            adapting: true,
        }
    }

    /// Kernel for a scalar update with the 0.44 target rate.
    pub fn scalar(initial_step: f64) -> Self {
        Self::new(initial_step, SCALAR_TARGET_RATE)
    }

    /// Kernel for a joint vector update with the 0.234 target rate.
    pub fn vector(initial_step: f64) -> Self {
        Self::new(initial_step, VECTOR_TARGET_RATE)
    }

    pub fn step_size(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.adapting {
            let t = self.proposed as f64;
            let gain = (t / 50.0).ceil().powf(0.75).recip();
            let indicator = if accepted { 1.0 } else { 0.0 };
            self.log_step += gain * (indicator - self.target_rate);
            self.log_step = self.log_step.clamp(-20.0, 20.0);
        }
    }
}

/// One Metropolis step with a symmetric Gaussian proposal. A NaN from the
/// target is treated as -inf so it can never enter the chain.
pub fn rwm_step<F: Fn(f64) -> f64>(
    log_target: F,
    current: f64,
    kernel: &mut AdaptiveKernel,
    rng: &mut RngStream,
) -> (f64, bool) {
    let lp_current = guard(log_target(current));
    let proposal = current + kernel.step_size() * crate::dist::sample_std_normal(rng);
    let lp_proposal = guard(log_target(proposal));
    let accept = lp_proposal > f64::NEG_INFINITY
        && rng.open01().ln() < lp_proposal - lp_current;
    kernel.record(accept);
    if accept {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Joint random-walk step over a small vector, one shared step size.
pub fn rwm_step_vec<F: Fn(&[f64]) -> f64>(
    log_target: F,
    current: &[f64],
    kernel: &mut AdaptiveKernel,
    rng: &mut RngStream,
) -> (Vec<f64>, bool) {
    let lp_current = guard(log_target(current));
    let step = kernel.step_size();
    let proposal: Vec<f64> = current
        .iter()
        .map(|x| x + step * crate::dist::sample_std_normal(rng))
        .collect();
    let lp_proposal = guard(log_target(&proposal));
    let accept = lp_proposal > f64::NEG_INFINITY
        && rng.open01().ln() < lp_proposal - lp_current;
    kernel.record(accept);
    if accept {
        (proposal, true)
    } else {
        (current.to_vec(), false)
    }
}

fn guard(lp: f64) -> f64 {
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}
