//! Label-switching moves.
//!
//! The stick-breaking prior is not exchangeable over label order, so the
//! sampler mixes over orderings with three Metropolis-Hastings moves, each
//! applied once per sweep to a uniformly chosen adjacent label pair (c, c+1),
//! all computed
//! on the posterior with the slice variables integrated out:
//!
//! 1. swap the parameter sets and memberships of the two labels, keeping the
//!    stick fractions attached to positions; the ratio reduces to
//!    (psi_{c+1}/psi_c)^(n_c - n_{c+1});
//! 2. swap parameter sets, memberships and stick fractions (pure relabeling);
//!    ratio (1 - v_{c+1})^{n_c} / (1 - v_c)^{n_{c+1}};
//! 3. swap parameter sets and memberships and redraw both stick fractions
//!    from their full conditionals under the proposed allocation, so the
//!    fractions land near their conditional expectation
//!    (1 + n_c) / (1 + alpha + n_c + n_c^+). Proposing from the exact
//!    conditional collapses the acceptance ratio to a beta-function
//!    expression independent of the drawn values.

use statrs::function::beta::ln_beta;

use crate::covariate::CovKernels;
use crate::dist::sample_beta;
use crate::error::Result;
use crate::response::ResponseKernels;
use crate::rng::RngStream;
use crate::state::{AllocationState, ClusterParams, StickState};

#[derive(Clone, Debug, Default)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    pub fn rates(&self) -> [f64; 3] {
        let mut r = [0.0; 3];
        for k in 0..3 {
            if self.proposed[k] > 0 {
                r[k] = self.accepted[k] as f64 / self.proposed[k] as f64;
            }
        }
        r
    }
}

pub struct MoveArgs<'a> {
    pub sticks: &'a mut StickState,
    pub alloc: &'a mut AllocationState,
    pub clusters: &'a mut Vec<ClusterParams>,
    pub resp_kernels: &'a mut ResponseKernels,
    pub cov_kernels: &'a mut CovKernels,
}

/// Acceptance log-ratio of move 1 for the pair (c, c+1).
pub fn move1_log_ratio(sticks: &StickState, counts: &[usize], c: usize) -> f64 {
    let (n_lo, n_hi) = (counts[c] as f64, counts[c + 1] as f64);
    let (v_lo, v_hi) = (sticks.v[c], sticks.v[c + 1]);
    (n_lo - n_hi) * (v_hi.ln() + (-v_lo).ln_1p() - v_lo.ln())
}

/// Acceptance log-ratio of move 2 for the pair (c, c+1).
pub fn move2_log_ratio(sticks: &StickState, counts: &[usize], c: usize) -> f64 {
    let (n_lo, n_hi) = (counts[c] as f64, counts[c + 1] as f64);
    let (v_lo, v_hi) = (sticks.v[c], sticks.v[c + 1]);
    n_lo * (-v_hi).ln_1p() - n_hi * (-v_lo).ln_1p()
}

/// Acceptance log-ratio of move 3 for the pair (c, c+1); `tail` is the
/// number of individuals allocated strictly above c+1.
pub fn move3_log_ratio(alpha: f64, counts: &[usize], tail: usize, c: usize) -> f64 {
    let (n_lo, n_hi) = (counts[c] as f64, counts[c + 1] as f64);
    let r = tail as f64;
    ln_beta(1.0 + n_hi, alpha + n_lo + r) + ln_beta(1.0 + n_lo, alpha + r)
        - ln_beta(1.0 + n_lo, alpha + n_hi + r)
        - ln_beta(1.0 + n_hi, alpha + r)
}

/// Apply the three moves in sequence, each to its own uniformly chosen
/// adjacent pair. Requires at least two instantiated labels; otherwise a
/// no-op.
pub fn apply_label_switch_moves(
    args: &mut MoveArgs,
    stats: &mut MoveStats,
    rng: &mut RngStream,
) -> Result<()> {
    let n_labels = args.sticks.len().min(args.clusters.len());
    if n_labels < 2 {
        return Ok(());
    }
    for move_idx in 0..3 {
        let c = pick_pair(n_labels, rng);
        stats.proposed[move_idx] += 1;
        let ln_r = match move_idx {
            0 => move1_log_ratio(args.sticks, &args.alloc.counts, c),
            1 => move2_log_ratio(args.sticks, &args.alloc.counts, c),
            _ => move3_log_ratio(
                args.sticks.alpha,
                &args.alloc.counts,
                args.alloc.counts_above[c + 1],
                c,
            ),
        };
        if rng.open01().ln() >= ln_r {
            continue;
        }
        stats.accepted[move_idx] += 1;
        swap_labels(args, c);
        match move_idx {
            0 => {}
            1 => {
                args.sticks.v.swap(c, c + 1);
                args.sticks.recompute_psi();
            }
            _ => {
                let alpha = args.sticks.alpha;
                let counts = &args.alloc.counts;
                let above = &args.alloc.counts_above;
                let v_lo = sample_beta(
                    1.0 + counts[c] as f64,
                    alpha + above[c] as f64,
                    rng,
                )?;
                let v_hi = sample_beta(
                    1.0 + counts[c + 1] as f64,
                    alpha + above[c + 1] as f64,
                    rng,
                )?;
                args.sticks.v[c] = v_lo;
                args.sticks.v[c + 1] = v_hi;
                args.sticks.recompute_psi();
            }
        }
    }
    Ok(())
}

fn pick_pair(n_labels: usize, rng: &mut RngStream) -> usize {
    let pairs = n_labels - 1;
    ((rng.open01() * pairs as f64) as usize).min(pairs - 1)
}

/// Swap parameter sets and memberships of labels c and c+1 (stick fractions
/// stay attached to their positions).
fn swap_labels(args: &mut MoveArgs, c: usize) {
    args.clusters.swap(c, c + 1);
    args.resp_kernels.swap_labels(c, c + 1);
    if args.cov_kernels.phi.len() > c + 1 {
        args.cov_kernels.phi.swap(c, c + 1);
    }
    for zi in args.alloc.z.iter_mut() {
        if *zi == c {
            *zi = c + 1;
        } else if *zi == c + 1 {
            *zi = c;
        }
    }
    args.alloc.counts.swap(c, c + 1);
    // counts_above[c] changes, all other tail counts are invariant
    args.alloc.counts_above[c] =
        args.alloc.counts_above[c + 1] + args.alloc.counts[c + 1];
    args.alloc.z_star = *args.alloc.z.iter().max().unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sticks_of(v: &[f64], alpha: f64) -> StickState {
        let mut s = StickState::new(alpha);
        for &vi in v {
            s.push(vi);
        }
        s
    }

    #[test]
    fn symmetric_swap_has_unit_acceptance() {
        // identical stick fractions and counts: every move accepts
        let sticks = sticks_of(&[0.3, 0.3], 1.0);
        let counts = vec![5usize, 5];
        assert!(move1_log_ratio(&sticks, &counts, 0).abs() < 1e-12);
        assert!(move2_log_ratio(&sticks, &counts, 0).abs() < 1e-12);
        assert!(move3_log_ratio(1.0, &counts, 0, 0).abs() < 1e-12);
    }

    #[test]
    fn move1_prefers_big_cluster_on_big_stick() {
        // n_c > n_{c+1} with v_{c+1} > v_c: swapping moves the bigger
        // cluster onto the bigger stick, ratio > 1
        let sticks = sticks_of(&[0.2, 0.6], 1.0);
        let counts = vec![8usize, 2];
        assert!(move1_log_ratio(&sticks, &counts, 0) > 0.0);
        // and the reverse proposal is exactly the inverse
        let counts_rev = vec![2usize, 8];
        let fwd = move1_log_ratio(&sticks, &counts, 0);
        let rev = move1_log_ratio(&sticks, &counts_rev, 0);
        assert!((fwd + rev).abs() < 1e-12);
    }

    #[test]
    fn accepted_swap_relabels_consistently() {
        let mut sticks = sticks_of(&[0.9, 0.05], 1.0);
        let mut alloc = AllocationState::new(6);
        alloc.z = vec![0, 0, 0, 0, 1, 1];
        alloc.refresh_counts(2);
        let mut clusters = vec![
            ClusterParams {
                theta: vec![1.0],
                ..Default::default()
            },
            ClusterParams {
                theta: vec![2.0],
                ..Default::default()
            },
        ];
        let mut resp_k = ResponseKernels::new(0, 0);
        resp_k.ensure_labels(2, 1);
        let mut cov_k = CovKernels::new();
        let mut args = MoveArgs {
            sticks: &mut sticks,
            alloc: &mut alloc,
            clusters: &mut clusters,
            resp_kernels: &mut resp_k,
            cov_kernels: &mut cov_k,
        };
        let members_before: Vec<Vec<usize>> = args.alloc.members(2);
        swap_labels(&mut args, 0);
        let members_after: Vec<Vec<usize>> = args.alloc.members(2);
        // memberships as sets are unchanged, only the labels moved
        assert_eq!(members_before[0], members_after[1]);
        assert_eq!(members_before[1], members_after[0]);
        assert_eq!(clusters[1].theta, vec![1.0]);
        assert_eq!(clusters[0].theta, vec![2.0]);
        assert_eq!(alloc.counts, vec![2, 4]);
        assert_eq!(alloc.counts_above, vec![4, 0]);
    }

    #[test]
    fn moves_preserve_membership_sets() {
        let mut rng = RngStream::new(900);
        let mut sticks = sticks_of(&[0.4, 0.3, 0.2], 1.5);
        let mut alloc = AllocationState::new(9);
        alloc.z = vec![0, 0, 1, 1, 1, 2, 2, 0, 1];
        alloc.refresh_counts(3);
        let mut clusters = vec![
            ClusterParams {
                theta: vec![10.0],
                ..Default::default()
            },
            ClusterParams {
                theta: vec![20.0],
                ..Default::default()
            },
            ClusterParams {
                theta: vec![30.0],
                ..Default::default()
            },
        ];
        let mut resp_k = ResponseKernels::new(0, 0);
        resp_k.ensure_labels(3, 1);
        let mut cov_k = CovKernels::new();
        // which individuals share a cluster must be invariant
        let co = |z: &[usize]| {
            let mut pairs = Vec::new();
            for i in 0..z.len() {
                for j in (i + 1)..z.len() {
                    pairs.push(z[i] == z[j]);
                }
            }
            pairs
        };
        let co_before = co(&alloc.z);
        let theta_of_individual = |z: &[usize], clusters: &[ClusterParams]| -> Vec<f64> {
            z.iter().map(|&zi| clusters[zi].theta[0]).collect()
        };
        let assigned_before = theta_of_individual(&alloc.z, &clusters);
        let mut stats = MoveStats::default();
        for _ in 0..200 {
            let mut args = MoveArgs {
                sticks: &mut sticks,
                alloc: &mut alloc,
                clusters: &mut clusters,
                resp_kernels: &mut resp_k,
                cov_kernels: &mut cov_k,
            };
            apply_label_switch_moves(&mut args, &mut stats, &mut rng).unwrap();
            // counts stay consistent with z
            let (want_counts, want_above) = crate::state::refresh_counts(&alloc.z, 3);
            assert_eq!(alloc.counts, want_counts);
            assert_eq!(alloc.counts_above, want_above);
        }
        assert_eq!(co(&alloc.z), co_before);
        assert_eq!(theta_of_individual(&alloc.z, &clusters), assigned_before);
        assert!(stats.proposed.iter().all(|&p| p == 200));
    }
}
