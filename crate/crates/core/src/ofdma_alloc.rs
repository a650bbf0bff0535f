//! OFDMA benchmark: greedy proportional-fair subcarrier assignment with one
//! user per subcarrier and per-user water-filling over the granted set.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::channel::ChannelMatrix;
use crate::noma_alloc::{AllocationState, DecodingOrder};
use crate::powalloc::{subcarrier_rates, suwf};
use crate::{Error, Result};

/// Offset inside the logarithm that keeps the PF utility finite at zero rate.
pub const PF_EPSILON: f64 = 1e-6;

/// Marginal utility gains at or below this end the assignment.
const GAIN_EPSILON: f64 = 1e-12;

/// Proportional-fair utility sum_k ln(R_k + eps).
pub fn pf_utility(rates: &[f64]) -> f64 {
    rates.iter().map(|r| (r + PF_EPSILON).ln()).sum()
}

/// Water-filled rate of one user on `subset`, no interference.
fn orthogonal_rate(gains: &Array2<f64>, k: usize, subset: &[usize], budget: f64, noise: f64) -> (Vec<f64>, f64) {
    let g: Vec<f64> = subset.iter().map(|&s| gains[[k, s]]).collect();
    let v = vec![noise; subset.len()];
    let p = suwf(&g, &v, budget).expect("validated inputs").powers;
    let r = subcarrier_rates(&p, &g, &v).iter().sum();
    (p, r)
}

/// Greedy marginal proportional-fair allocation.
///
/// Repeatedly grants the free (subcarrier, user) pair with the largest
/// increase of [`pf_utility`], re-water-filling the winner over its grants,
/// until every subcarrier is taken or no grant improves the utility. Ties go
/// to the lowest subcarrier, then the lowest user.
pub fn pf_allocate(channel: &ChannelMatrix, budgets: &[f64], noise: f64) -> Result<AllocationState> {
    pf_allocate_traced(channel, budgets, noise, |_| {})
}

/// [`pf_allocate`] reporting the utility after every grant.
pub fn pf_allocate_traced(
    channel: &ChannelMatrix,
    budgets: &[f64],
    noise: f64,
    mut on_grant: impl FnMut(f64),
) -> Result<AllocationState> {
    let gains = &channel.gains;
    let (k_users, n_sub) = gains.dim();
    if budgets.len() != k_users {
        return Err(Error::DimensionMismatch {
            what: "power budgets",
            expected: k_users,
            got: budgets.len(),
        });
    }
    if budgets.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::invalid("power budgets must be nonnegative"));
    }
    if !(noise > 0.0) {
        return Err(Error::invalid("noise power must be positive"));
    }

    let mut allocated: Vec<Vec<usize>> = vec![Vec::new(); k_users];
    let mut rates = vec![0.0; k_users];
    let mut free: BTreeSet<usize> = (0..n_sub).collect();
    // candidate[k, n]: user k's rate if n were added to its grants
    let mut candidate = Array2::<f64>::zeros((k_users, n_sub));
    let with = |held: &[usize], n: usize| -> Vec<usize> {
        let mut s = held.to_vec();
        let at = s.partition_point(|&x| x < n);
        s.insert(at, n);
        s
    };
    for k in 0..k_users {
        for n in 0..n_sub {
            candidate[[k, n]] = orthogonal_rate(gains, k, &[n], budgets[k], noise).1;
        }
    }

    while !free.is_empty() {
        let mut best: Option<(usize, usize, f64)> = None;
        for &n in &free {
            for k in 0..k_users {
                let gain = (candidate[[k, n]] + PF_EPSILON).ln() - (rates[k] + PF_EPSILON).ln();
                if best.is_none_or(|(_, _, b)| gain > b) {
                    best = Some((n, k, gain));
                }
            }
        }
        let Some((n, k, _)) = best.filter(|b| b.2 > GAIN_EPSILON) else {
            break;
        };
        free.remove(&n);
        allocated[k] = with(&allocated[k], n);
        rates[k] = candidate[[k, n]];
        for &m in &free {
            candidate[[k, m]] = orthogonal_rate(gains, k, &with(&allocated[k], m), budgets[k], noise).1;
        }
        on_grant(pf_utility(&rates));
    }

    let mut assignment = Array2::from_elem((k_users, n_sub), false);
    let mut powers = Array2::<f64>::zeros((k_users, n_sub));
    for (k, held) in allocated.iter().enumerate() {
        let (p, r) = orthogonal_rate(gains, k, held, budgets[k], noise);
        rates[k] = r;
        for (&s, p) in held.iter().zip(p) {
            assignment[[k, s]] = true;
            powers[[k, s]] = p;
        }
    }
    Ok(AllocationState {
        assignment,
        powers,
        interference: Array2::zeros((k_users, n_sub)),
        allocated: allocated.into_iter().map(|a| a.into_iter().collect()).collect(),
        available: vec![BTreeSet::new(); k_users],
        allocated_rates: rates.clone(),
        rates,
        budgets: budgets.to_vec(),
        load_limit: 1,
        order: DecodingOrder::ascending(k_users),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powalloc::user_rate;
    use ndarray::array;

    #[test]
    fn single_user_gets_its_waterfilling_support() {
        let ch = ChannelMatrix::from_gains(array![[2.0, 0.01, 1.0, 0.0]]).unwrap();
        let s = pf_allocate(&ch, &[1.0], 1.0).unwrap();
        let direct = suwf(&[2.0, 0.01, 1.0, 0.0], &[1.0; 4], 1.0).unwrap();
        let r = user_rate(&direct.powers, &[2.0, 0.01, 1.0, 0.0], &[1.0; 4]).unwrap();
        assert!((s.rates[0] - r).abs() < 1e-12);
        for (n, p) in direct.powers.iter().enumerate() {
            assert_eq!(s.assignment[[0, n]], *p > 0.0, "subcarrier {n}");
        }
    }

    #[test]
    fn orthogonal_by_construction() {
        let ch = ChannelMatrix::from_gains(array![[1.0, 0.5, 0.2], [0.3, 0.9, 0.8], [0.4, 0.4, 0.4]]).unwrap();
        let s = pf_allocate(&ch, &[1.0, 1.0, 1.0], 0.1).unwrap();
        assert!(s.max_load() <= 1);
        assert!(s.interference.iter().all(|&i| i == 0.0));
        s.check_invariants().unwrap();
    }

    #[test]
    fn pf_utility_is_monotone() {
        let ch = ChannelMatrix::from_gains(array![[1.0, 0.5, 0.2, 0.7], [0.3, 0.9, 0.8, 0.1]]).unwrap();
        let mut trace = Vec::new();
        pf_allocate_traced(&ch, &[1.0, 2.0], 0.1, |u| trace.push(u)).unwrap();
        assert_eq!(trace.len(), 4);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
