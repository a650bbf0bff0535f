//! Water-filling primitives.
//!
//! [`suwf`] spreads one user's budget over parallel subcarriers against fixed
//! noise plus interference; [`iterative_waterfilling`] repeats it user by user
//! to reach the sum-rate optimum of the multiple access channel with no limit
//! on users per subcarrier.

use ndarray::Array2;

use crate::channel::ChannelMatrix;
use crate::noma_alloc::AllocationState;
use crate::{Error, Result};

/// Per-subcarrier powers of one user together with the budget they respect.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    pub powers: Vec<f64>,
    pub budget: f64,
}

impl PowerVector {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Single-user water-filling.
///
/// Returns `p_n = max(0, mu - npi_n / gains_n)` with the water level `mu`
/// solved exactly over the active set, so that the powers sum to `budget`.
/// Subcarriers with zero gain get nothing.
pub fn suwf(gains: &[f64], npi: &[f64], budget: f64) -> Result<PowerVector> {
    if gains.len() != npi.len() {
        return Err(Error::DimensionMismatch {
            what: "noise-plus-interference length",
            expected: gains.len(),
            got: npi.len(),
        });
    }
    if !(budget >= 0.0) {
        return Err(Error::invalid(format!("negative power budget {budget}")));
    }
    let mut powers = vec![0.0; gains.len()];
    if budget == 0.0 {
        return Ok(PowerVector { powers, budget });
    }
    if npi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("noise plus interference must be positive"));
    }

    // inverse channel quality, ascending; ties resolved by index
    let mut levels: Vec<(f64, usize)> = gains
        .iter()
        .zip(npi)
        .enumerate()
        .filter(|(_, (&g, _))| g > 0.0)
        .map(|(n, (&g, &v))| (v / g, n))
        .collect();
    if levels.is_empty() {
        return Ok(PowerVector { powers, budget });
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut cumulative = 0.0;
    let mut mu = 0.0;
    let mut active = 0;
    for (m, &(inv, _)) in levels.iter().enumerate() {
        let candidate = (budget + cumulative + inv) / (m + 1) as f64;
        if candidate <= inv {
            break;
        }
        cumulative += inv;
        mu = candidate;
        active = m + 1;
    }
    for &(inv, n) in &levels[..active] {
        powers[n] = (mu - inv).max(0.0);
    }
    Ok(PowerVector { powers, budget })
}

/// log2(1 + p h / npi) per subcarrier.
pub fn subcarrier_rates(powers: &[f64], gains: &[f64], npi: &[f64]) -> Vec<f64> {
    powers
        .iter()
        .zip(gains)
        .zip(npi)
        .map(|((p, g), v)| (p * g / v).ln_1p() / std::f64::consts::LN_2)
        .collect()
}

/// Shannon rate of one user summed over subcarriers, in bit/s/Hz.
pub fn user_rate(powers: &[f64], gains: &[f64], npi: &[f64]) -> Result<f64> {
    if powers.len() != gains.len() || gains.len() != npi.len() {
        return Err(Error::DimensionMismatch {
            what: "rate inputs",
            expected: powers.len(),
            got: gains.len().min(npi.len()),
        });
    }
    Ok(subcarrier_rates(powers, gains, npi).into_iter().sum())
}

/// MAC sum-rate sum_n log2(1 + sum_k p h / noise).
pub fn mac_sum_rate(powers: &Array2<f64>, gains: &Array2<f64>, noise: f64) -> f64 {
    (0..gains.ncols())
        .map(|n| {
            let rx: f64 = powers.column(n).iter().zip(gains.column(n)).map(|(p, h)| p * h).sum();
            (rx / noise).ln_1p() / std::f64::consts::LN_2
        })
        .sum()
}

/// Stopping rule for [`iterative_waterfilling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwfSettings {
    /// Relative sum-rate change between rounds below which to stop.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IwfSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IwfOutcome {
    pub state: AllocationState,
    pub sum_rate: f64,
    /// Sum-rate after each completed round.
    pub history: Vec<f64>,
    /// False when `max_iters` was reached first.
    pub converged: bool,
}

/// Gauss-Seidel iterative water-filling for the generic multiple access
/// channel. Each round updates users in ascending index order, every user
/// water-filling against noise plus all other users' received power.
pub fn iterative_waterfilling(
    channel: &ChannelMatrix,
    budgets: &[f64],
    noise: f64,
    settings: IwfSettings,
) -> Result<IwfOutcome> {
    let (k, n) = channel.gains.dim();
    if budgets.len() != k {
        return Err(Error::DimensionMismatch {
            what: "power budgets",
            expected: k,
            got: budgets.len(),
        });
    }
    if !(settings.tol > 0.0) || settings.max_iters == 0 {
        return Err(Error::invalid("iwf needs tol > 0 and max_iters >= 1"));
    }
    if !(noise > 0.0) {
        return Err(Error::invalid("noise power must be positive"));
    }
    let gains = &channel.gains;
    let mut powers = Array2::<f64>::zeros((k, n));
    let mut history = Vec::new();
    let mut previous = 0.0;
    let mut converged = false;
    let mut npi = vec![0.0; n];

    for _ in 0..settings.max_iters {
        for (user, &budget) in budgets.iter().enumerate() {
            for (sub, v) in npi.iter_mut().enumerate() {
                *v = noise
                    + (0..k)
                        .filter(|&j| j != user)
                        .map(|j| powers[[j, sub]] * gains[[j, sub]])
                        .sum::<f64>();
            }
            let row = gains.row(user).to_vec();
            let pv = suwf(&row, &npi, budget)?;
            powers.row_mut(user).assign(&ndarray::ArrayView1::from(&pv.powers));
        }
        let sum_rate = mac_sum_rate(&powers, gains, noise);
        history.push(sum_rate);
        let change = (sum_rate - previous).abs() / sum_rate.abs().max(f64::MIN_POSITIVE);
        previous = sum_rate;
        if change < settings.tol {
            converged = true;
            break;
        }
    }

    let state = AllocationState::from_dense_powers(channel, powers, budgets, noise)?;
    Ok(IwfOutcome {
        sum_rate: previous,
        state,
        history,
        converged,
    })
}
