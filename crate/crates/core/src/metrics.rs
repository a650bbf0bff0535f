//! Spectral efficiency and fairness.

use std::fmt;
use std::str::FromStr;

use crate::channel::ChannelMatrix;
use crate::noma_alloc::{successive_rates, AllocationState};
use crate::{Error, Result};

/// Jain's fairness index (sum R)² / (K sum R²).
pub fn jain_index(rates: &[f64]) -> Result<f64> {
    if rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::invalid("rates must be nonnegative"));
    }
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if !(sum_sq > 0.0) {
        return Err(Error::UndefinedFairness);
    }
    Ok((sum * sum / (rates.len() as f64 * sum_sq)).min(1.0))
}

/// Per-user rates of `state` recomputed from its assignment and powers under
/// successive decoding, optionally divided by the number of subcarriers.
pub fn per_user_rates(state: &AllocationState, channel: &ChannelMatrix, noise: f64, per_hz: bool) -> Vec<f64> {
    let rates = successive_rates(&state.assignment, &state.powers, &channel.gains, noise, &state.order);
    let scale = if per_hz { state.subcarriers().max(1) as f64 } else { 1.0 };
    rates.into_iter().map(|r| r / scale).collect()
}

/// Sum rate in bit/s/Hz; with `per_hz` it is averaged over subcarriers.
pub fn sum_spectral_efficiency(state: &AllocationState, channel: &ChannelMatrix, noise: f64, per_hz: bool) -> f64 {
    per_user_rates(state, channel, noise, per_hz).iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    NomaLrm,
    NomaGom,
    OfdmaPf,
    MacIwf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::NomaLrm, Scheme::NomaGom, Scheme::OfdmaPf, Scheme::MacIwf];

    /// Column value used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::NomaLrm => "NOMA_LRM",
            Scheme::NomaGom => "NOMA_GOM",
            Scheme::OfdmaPf => "OFDMA_PF",
            Scheme::MacIwf => "MAC_IWF",
        }
    }

    /// Name accepted on the command line and in config files.
    pub fn cli_name(self) -> &'static str {
        match self {
            Scheme::NomaLrm => "noma-lrm",
            Scheme::NomaGom => "noma-gom",
            Scheme::OfdmaPf => "ofdma-pf",
            Scheme::MacIwf => "mac-iwf",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.cli_name().eq_ignore_ascii_case(s) || sc.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Outcome of one scheme on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub scheme: Scheme,
    pub drop_id: u64,
    pub users: usize,
    pub subcarriers: usize,
    pub load_limit: usize,
    /// Sum of `per_user_rates`, bit/s/Hz.
    pub sum_se: f64,
    /// `None` when every user has zero rate.
    pub jain: Option<f64>,
    pub per_user_rates: Vec<f64>,
}

impl MetricRecord {
    pub fn new(scheme: Scheme, drop_id: u64, load_limit: usize, per_user_rates: Vec<f64>, subcarriers: usize) -> Self {
        Self {
            scheme,
            drop_id,
            users: per_user_rates.len(),
            subcarriers,
            load_limit,
            sum_se: per_user_rates.iter().sum(),
            jain: jain_index(&per_user_rates).ok(),
            per_user_rates,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma_alloc::{compute_interference, rates_with_interference, DecodingOrder};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn state_from(assignment: Array2<bool>, powers: Array2<f64>) -> AllocationState {
        let k = assignment.nrows();
        AllocationState {
            interference: Array2::zeros(assignment.dim()),
            allocated: vec![Default::default(); k],
            available: vec![Default::default(); k],
            rates: vec![0.0; k],
            allocated_rates: vec![0.0; k],
            budgets: vec![f64::INFINITY; k],
            load_limit: k,
            order: DecodingOrder::ascending(k),
            assignment,
            powers,
        }
    }

    #[test]
    fn jain_values() {
        assert_eq!(jain_index(&[2.5; 7]).unwrap(), 1.0);
        assert_eq!(jain_index(&[0.0, 3.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!((jain_index(&[1.0, 3.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(jain_index(&[0.0, 0.0]), Err(Error::UndefinedFairness)));
        assert!(jain_index(&[]).is_err());
    }

    proptest! {
        #[test]
        fn jain_bounds_and_scale(rates in prop::collection::vec(0.0f64..100.0, 1..40), c in 1e-3f64..1e3) {
            prop_assume!(rates.iter().any(|&r| r > 0.0));
            let k = rates.len() as f64;
            let j = jain_index(&rates).unwrap();
            prop_assert!(j >= 1.0 / k - 1e-12 && j <= 1.0);
            let scaled: Vec<f64> = rates.iter().map(|r| r * c).collect();
            prop_assert!((jain_index(&scaled).unwrap() - j).abs() <= 1e-12);
        }

        #[test]
        fn successive_decoding_telescopes(
            rx in prop::collection::vec(0.0f64..50.0, 1..6),
            noise in 0.01f64..10.0,
        ) {
            let k = rx.len();
            let gains = Array2::from_shape_fn((k, 1), |(u, _)| rx[u]);
            let powers = Array2::from_elem((k, 1), 1.0);
            let x = Array2::from_elem((k, 1), true);
            let i = compute_interference(&x, &powers, &gains, &DecodingOrder::ascending(k));
            let sum: f64 = rates_with_interference(&powers, &gains, &i, noise).iter().sum();
            let total: f64 = rx.iter().sum();
            prop_assert!((sum - (1.0 + total / noise).log2()).abs() <= 1e-9);
        }
    }

    #[test]
    fn spectral_efficiency_examples() {
        let ch = ChannelMatrix::from_gains(array![[1.0, 1.0]]).unwrap();
        let zero = state_from(array![[false, false]], Array2::zeros((1, 2)));
        assert_eq!(sum_spectral_efficiency(&zero, &ch, 1.0, false), 0.0);

        let ch = ChannelMatrix::from_gains(array![[1.0]]).unwrap();
        let one = state_from(array![[true]], array![[1.0]]);
        assert_eq!(sum_spectral_efficiency(&one, &ch, 1.0, false), 1.0);

        let ch = ChannelMatrix::from_gains(array![[1.0], [1.0]]).unwrap();
        let shared = state_from(array![[true], [true]], array![[1.0], [1.0]]);
        let r = per_user_rates(&shared, &ch, 1.0, false);
        assert!((r[1] - 1.0).abs() < 1e-15);
        assert!((r[0] - 1.5f64.log2()).abs() < 1e-15);
        assert!((r[0] - 0.585).abs() < 1e-3);
        assert!((r.iter().sum::<f64>() - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn per_hz_normalization() {
        let ch = ChannelMatrix::from_gains(array![[1.0, 3.0]]).unwrap();
        let s = state_from(array![[true, true]], array![[1.0, 1.0]]);
        let total = sum_spectral_efficiency(&s, &ch, 1.0, false);
        assert!((total - 3.0).abs() < 1e-12);
        assert!((sum_spectral_efficiency(&s, &ch, 1.0, true) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.cli_name().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
        assert!("tdma".parse::<Scheme>().is_err());
    }
}
