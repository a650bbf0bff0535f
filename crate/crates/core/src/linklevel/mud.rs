//! Superposition of users on shared subcarriers and exhaustive
//! maximum-likelihood multi-user detection.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::{Error, Result};

/// Which users occupy each subcarrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    occupants: Vec<Vec<usize>>,
    users: usize,
}

impl SubcarrierMap {
    pub fn new(occupants: Vec<Vec<usize>>, users: usize, load_limit: usize) -> Result<Self> {
        for (n, occ) in occupants.iter().enumerate() {
            if occ.len() > load_limit {
                return Err(Error::invalid(format!(
                    "subcarrier {n} has {} occupants, limit {load_limit}",
                    occ.len()
                )));
            }
            if occ.iter().any(|&u| u >= users) {
                return Err(Error::invalid(format!("subcarrier {n} names an unknown user")));
            }
            let mut sorted = occ.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != occ.len() {
                return Err(Error::invalid(format!("subcarrier {n} lists a user twice")));
            }
        }
        Ok(Self { occupants, users })
    }

    /// Every one of `users` users on each of `n` subcarriers.
    pub fn fully_loaded(users: usize, n: usize) -> Self {
        Self {
            occupants: vec![(0..users).collect(); n],
            users,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.occupants.len()
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn occupants(&self, n: usize) -> &[usize] {
        &self.occupants[n]
    }

    /// M_k: how many subcarriers user `k` occupies.
    pub fn symbols_for(&self, k: usize) -> usize {
        self.occupants.iter().filter(|o| o.contains(&k)).count()
    }
}

/// y_n = sum over occupants of a_{k,n} g_{k,n} + z_n, z circular Gaussian of
/// total variance `noise_variance`.
///
/// `symbols[k]` lists user k's symbols for its occupied subcarriers in
/// ascending subcarrier order.
pub fn superimpose<R: Rng + ?Sized>(
    map: &SubcarrierMap,
    symbols: &[Vec<Complex64>],
    coeffs: &Array2<Complex64>,
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if symbols.len() != map.users() {
        return Err(Error::DimensionMismatch {
            what: "symbol vectors",
            expected: map.users(),
            got: symbols.len(),
        });
    }
    for (k, s) in symbols.iter().enumerate() {
        let m = map.symbols_for(k);
        if s.len() != m {
            return Err(Error::DimensionMismatch {
                what: "symbols for a user",
                expected: m,
                got: s.len(),
            });
        }
    }
    if coeffs.dim() != (map.users(), map.subcarriers()) {
        return Err(Error::DimensionMismatch {
            what: "coefficient matrix rows",
            expected: map.users(),
            got: coeffs.nrows(),
        });
    }
    let mut cursor = vec![0usize; map.users()];
    let mut y = Vec::with_capacity(map.subcarriers());
    for n in 0..map.subcarriers() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &k in map.occupants(n) {
            acc += symbols[k][cursor[k]] * coeffs[[k, n]];
            cursor[k] += 1;
        }
        if noise_variance > 0.0 {
            acc += complex_gaussian(rng, noise_variance);
        }
        y.push(acc);
    }
    Ok(y)
}

/// Constellation indices of the candidate minimizing |y - sum_l a_l g_l|².
///
/// Candidates are enumerated lexicographically with the first user as the
/// most significant digit; the first minimizer wins ties.
pub fn ml_mud_indices(y: Complex64, coeffs: &[Complex64], constellation: &[Complex64]) -> Vec<usize> {
    let l = coeffs.len();
    let q = constellation.len();
    let mut digits = vec![0usize; l];
    let mut best = digits.clone();
    let mut best_metric = f64::INFINITY;
    let total = q.checked_pow(l as u32).expect("candidate count overflows");
    for _ in 0..total {
        let s: Complex64 = digits.iter().zip(coeffs).map(|(&d, g)| constellation[d] * g).sum();
        let metric = (y - s).norm_sqr();
        if metric < best_metric {
            best_metric = metric;
            best.copy_from_slice(&digits);
        }
        // increment, last user least significant
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    best
}

/// Detected symbols for one subcarrier.
pub fn ml_mud(y: Complex64, coeffs: &[Complex64], constellation: &[Complex64]) -> Vec<Complex64> {
    ml_mud_indices(y, coeffs, constellation)
        .into_iter()
        .map(|i| constellation[i])
        .collect()
}
