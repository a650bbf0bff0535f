//! Joint subcarrier and power allocation with at most `L` users per
//! subcarrier.
//!
//! The allocator grants one (user, subcarrier) pair per iteration:
//!
//! 1. every user water-fills its budget over the subcarriers it already holds
//!    plus those still open to it, against the interference it currently
//!    sees under successive decoding;
//! 2. each user nominates its best open subcarrier by per-subcarrier rate;
//! 3. one nominee wins, either by the largest nominated rate (LRM) or by the
//!    largest gain of its water-filled rate over the rate on what it already
//!    holds (GOM);
//! 4. the winner is granted the subcarrier; a subcarrier carrying `L` users is
//!    closed to everyone, and interference is recomputed.
//!
//! The loop stops once no open subcarrier carries a positive rate for anyone.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::channel::ChannelMatrix;
use crate::powalloc::{subcarrier_rates, suwf};
use crate::{Error, Result};

/// Nominated rates at or below this are treated as zero when testing for
/// termination.
pub const RATE_EPSILON: f64 = 1e-12;

/// Rounds of the closing per-user water-filling pass.
pub const FINAL_ROUNDS: usize = 5;

/// Complete allocation of a drop: assignment, powers, interference and the
/// bookkeeping sets the allocator maintains.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    /// x[k, n]: user k transmits on subcarrier n.
    pub assignment: Array2<bool>,
    /// p[k, n] in the same linear unit as the budgets.
    pub powers: Array2<f64>,
    /// I[k, n] seen by user k under the decoding order.
    pub interference: Array2<f64>,
    /// Subcarriers granted to each user.
    pub allocated: Vec<BTreeSet<usize>>,
    /// Subcarriers still open to each user.
    pub available: Vec<BTreeSet<usize>>,
    /// R_k over the granted subcarriers.
    pub rates: Vec<f64>,
    /// R_k^a as last evaluated.
    pub allocated_rates: Vec<f64>,
    pub budgets: Vec<f64>,
    pub load_limit: usize,
    pub order: DecodingOrder,
}

impl AllocationState {
    pub fn users(&self) -> usize {
        self.assignment.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.assignment.ncols()
    }

    /// |S_n|.
    pub fn column_load(&self, n: usize) -> usize {
        self.assignment.column(n).iter().filter(|&&x| x).count()
    }

    pub fn max_load(&self) -> usize {
        (0..self.subcarriers()).map(|n| self.column_load(n)).max().unwrap_or(0)
    }

    pub fn assignments(&self) -> usize {
        self.assignment.iter().filter(|&&x| x).count()
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Dense state from a power matrix with no loading limit: every user is
    /// assigned wherever it transmits.
    pub fn from_dense_powers(
        channel: &ChannelMatrix,
        powers: Array2<f64>,
        budgets: &[f64],
        noise: f64,
    ) -> Result<Self> {
        let (k, n) = powers.dim();
        if channel.gains.dim() != (k, n) {
            return Err(Error::DimensionMismatch {
                what: "power matrix rows",
                expected: channel.users(),
                got: k,
            });
        }
        let assignment = powers.mapv(|p| p > 0.0);
        let allocated = (0..k)
            .map(|u| (0..n).filter(|&s| assignment[[u, s]]).collect())
            .collect();
        let order = DecodingOrder::ascending(k);
        let interference = compute_interference(&assignment, &powers, &channel.gains, &order);
        let rates = rates_with_interference(&powers, &channel.gains, &interference, noise);
        Ok(Self {
            assignment,
            powers,
            interference,
            allocated,
            available: vec![BTreeSet::new(); k],
            allocated_rates: rates.clone(),
            rates,
            budgets: budgets.to_vec(),
            load_limit: k.max(1),
            order,
        })
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let (k, n) = self.assignment.dim();
        if self.powers.dim() != (k, n) || self.interference.dim() != (k, n) {
            return Err("matrix dimensions disagree".into());
        }
        for s in 0..n {
            let load = self.column_load(s);
            if load > self.load_limit {
                return Err(format!("subcarrier {s} carries {load} > {} users", self.load_limit));
            }
            if load >= self.load_limit && self.available.iter().any(|a| a.contains(&s)) {
                return Err(format!("full subcarrier {s} still open"));
            }
        }
        for u in 0..k {
            let row = self.powers.row(u);
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(format!("user {u} has a negative or NaN power"));
            }
            let total: f64 = row.sum();
            if total > self.budgets[u] * (1.0 + 1e-9) {
                return Err(format!("user {u} spends {total} > budget {}", self.budgets[u]));
            }
            for s in 0..n {
                if row[s] > 0.0 && !self.assignment[[u, s]] {
                    return Err(format!("user {u} has power on unassigned subcarrier {s}"));
                }
                if self.assignment[[u, s]] != self.allocated[u].contains(&s) {
                    return Err(format!("allocated set of user {u} disagrees with x at {s}"));
                }
            }
            if !self.allocated[u].is_disjoint(&self.available[u]) {
                return Err(format!("user {u} has overlapping allocated/available sets"));
            }
        }
        Ok(())
    }
}

/// Successive-decoding order; `order[i]` is the i-th user decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder {
    order: Vec<usize>,
}

impl DecodingOrder {
    pub fn ascending(k: usize) -> Self {
        Self {
            order: (0..k).collect(),
        }
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &u in &order {
            if u >= order.len() || std::mem::replace(&mut seen[u], true) {
                return Err(Error::invalid(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Self { order })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// I[k, n] = sum over users decoded after k of x p h on subcarrier n.
pub fn compute_interference(
    assignment: &Array2<bool>,
    powers: &Array2<f64>,
    gains: &Array2<f64>,
    order: &DecodingOrder,
) -> Array2<f64> {
    let (k, n) = gains.dim();
    let mut interference = Array2::zeros((k, n));
    for s in 0..n {
        let mut later = 0.0;
        for &u in order.as_slice().iter().rev() {
            interference[[u, s]] = later;
            if assignment[[u, s]] {
                later += powers[[u, s]] * gains[[u, s]];
            }
        }
    }
    interference
}

/// Per-user rates sum_n log2(1 + p h / (I + noise)) given precomputed interference.
pub fn rates_with_interference(
    powers: &Array2<f64>,
    gains: &Array2<f64>,
    interference: &Array2<f64>,
    noise: f64,
) -> Vec<f64> {
    powers
        .rows()
        .into_iter()
        .zip(gains.rows())
        .zip(interference.rows())
        .map(|((p, h), i)| {
            p.iter()
                .zip(h)
                .zip(i)
                .map(|((p, h), i)| (p * h / (noise + i)).ln_1p())
                .sum::<f64>()
                / std::f64::consts::LN_2
        })
        .collect()
}

/// Per-user rates of an assignment under successive decoding in `order`.
pub fn successive_rates(
    assignment: &Array2<bool>,
    powers: &Array2<f64>,
    gains: &Array2<f64>,
    noise: f64,
    order: &DecodingOrder,
) -> Vec<f64> {
    let masked = Array2::from_shape_fn(powers.dim(), |ix| if assignment[ix] { powers[ix] } else { 0.0 });
    let interference = compute_interference(assignment, &masked, gains, order);
    rates_with_interference(&masked, gains, &interference, noise)
}

/// How a user's allocation is scored in a grant decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    /// Local rate maximization: largest rate on the nominated subcarrier.
    #[default]
    Lrm,
    /// Global objective maximization: largest R_k - R_k^a.
    Gom,
}

/// Which R_k enters the GOM marginal gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GomRate {
    /// The water-filled rate over held plus all open subcarriers.
    #[default]
    AllOpen,
    /// The water-filled rate over held subcarriers plus the nominee only.
    NomineeOnly,
}

/// Index of the largest nominated rate; `None` marks users without an open
/// subcarrier. Ties go to the lowest index.
pub fn select_lrm(candidate_rates: &[Option<f64>]) -> Result<usize> {
    argmax(candidate_rates.iter().copied())
}

/// Index of the largest marginal gain `with_candidate - allocated_only`.
pub fn select_gom(rates_with_candidate: &[Option<f64>], rates_allocated_only: &[f64]) -> Result<usize> {
    if rates_with_candidate.len() != rates_allocated_only.len() {
        return Err(Error::DimensionMismatch {
            what: "allocated-only rates",
            expected: rates_with_candidate.len(),
            got: rates_allocated_only.len(),
        });
    }
    argmax(
        rates_with_candidate
            .iter()
            .zip(rates_allocated_only)
            .map(|(r, a)| r.map(|r| r - a)),
    )
}

fn argmax(values: impl Iterator<Item = Option<f64>>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocatorConfig {
    pub load_limit: usize,
    pub criterion: Criterion,
    pub gom_rate: GomRate,
}

impl AllocatorConfig {
    pub fn new(load_limit: usize, criterion: Criterion) -> Self {
        Self {
            load_limit,
            criterion,
            gom_rate: GomRate::default(),
        }
    }
}

/// One grant made by [`NomaAllocator::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub user: usize,
    pub subcarrier: usize,
    /// Rate the winner had on the granted subcarrier.
    pub rate: f64,
}

/// Stateful iterative allocator; [`allocate`] drives it to completion.
#[derive(Debug, Clone)]
pub struct NomaAllocator<'a> {
    gains: &'a Array2<f64>,
    budgets: Vec<f64>,
    noise: f64,
    config: AllocatorConfig,
    order: DecodingOrder,
    assignment: Array2<bool>,
    /// Water-filled powers over held plus open subcarriers.
    working: Array2<f64>,
    interference: Array2<f64>,
    allocated: Vec<BTreeSet<usize>>,
    available: Vec<BTreeSet<usize>>,
    rates: Vec<f64>,
    allocated_rates: Vec<f64>,
    done: bool,
}

impl<'a> NomaAllocator<'a> {
    pub fn new(channel: &'a ChannelMatrix, budgets: &[f64], noise: f64, config: AllocatorConfig) -> Result<Self> {
        let (k, n) = channel.gains.dim();
        if config.load_limit < 1 {
            return Err(Error::invalid("loading limit L must be at least 1"));
        }
        if budgets.len() != k {
            return Err(Error::DimensionMismatch {
                what: "power budgets",
                expected: k,
                got: budgets.len(),
            });
        }
        if budgets.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::invalid("power budgets must be nonnegative"));
        }
        if !(noise > 0.0) {
            return Err(Error::invalid("noise power must be positive"));
        }
        Ok(Self {
            gains: &channel.gains,
            budgets: budgets.to_vec(),
            noise,
            config,
            order: DecodingOrder::ascending(k),
            assignment: Array2::from_elem((k, n), false),
            working: Array2::zeros((k, n)),
            interference: Array2::zeros((k, n)),
            allocated: vec![BTreeSet::new(); k],
            available: vec![(0..n).collect(); k],
            rates: vec![0.0; k],
            allocated_rates: vec![0.0; k],
            done: false,
        })
    }

    /// Water-fills user `k` over `subset` against the current interference.
    /// Returns the powers and per-subcarrier rates aligned with `subset`.
    fn water_fill(&self, k: usize, subset: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let g: Vec<f64> = subset.iter().map(|&s| self.gains[[k, s]]).collect();
        let v: Vec<f64> = subset.iter().map(|&s| self.noise + self.interference[[k, s]]).collect();
        let p = suwf(&g, &v, self.budgets[k]).expect("validated inputs").powers;
        let r = subcarrier_rates(&p, &g, &v);
        (p, r)
    }

    fn rate_over(&self, k: usize, subset: &[usize]) -> f64 {
        self.water_fill(k, subset).1.iter().sum()
    }

    /// Runs one grant. Returns `None` once the stopping condition holds.
    pub fn step(&mut self) -> Result<Option<Grant>> {
        if self.done {
            return Ok(None);
        }
        let (k_users, n_sub) = self.gains.dim();

        // power allocation over held + open subcarriers
        let mut per_sub = Array2::<f64>::zeros((k_users, n_sub));
        for k in 0..k_users {
            let subset: Vec<usize> = self.allocated[k].union(&self.available[k]).copied().collect();
            let (p, r) = self.water_fill(k, &subset);
            self.working.row_mut(k).fill(0.0);
            for ((&s, p), r) in subset.iter().zip(p).zip(&r) {
                self.working[[k, s]] = p;
                per_sub[[k, s]] = *r;
            }
            self.rates[k] = r.iter().sum();
        }

        // subcarrier selection
        let nominees: Vec<Option<(usize, f64)>> = (0..k_users)
            .map(|k| {
                let mut best: Option<(usize, f64)> = None;
                for &s in &self.available[k] {
                    let r = per_sub[[k, s]];
                    if best.is_none_or(|(_, b)| r > b) {
                        best = Some((s, r));
                    }
                }
                best.filter(|&(_, r)| r > RATE_EPSILON)
            })
            .collect();
        if nominees.iter().all(Option::is_none) {
            self.done = true;
            return Ok(None);
        }

        // subcarrier allocation
        let winner = match self.config.criterion {
            Criterion::Lrm => select_lrm(&nominees.iter().map(|c| c.map(|(_, r)| r)).collect::<Vec<_>>())?,
            Criterion::Gom => {
                let held: Vec<Vec<usize>> = self.allocated.iter().map(|a| a.iter().copied().collect()).collect();
                self.allocated_rates = (0..k_users).map(|k| self.rate_over(k, &held[k])).collect();
                let with_candidate: Vec<Option<f64>> = (0..k_users)
                    .map(|k| {
                        nominees[k].map(|(s, _)| match self.config.gom_rate {
                            GomRate::AllOpen => self.rates[k],
                            GomRate::NomineeOnly => {
                                let mut subset = held[k].clone();
                                let at = subset.partition_point(|&x| x < s);
                                subset.insert(at, s);
                                self.rate_over(k, &subset)
                            }
                        })
                    })
                    .collect();
                select_gom(&with_candidate, &self.allocated_rates)?
            }
        };
        let (sub, rate) = nominees[winner].expect("winner has a nominee");

        self.assignment[[winner, sub]] = true;
        self.allocated[winner].insert(sub);
        self.available[winner].remove(&sub);
        if self.assignment.column(sub).iter().filter(|&&x| x).count() >= self.config.load_limit {
            for open in &mut self.available {
                open.remove(&sub);
            }
        }
        self.interference = compute_interference(&self.assignment, &self.working, self.gains, &self.order);
        if self.available.iter().all(BTreeSet::is_empty) {
            self.done = true;
        }
        Ok(Some(Grant {
            user: winner,
            subcarrier: sub,
            rate,
        }))
    }

    /// Current state with powers restricted to granted subcarriers.
    pub fn snapshot(&self) -> AllocationState {
        let powers = Array2::from_shape_fn(self.working.dim(), |ix| {
            if self.assignment[ix] {
                self.working[ix]
            } else {
                0.0
            }
        });
        let rates = rates_with_interference(&powers, self.gains, &self.interference, self.noise);
        AllocationState {
            assignment: self.assignment.clone(),
            powers,
            interference: self.interference.clone(),
            allocated: self.allocated.clone(),
            available: self.available.clone(),
            rates,
            allocated_rates: self.allocated_rates.clone(),
            budgets: self.budgets.clone(),
            load_limit: self.config.load_limit,
            order: self.order.clone(),
        }
    }

    /// Closing pass: each user water-fills over its granted subcarriers only,
    /// sweeping from the last-decoded user to the first so every user sees
    /// the final powers of those decoded after it.
    pub fn finish(mut self) -> AllocationState {
        let mut powers = Array2::<f64>::zeros(self.working.dim());
        let sweep: Vec<usize> = self.order.as_slice().iter().rev().copied().collect();
        for _ in 0..FINAL_ROUNDS {
            let before = powers.clone();
            for &k in &sweep {
                let held: Vec<usize> = self.allocated[k].iter().copied().collect();
                self.interference = compute_interference(&self.assignment, &powers, self.gains, &self.order);
                let (p, _) = self.water_fill(k, &held);
                powers.row_mut(k).fill(0.0);
                for (&s, p) in held.iter().zip(p) {
                    powers[[k, s]] = p;
                }
            }
            if powers == before {
                break;
            }
        }
        self.interference = compute_interference(&self.assignment, &powers, self.gains, &self.order);
        let rates = rates_with_interference(&powers, self.gains, &self.interference, self.noise);
        AllocationState {
            assignment: self.assignment,
            powers,
            interference: self.interference,
            allocated: self.allocated,
            available: self.available,
            allocated_rates: rates.clone(),
            rates,
            budgets: self.budgets,
            load_limit: self.config.load_limit,
            order: self.order,
        }
    }
}

/// Runs the iterative allocator to completion.
pub fn allocate(
    channel: &ChannelMatrix,
    budgets: &[f64],
    noise: f64,
    config: AllocatorConfig,
) -> Result<AllocationState> {
    let mut allocator = NomaAllocator::new(channel, budgets, noise, config)?;
    let bound = channel.users() * channel.subcarriers() + 1;
    for _ in 0..bound {
        if allocator.step()?.is_none() {
            break;
        }
    }
    Ok(allocator.finish())
}
