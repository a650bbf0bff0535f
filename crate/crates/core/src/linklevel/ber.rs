//! Monte Carlo bit error rate over OFDM subcarriers shared by several users.
//!
//! One block is `symbols_per_block` OFDM symbols. Every user's fading is
//! redrawn for each OFDM symbol. With coding on, one codeword per user spans
//! the whole block and coded bits are interleaved across OFDM symbols and
//! subcarriers.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::conv::{conv_encode, viterbi_decode, CodeSpec};
use super::modulation::Constellation;
use super::mud::{ml_mud_indices, superimpose, SubcarrierMap};
use crate::channel::{complex_gaussian, TapDelayProfile};
use crate::seed::{derive, rng_from};
use crate::{Error, Result};

/// Small-scale fading seen by each user on each OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum Fading {
    /// Frequency response of a tapped-delay-line realization.
    Profile(TapDelayProfile),
    /// Independent unit-power Rayleigh coefficient on every subcarrier.
    IidRayleigh,
}

impl Fading {
    fn draw<R: Rng + ?Sized>(&self, n: usize, spacing_hz: f64, rng: &mut R) -> Vec<Complex64> {
        match self {
            Fading::Profile(p) => p.realize(rng).response(n, spacing_hz, 0.0),
            Fading::IidRayleigh => (0..n).map(|_| complex_gaussian(rng, 1.0)).collect(),
        }
    }
}

/// Access scheme of one BER curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkScheme {
    /// One user per subcarrier.
    Ofdma,
    /// `users` superimposed users on every subcarrier.
    Noma { users: usize },
}

impl LinkScheme {
    pub fn users(self) -> usize {
        match self {
            LinkScheme::Ofdma => 1,
            LinkScheme::Noma { users } => users,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LinkScheme::Ofdma => "OFDMA",
            LinkScheme::Noma { .. } => "NOMA",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSimConfig {
    pub n_subcarriers: usize,
    pub spacing_hz: f64,
    pub constellation: Constellation,
    /// `None` for the uncoded chain.
    pub code: Option<CodeSpec>,
    pub fading: Fading,
    pub symbols_per_block: usize,
    pub target_errors: u64,
    /// Cap on simulated OFDM symbols per point.
    pub max_frames: u64,
    /// Blocks simulated between two checks of the stopping rule.
    pub batch_blocks: usize,
    pub seed: u64,
}

impl Default for LinkSimConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            spacing_hz: 15_000.0,
            constellation: Constellation::Bpsk,
            code: None,
            fading: Fading::Profile(TapDelayProfile::pedestrian_b()),
            symbols_per_block: 10,
            target_errors: 500,
            max_frames: 100_000,
            batch_blocks: 64,
            seed: 1,
        }
    }
}

impl LinkSimConfig {
    fn coded_bits_per_block(&self) -> usize {
        self.symbols_per_block * self.n_subcarriers * self.constellation.bits_per_symbol()
    }

    /// Information bits each user carries per block.
    pub fn info_bits_per_block(&self) -> Result<usize> {
        let raw = self.coded_bits_per_block();
        match &self.code {
            None => Ok(raw),
            Some(code) => code
                .info_len_for(raw)
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::invalid("block too short for the code tail")),
        }
    }

    /// Symbol SNR Es/N0 for an Eb/N0 in dB.
    pub fn es_n0(&self, ebn0_db: f64) -> f64 {
        let rate = self.code.as_ref().map_or(1.0, CodeSpec::rate);
        10f64.powf(ebn0_db / 10.0) * rate * self.constellation.bits_per_symbol() as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.symbols_per_block == 0 || self.batch_blocks == 0 {
            return Err(Error::invalid("link simulation sizes must be positive"));
        }
        if !(self.spacing_hz > 0.0) {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        self.info_bits_per_block().map(|_| ())
    }
}

/// Result of one Eb/N0 point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub scheme: LinkScheme,
    pub coded: bool,
    pub ebn0_db: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frames: u64,
    /// Stopped on the frame cap before reaching the target error count.
    pub flagged: bool,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }
}

pub fn count_bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| (*x ^ *y) & 1 != 0).count() as u64
}

/// Smallest stride >= sqrt(n) that is coprime with `n`.
fn coprime_stride(n: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut s = ((n as f64).sqrt().ceil() as usize).max(1);
    while gcd(s, n) != 1 {
        s += 1;
    }
    s
}

/// Maps coded bit `i` of a block to (OFDM symbol, subcarrier, bit in symbol).
/// Consecutive coded bits land in different OFDM symbols.
#[derive(Debug, Clone)]
struct Interleaver {
    slots: Vec<(usize, usize, usize)>,
}

impl Interleaver {
    fn new(symbols: usize, subcarriers: usize, bits_per_symbol: usize) -> Self {
        let stride = coprime_stride(subcarriers);
        let slots = (0..symbols * subcarriers * bits_per_symbol)
            .map(|i| {
                let t = i % symbols;
                let q = i / symbols;
                let n = ((q / bits_per_symbol) * stride) % subcarriers;
                (t, n, q % bits_per_symbol)
            })
            .collect();
        Self { slots }
    }
}

struct BlockOutcome {
    errors: u64,
    bits: u64,
}

/// Simulates one block for `scheme`.
///
/// Draw order is noise, then user 0 (bits, fading per OFDM symbol), then
/// user 1, so a NOMA block and an OFDMA block from the same seed share
/// user 0's data, channel and noise.
fn simulate_block(
    cfg: &LinkSimConfig,
    scheme: LinkScheme,
    noise_variance: f64,
    interleaver: &Interleaver,
    seed: u64,
) -> BlockOutcome {
    let mut rng = rng_from(seed);
    let n = cfg.n_subcarriers;
    let s_count = cfg.symbols_per_block;
    let bps = cfg.constellation.bits_per_symbol();
    let users = scheme.users();
    let info_len = cfg.info_bits_per_block().expect("validated");
    let points = cfg.constellation.points();

    let noise: Vec<Complex64> = (0..s_count * n)
        .map(|_| complex_gaussian(&mut rng, 1.0) * noise_variance.sqrt())
        .collect();

    let mut info = Vec::with_capacity(users);
    // symbol indices [user][t][n]
    let mut tx = vec![vec![vec![0usize; n]; s_count]; users];
    let mut fading: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(users);
    for user_tx in tx.iter_mut() {
        let bits: Vec<u8> = (0..info_len).map(|_| rng.random_range(0..2u8)).collect();
        let coded = match &cfg.code {
            Some(code) => conv_encode(&bits, code),
            None => bits.clone(),
        };
        let mut per_slot = vec![vec![vec![0u8; bps]; n]; s_count];
        for (i, &b) in coded.iter().enumerate() {
            let (t, sc, j) = interleaver.slots[i];
            per_slot[t][sc][j] = b;
        }
        for t in 0..s_count {
            for sc in 0..n {
                user_tx[t][sc] = cfg.constellation.bits_to_indices(&per_slot[t][sc])[0];
            }
        }
        info.push(bits);
        fading.push(
            (0..s_count)
                .map(|_| cfg.fading.draw(n, cfg.spacing_hz, &mut rng))
                .collect(),
        );
    }

    let map = SubcarrierMap::fully_loaded(users, n);
    let mut detected = vec![vec![vec![0usize; n]; s_count]; users];
    for t in 0..s_count {
        let coeffs = Array2::from_shape_fn((users, n), |(k, sc)| fading[k][t][sc]);
        let symbols: Vec<Vec<Complex64>> = (0..users)
            .map(|k| tx[k][t].iter().map(|&i| points[i]).collect())
            .collect();
        let mut y = superimpose(&map, &symbols, &coeffs, 0.0, &mut rng).expect("consistent frame");
        for (sc, y) in y.iter_mut().enumerate() {
            *y += noise[t * n + sc];
            let g: Vec<Complex64> = (0..users).map(|k| coeffs[[k, sc]]).collect();
            for (k, idx) in ml_mud_indices(*y, &g, &points).into_iter().enumerate() {
                detected[k][t][sc] = idx;
            }
        }
    }

    let mut errors = 0;
    for (k, bits) in info.iter().enumerate() {
        let mut hard = vec![0u8; interleaver.slots.len()];
        for (i, &(t, sc, j)) in interleaver.slots.iter().enumerate() {
            hard[i] = cfg.constellation.indices_to_bits(&[detected[k][t][sc]])[j];
        }
        let decoded = match &cfg.code {
            Some(code) => {
                hard.truncate(code.coded_len(info_len));
                viterbi_decode(&hard, code).expect("block length matches code")
            }
            None => hard,
        };
        errors += count_bit_errors(&decoded, bits);
    }
    BlockOutcome {
        errors,
        bits: (info_len * users) as u64,
    }
}

/// Runs one Eb/N0 point until `target_errors` or `max_frames`.
///
/// `point_seed` fixes every block's random stream; blocks are simulated in
/// parallel batches and summed in block order.
pub fn simulate_point(cfg: &LinkSimConfig, scheme: LinkScheme, ebn0_db: f64, point_seed: u64) -> Result<BerPoint> {
    cfg.validate()?;
    if scheme.users() == 0 {
        return Err(Error::invalid("scheme needs at least one user"));
    }
    let noise_variance = if ebn0_db.is_finite() {
        1.0 / cfg.es_n0(ebn0_db)
    } else if ebn0_db > 0.0 {
        0.0
    } else {
        return Err(Error::invalid("Eb/N0 must be finite or +inf"));
    };
    let interleaver = Interleaver::new(
        cfg.symbols_per_block,
        cfg.n_subcarriers,
        cfg.constellation.bits_per_symbol(),
    );
    let max_blocks = cfg.max_frames.div_ceil(cfg.symbols_per_block as u64).max(1);

    let (mut errors, mut bits, mut blocks) = (0u64, 0u64, 0u64);
    while errors < cfg.target_errors && blocks < max_blocks {
        let batch = (cfg.batch_blocks as u64).min(max_blocks - blocks);
        let outcomes: Vec<BlockOutcome> = (blocks..blocks + batch)
            .into_par_iter()
            .map(|b| simulate_block(cfg, scheme, noise_variance, &interleaver, derive(point_seed, b)))
            .collect();
        for o in outcomes {
            errors += o.errors;
            bits += o.bits;
        }
        blocks += batch;
    }
    Ok(BerPoint {
        scheme,
        coded: cfg.code.is_some(),
        ebn0_db,
        bits,
        bit_errors: errors,
        frames: blocks * cfg.symbols_per_block as u64,
        flagged: errors < cfg.target_errors,
    })
}

/// BER curves for every scheme over `ebn0_grid_db`.
///
/// Point `i` of every scheme uses the same seed, so curves are paired
/// through common random numbers.
pub fn simulate_ber(cfg: &LinkSimConfig, schemes: &[LinkScheme], ebn0_grid_db: &[f64]) -> Result<Vec<BerPoint>> {
    if ebn0_grid_db.is_empty() {
        return Err(Error::invalid("Eb/N0 grid is empty"));
    }
    let mut out = Vec::with_capacity(schemes.len() * ebn0_grid_db.len());
    for &scheme in schemes {
        for (i, &ebn0) in ebn0_grid_db.iter().enumerate() {
            out.push(simulate_point(cfg, scheme, ebn0, derive(cfg.seed, i as u64))?);
        }
    }
    Ok(out)
}

/// Eb/N0 at which a BER curve first falls to `target`, interpolating
/// log10(BER) linearly between grid points. `None` if never reached.
pub fn ebn0_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for &(x, ber) in points {
        if ber <= target {
            return Some(match prev {
                Some((x0, b0)) if ber > 0.0 && b0 > target => {
                    let (l0, l1, lt) = (b0.log10(), ber.log10(), target.log10());
                    x0 + (x - x0) * (l0 - lt) / (l0 - l1)
                }
                _ => x,
            });
        }
        prev = Some((x, ber));
    }
    None
}

/// Closed-form BER of BPSK over flat Rayleigh fading at mean SNR `gamma`.
pub fn rayleigh_bpsk_ber(gamma: f64) -> f64 {
    0.5 * (1.0 - (gamma / (1.0 + gamma)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(code: Option<CodeSpec>) -> LinkSimConfig {
        LinkSimConfig {
            code,
            target_errors: 200,
            max_frames: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn interleaver_is_a_permutation() {
        for (s, n, b) in [(10, 64, 1), (10, 64, 2), (3, 12, 1)] {
            let il = Interleaver::new(s, n, b);
            let mut seen = std::collections::HashSet::new();
            assert!(il.slots.iter().all(|slot| seen.insert(*slot)));
            assert_eq!(seen.len(), s * n * b);
        }
    }

    #[test]
    fn noiseless_is_error_free() {
        for code in [None, Some(CodeSpec::k7_rate_half())] {
            let cfg = LinkSimConfig {
                max_frames: 200,
                ..quick(code)
            };
            for scheme in [LinkScheme::Ofdma, LinkScheme::Noma { users: 2 }] {
                let p = simulate_point(&cfg, scheme, f64::INFINITY, 3).unwrap();
                assert_eq!(p.bit_errors, 0);
                assert!(p.flagged && p.bits > 0);
            }
        }
    }

    #[test]
    fn single_user_matches_rayleigh_closed_form() {
        let cfg = LinkSimConfig {
            fading: Fading::IidRayleigh,
            target_errors: 4000,
            max_frames: 1_000_000,
            ..Default::default()
        };
        for (i, db) in [5.0, 10.0].into_iter().enumerate() {
            let p = simulate_point(&cfg, LinkScheme::Ofdma, db, 100 + i as u64).unwrap();
            let expected = rayleigh_bpsk_ber(10f64.powf(db / 10.0));
            assert!(
                (p.ber() / expected - 1.0).abs() < 0.05,
                "{db} dB: {} vs {expected}",
                p.ber()
            );
        }
        assert!((rayleigh_bpsk_ber(10.0) - 0.0233).abs() < 1e-4);
    }

    #[test]
    fn noma_never_beats_ofdma_uncoded() {
        let cfg = quick(None);
        let grid = [0.0, 4.0, 8.0, 12.0];
        let pts = simulate_ber(&cfg, &[LinkScheme::Ofdma, LinkScheme::Noma { users: 2 }], &grid).unwrap();
        let (ofdma, noma) = pts.split_at(grid.len());
        for (o, m) in ofdma.iter().zip(noma) {
            assert!(
                m.ber() >= o.ber(),
                "{} dB: noma {} ofdma {}",
                o.ebn0_db,
                m.ber(),
                o.ber()
            );
        }
    }

    /// Capacity of the binary symmetric channel seen by the hard decoder.
    fn hard_capacity(ebn0_db: f64, cfg: &LinkSimConfig) -> f64 {
        let p = rayleigh_bpsk_ber(cfg.es_n0(ebn0_db));
        let h = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        1.0 - h
    }

    #[test]
    fn coding_gain_follows_hard_decision_capacity() {
        let coded_cfg = quick(Some(CodeSpec::k7_rate_half()));
        // below the threshold a rate-1/2 hard-decision code cannot work
        assert!(hard_capacity(2.0, &coded_cfg) < 0.5);
        assert!(hard_capacity(10.0, &coded_cfg) > 0.6);
        let grid = [2.0, 10.0];
        let unc = simulate_ber(&quick(None), &[LinkScheme::Ofdma], &grid).unwrap();
        let cod = simulate_ber(&coded_cfg, &[LinkScheme::Ofdma], &grid).unwrap();
        assert!(
            cod[0].ber() > unc[0].ber(),
            "2 dB: {} vs {}",
            cod[0].ber(),
            unc[0].ber()
        );
        assert!(
            cod[1].ber() < unc[1].ber(),
            "10 dB: {} vs {}",
            cod[1].ber(),
            unc[1].ber()
        );
    }

    #[test]
    fn random_guessing_gives_half() {
        let mut rng = rng_from(12);
        let n = 200_000;
        let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let ber = count_bit_errors(&a, &b) as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ber - 0.5).abs() < 3.0 * sigma, "{ber}");
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = LinkSimConfig {
            max_frames: 500,
            ..quick(Some(CodeSpec::k7_rate_half()))
        };
        let a = simulate_point(&cfg, LinkScheme::Noma { users: 2 }, 3.0, 9).unwrap();
        let b = simulate_point(&cfg, LinkScheme::Noma { users: 2 }, 3.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crossing_interpolation() {
        let pts = [(0.0, 1e-1), (10.0, 1e-3)];
        assert!((ebn0_at_ber(&pts, 1e-2).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(ebn0_at_ber(&pts, 1e-4), None);
        assert_eq!(ebn0_at_ber(&[(3.0, 1e-5)], 1e-3), Some(3.0));
    }
}
