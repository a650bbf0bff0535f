//! User placement, propagation loss and frequency-selective fading.
//!
//! A channel realization for one drop combines three independent parts per
//! user: COST231-Hata pathloss from the user's distance, one lognormal
//! shadowing draw, and one tapped-delay-line fading realization evaluated at
//! every subcarrier (or resource-block centre) frequency.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::{Error, Result};

/// Resource block width used for system-level allocation (12 x 15 kHz).
pub const RB_BANDWIDTH_HZ: f64 = 180_000.0;

/// Users dropped in a single cell around a base station at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    pub positions: Vec<(f64, f64)>,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
}

impl UserGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().map(|&(x, y)| x.hypot(y))
    }
}

/// Drops `count` users uniformly over the annulus between `min_distance_m`
/// and `cell_radius_m`.
///
/// The squared distance is drawn uniformly on `[min², radius²]`, which is the
/// exact distribution of a uniform-area point conditioned on lying outside the
/// exclusion radius.
pub fn place_users<R: Rng + ?Sized>(
    count: usize,
    cell_radius_m: f64,
    min_distance_m: f64,
    rng: &mut R,
) -> Result<UserGeometry> {
    if !(min_distance_m > 0.0 && min_distance_m < cell_radius_m) {
        return Err(Error::invalid(format!(
            "need 0 < min_distance ({min_distance_m}) < cell_radius ({cell_radius_m})"
        )));
    }
    let (r2_min, r2_max) = (min_distance_m * min_distance_m, cell_radius_m * cell_radius_m);
    let positions = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let d = (r2_min + u * (r2_max - r2_min))
                .sqrt()
                .clamp(min_distance_m, cell_radius_m);
            let theta = rng.random::<f64>() * 2.0 * PI;
            (d * theta.cos(), d * theta.sin())
        })
        .collect();
    Ok(UserGeometry {
        positions,
        cell_radius_m,
        min_distance_m,
    })
}

/// COST231-Hata parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams {
    pub carrier_mhz: f64,
    pub bs_height_m: f64,
    pub ms_height_m: f64,
    /// Metropolitan centre correction, 3 dB urban.
    pub correction_db: f64,
    pub min_distance_m: f64,
}

impl Default for PathlossParams {
    fn default() -> Self {
        Self {
            carrier_mhz: 2000.0,
            bs_height_m: 12.5,
            ms_height_m: 1.5,
            correction_db: 3.0,
            min_distance_m: 35.0,
        }
    }
}

impl PathlossParams {
    /// Mobile antenna height correction a(h_m).
    pub fn mobile_correction_db(&self) -> f64 {
        let lf = self.carrier_mhz.log10();
        (1.1 * lf - 0.7) * self.ms_height_m - (1.56 * lf - 0.8)
    }

    /// Loss increase per decade of distance.
    pub fn decade_slope_db(&self) -> f64 {
        44.9 - 6.55 * self.bs_height_m.log10()
    }
}

/// COST231-Hata pathloss in dB at `distance_m`.
pub fn pathloss_db(distance_m: f64, params: &PathlossParams) -> Result<f64> {
    if !(distance_m >= params.min_distance_m) {
        return Err(Error::DistanceTooSmall {
            distance_m,
            min_m: params.min_distance_m,
        });
    }
    let d_km = distance_m / 1000.0;
    Ok(
        46.3 + 33.9 * params.carrier_mhz.log10() - 13.82 * params.bs_height_m.log10() - params.mobile_correction_db()
            + params.decade_slope_db() * d_km.log10()
            + params.correction_db,
    )
}

/// One lognormal shadowing sample in dB.
pub fn shadowing_db<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    if sigma_db <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma_db).expect("finite positive sigma").sample(rng)
}

/// Power-delay profile of a tapped-delay-line channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TapDelayProfile {
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl TapDelayProfile {
    pub fn new(delays_ns: Vec<f64>, powers_db: Vec<f64>) -> Result<Self> {
        if delays_ns.is_empty() || delays_ns.len() != powers_db.len() {
            return Err(Error::invalid(format!(
                "tap profile needs matching non-empty delay/power lists ({} vs {})",
                delays_ns.len(),
                powers_db.len()
            )));
        }
        if delays_ns[0] != 0.0 {
            return Err(Error::invalid("first tap delay must be 0"));
        }
        if delays_ns.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tap delays must be strictly increasing"));
        }
        if powers_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("tap powers must be finite"));
        }
        Ok(Self { delays_ns, powers_db })
    }

    /// ITU-R M.1225 Pedestrian B.
    pub fn pedestrian_b() -> Self {
        Self::new(
            vec![0.0, 200.0, 800.0, 1200.0, 2300.0, 3700.0],
            vec![0.0, -0.9, -4.9, -8.0, -7.8, -23.9],
        )
        .expect("static profile is valid")
    }

    /// Single 0 dB tap: flat Rayleigh fading.
    pub fn flat() -> Self {
        Self::new(vec![0.0], vec![0.0]).expect("static profile is valid")
    }

    /// Parses a whitespace- or comma-separated `delay_ns power_db` table.
    /// Blank lines, `#` comments and a non-numeric header line are skipped.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut delays = Vec::new();
        let mut powers = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => {
                    delays.push(v[0]);
                    powers.push(v[1]);
                }
                None if delays.is_empty() => continue, // header
                _ => {
                    return Err(Error::invalid(format!(
                        "tap table line {}: expected `delay_ns power_db`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(delays, powers)
    }

    /// Linear tap powers scaled to unit sum.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    /// Draws one circular complex Gaussian coefficient per tap.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> TapRealization {
        let coeffs = self
            .normalized_powers()
            .into_iter()
            .map(|p| complex_gaussian(rng, p))
            .collect();
        TapRealization {
            delays_s: self.delays_ns.iter().map(|d| d * 1e-9).collect(),
            coeffs,
        }
    }
}

/// One draw of the tap coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TapRealization {
    pub delays_s: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

impl TapRealization {
    /// H(f) = sum_t c_t exp(-j 2 pi f tau_t).
    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&self.delays_s)
            .map(|(c, tau)| c * Complex64::from_polar(1.0, -2.0 * PI * freq_hz * tau))
            .sum()
    }

    pub fn response(&self, n_subcarriers: usize, spacing_hz: f64, offset: f64) -> Vec<Complex64> {
        (0..n_subcarriers)
            .map(|n| self.response_at((n as f64 + offset) * spacing_hz))
            .collect()
    }
}

/// Circular complex Gaussian with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Frequency response of one fresh fading realization at `n * spacing`.
pub fn fading_frequency_response<R: Rng + ?Sized>(
    profile: &TapDelayProfile,
    n_subcarriers: usize,
    subcarrier_spacing_hz: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(subcarrier_spacing_hz > 0.0) {
        return Err(Error::invalid("subcarrier spacing must be positive"));
    }
    Ok(profile.realize(rng).response(n_subcarriers, subcarrier_spacing_hz, 0.0))
}

/// Per-user, per-subcarrier channel of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// Linear power gains h[k, n] (pathloss, shadowing and fading combined).
    pub gains: Array2<f64>,
    /// Complex amplitudes g[k, n] with |g|² = h, present in link-level mode.
    pub coeffs: Option<Array2<Complex64>>,
}

impl ChannelMatrix {
    pub fn from_gains(gains: Array2<f64>) -> Result<Self> {
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("channel gains must be finite and nonnegative"));
        }
        Ok(Self { gains, coeffs: None })
    }

    pub fn from_coeffs(coeffs: Array2<Complex64>) -> Self {
        Self {
            gains: coeffs.mapv(|c| c.norm_sqr()),
            coeffs: Some(coeffs),
        }
    }

    pub fn users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.gains.ncols()
    }
}

/// Frequency grid and large-scale parameters for [`compose_channel_matrix`].
#[derive(Debug, Clone)]
pub struct ChannelSetup {
    pub n_subcarriers: usize,
    pub spacing_hz: f64,
    /// Evaluate the response at `(n + offset) * spacing`; 0.5 gives
    /// resource-block centre frequencies.
    pub frequency_offset: f64,
    pub shadow_sigma_db: f64,
    pub pathloss: PathlossParams,
    /// Also keep complex coefficients (link-level mode).
    pub keep_coeffs: bool,
}

impl ChannelSetup {
    /// One gain per 180 kHz resource block, sampled at its centre.
    pub fn resource_blocks(n_rb: usize, shadow_sigma_db: f64, pathloss: PathlossParams) -> Self {
        Self {
            n_subcarriers: n_rb,
            spacing_hz: RB_BANDWIDTH_HZ,
            frequency_offset: 0.5,
            shadow_sigma_db,
            pathloss,
            keep_coeffs: false,
        }
    }
}

/// Builds h[k, n] = 10^(-(PL(d_k) + X_k)/10) |H_k(f_n)|² for every user.
///
/// `profiles` holds either one profile shared by all users or one per user.
/// Random draws per user happen in a fixed order (shadowing, then taps) so a
/// drop is fully determined by the stream state.
pub fn compose_channel_matrix<R: Rng + ?Sized>(
    geometry: &UserGeometry,
    profiles: &[TapDelayProfile],
    setup: &ChannelSetup,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    let k = geometry.len();
    if profiles.is_empty() || (profiles.len() != 1 && profiles.len() != k) {
        return Err(Error::DimensionMismatch {
            what: "tap profiles per user",
            expected: k,
            got: profiles.len(),
        });
    }
    if !(setup.spacing_hz > 0.0) {
        return Err(Error::invalid("subcarrier spacing must be positive"));
    }
    let n = setup.n_subcarriers;
    let mut coeffs = Array2::<Complex64>::zeros((k, n));
    for (user, d) in geometry.distances().enumerate() {
        let loss_db = pathloss_db(d, &setup.pathloss)? + shadowing_db(rng, setup.shadow_sigma_db);
        let amplitude = 10f64.powf(-loss_db / 20.0);
        let profile = &profiles[if profiles.len() == 1 { 0 } else { user }];
        let response = profile
            .realize(rng)
            .response(n, setup.spacing_hz, setup.frequency_offset);
        for (slot, h) in coeffs.row_mut(user).iter_mut().zip(response) {
            *slot = h * amplitude;
        }
    }
    let mut channel = ChannelMatrix::from_coeffs(coeffs);
    if !setup.keep_coeffs {
        channel.coeffs = None;
    }
    Ok(channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn empty_drop() {
        let g = place_users(0, 500.0, 35.0, &mut rng_from(1)).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn placement_rejects_bad_radii() {
        assert!(place_users(3, 500.0, 500.0, &mut rng_from(1)).is_err());
        assert!(place_users(3, 500.0, 0.0, &mut rng_from(1)).is_err());
    }

    #[test]
    fn placement_respects_annulus() {
        let g = place_users(1000, 500.0, 35.0, &mut rng_from(7)).unwrap();
        assert_eq!(g.len(), 1000);
        assert!(g.distances().all(|d| (35.0..=500.0).contains(&d)));
    }

    #[test]
    fn placement_is_uniform_in_area() {
        let g = place_users(100_000, 500.0, 35.0, &mut rng_from(11)).unwrap();
        let mut d2: Vec<f64> = g.distances().map(|d| d * d).collect();
        d2.sort_by(f64::total_cmp);
        let (lo, hi) = (35.0f64 * 35.0, 500.0f64 * 500.0);
        let n = d2.len() as f64;
        let ks = d2
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x - lo) / (hi - lo);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn pathloss_at_one_km() {
        let p = PathlossParams::default();
        let lf = 2000f64.log10();
        let a = (1.1 * lf - 0.7) * 1.5 - (1.56 * lf - 0.8);
        let expected = 46.3 + 33.9 * lf - 13.82 * 12.5f64.log10() - a + 3.0;
        assert!((pathloss_db(1000.0, &p).unwrap() - expected).abs() < 1e-12);
        // frozen from the expression above
        assert!((expected - 145.998528).abs() < 1e-4, "{expected}");
    }

    #[test]
    fn pathloss_decade_slope_and_monotone() {
        let p = PathlossParams::default();
        let slope = pathloss_db(1000.0, &p).unwrap() - pathloss_db(100.0, &p).unwrap();
        assert!((slope - (44.9 - 6.55 * 12.5f64.log10())).abs() < 1e-9);
        let v: Vec<f64> = [200.0, 400.0, 500.0]
            .iter()
            .map(|&d| pathloss_db(d, &p).unwrap())
            .collect();
        assert!(v[0] < v[1] && v[1] < v[2]);
        assert!(pathloss_db(10.0, &p).is_err());
    }

    #[test]
    fn shadowing_statistics() {
        let mut rng = rng_from(3);
        assert_eq!(shadowing_db(&mut rng, 0.0), 0.0);
        let xs: Vec<f64> = (0..100_000).map(|_| shadowing_db(&mut rng, 8.0)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(mean.abs() < 0.1, "{mean}");
        assert!((7.9..=8.1).contains(&var.sqrt()), "{}", var.sqrt());
    }

    #[test]
    fn single_tap_is_flat() {
        let mut rng = rng_from(5);
        let h = fading_frequency_response(&TapDelayProfile::flat(), 64, 15e3, &mut rng).unwrap();
        let m0 = h[0].norm();
        assert!(h.iter().all(|c| (c.norm() - m0).abs() < 1e-12));
    }

    #[test]
    fn two_tap_interference_pattern() {
        let tau = 2.0e-6;
        let spacing = 15e3;
        let s = 0.5f64.sqrt();
        let taps = TapRealization {
            delays_s: vec![0.0, tau],
            coeffs: vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        };
        for (n, h) in taps.response(64, spacing, 0.0).iter().enumerate() {
            let expected = 1.0 + (2.0 * PI * n as f64 * spacing * tau).cos();
            assert!((h.norm_sqr() - expected).abs() < 1e-12);
        }
        // null where n * spacing * tau = 1/2
        let null_tau = 1.0 / (2.0 * 10.0 * spacing);
        let taps = TapRealization {
            delays_s: vec![0.0, null_tau],
            ..taps
        };
        assert!(taps.response_at(10.0 * spacing).norm_sqr() < 1e-20);
    }

    #[test]
    fn ped_b_energy_is_unity() {
        let profile = TapDelayProfile::pedestrian_b();
        let mut rng = rng_from(9);
        let n = 16;
        let mut acc = vec![0.0; n];
        let reps = 10_000;
        for _ in 0..reps {
            let h = fading_frequency_response(&profile, n, 15e3, &mut rng).unwrap();
            for (a, c) in acc.iter_mut().zip(h) {
                *a += c.norm_sqr();
            }
        }
        for a in acc {
            let m = a / reps as f64;
            assert!((0.97..=1.03).contains(&m), "{m}");
        }
    }

    #[test]
    fn tap_table_parsing() {
        let t = "delay_ns,power_db\n0 0\n200, -0.9 # second\n\n800 -4.9\n";
        let p = TapDelayProfile::parse_table(t).unwrap();
        assert_eq!(p.delays_ns, vec![0.0, 200.0, 800.0]);
        assert!(TapDelayProfile::parse_table("0 0\n0 -1\n").is_err());
        assert!(TapDelayProfile::parse_table("0 0\nfoo\n").is_err());
        let total: f64 = TapDelayProfile::pedestrian_b().normalized_powers().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composed_channel_structure() {
        let geometry = UserGeometry {
            positions: vec![(100.0, 0.0), (0.0, 100.0), (-100.0, 0.0)],
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
        };
        let setup = ChannelSetup {
            n_subcarriers: 8,
            spacing_hz: 15e3,
            frequency_offset: 0.0,
            shadow_sigma_db: 0.0,
            pathloss: PathlossParams::default(),
            keep_coeffs: true,
        };
        let ch = compose_channel_matrix(&geometry, &[TapDelayProfile::flat()], &setup, &mut rng_from(2)).unwrap();
        for row in ch.gains.rows() {
            assert!(row.iter().all(|g| (g - row[0]).abs() <= 1e-12 * row[0]));
        }
        let coeffs = ch.coeffs.as_ref().unwrap();
        for (g, c) in ch.gains.iter().zip(coeffs.iter()) {
            assert!(g.is_finite() && *g >= 0.0);
            assert!((c.norm_sqr() - g).abs() <= 1e-9 * g);
        }
    }

    #[test]
    fn pathloss_scales_rows_multiplicatively() {
        // same stream, user moved so linear attenuation doubles (+10log10(2) dB)
        let p = PathlossParams::default();
        let d1 = 200.0;
        let d2 = d1 * 10f64.powf(10.0 * 2f64.log10() / p.decade_slope_db());
        let ratio_db = pathloss_db(d2, &p).unwrap() - pathloss_db(d1, &p).unwrap();
        assert!((ratio_db - 10.0 * 2f64.log10()).abs() < 1e-9);
        let setup = ChannelSetup::resource_blocks(10, 8.0, p);
        let geo = |d: f64| UserGeometry {
            positions: vec![(d, 0.0)],
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
        };
        let pb = [TapDelayProfile::pedestrian_b()];
        let a = compose_channel_matrix(&geo(d1), &pb, &setup, &mut rng_from(4)).unwrap();
        let b = compose_channel_matrix(&geo(d2), &pb, &setup, &mut rng_from(4)).unwrap();
        for (x, y) in a.gains.iter().zip(b.gains.iter()) {
            assert!((x / y - 2.0).abs() < 1e-9);
        }
    }
}
