//! Scenario configuration and the flat `key = value` file format.
//!
//! Keys are the field names of [`ScenarioConfig`] / [`LinkLevelConfig`];
//! anything else is rejected. `#` starts a comment.

use std::path::{Path, PathBuf};

use crate::channel::{PathlossParams, TapDelayProfile, RB_BANDWIDTH_HZ};
use crate::linklevel::{CodeSpec, Constellation, Fading, LinkSimConfig};
use crate::metrics::Scheme;
use crate::noma_alloc::GomRate;
use crate::{Error, Result};

/// Parses `key = value` lines into ordered pairs. Duplicate keys are an error.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        let key = key.trim().to_string();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

pub fn parse_schemes(value: &str) -> Result<Vec<Scheme>> {
    let mut schemes = Vec::new();
    for part in value.split(',').filter(|s| !s.trim().is_empty()) {
        let s: Scheme = part.parse()?;
        if !schemes.contains(&s) {
            schemes.push(s);
        }
    }
    if schemes.is_empty() {
        return Err(Error::Config("scheme list is empty".into()));
    }
    Ok(schemes)
}

/// `start:step:stop` (inclusive) or a comma-separated list, in dB.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| parse_value::<f64>("ebn0_grid_db", p.trim()))
            .collect::<Result<_>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(Error::Config(format!("grid `{value}` is not start:step:stop")));
        };
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!(
                "grid `{value}` needs step > 0 and stop >= start"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|p| parse_value::<f64>("ebn0_grid_db", p.trim()))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(Error::Config("Eb/N0 grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("Eb/N0 grid must be strictly ascending".into()));
    }
    Ok(grid)
}

/// How Jain's index is aggregated over drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JainMode {
    /// Index per drop, then the mean over drops.
    #[default]
    PerDrop,
    /// One index over every (drop, user) rate.
    Pooled,
}

/// System-level scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub max_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub shadow_sigma_db: f64,
    pub drops: u64,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub gom_rate: GomRate,
    pub jain_mode: JainMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k: 50,
            n: 50,
            l: 2,
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
            max_power_dbm: 23.0,
            bandwidth_hz: 10e6,
            rb_bandwidth_hz: RB_BANDWIDTH_HZ,
            noise_psd_dbm_hz: -173.0,
            shadow_sigma_db: 8.0,
            drops: 200,
            master_seed: 1,
            schemes: Scheme::ALL.to_vec(),
            gom_rate: GomRate::AllOpen,
            jain_mode: JainMode::PerDrop,
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_config(&text)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k = parse_value(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "l" => self.l = parse_value(key, value)?,
            "cell_radius_m" => self.cell_radius_m = parse_value(key, value)?,
            "min_distance_m" => self.min_distance_m = parse_value(key, value)?,
            "max_power_dbm" => self.max_power_dbm = parse_value(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse_value(key, value)?,
            "rb_bandwidth_hz" => self.rb_bandwidth_hz = parse_value(key, value)?,
            "noise_psd_dbm_hz" => self.noise_psd_dbm_hz = parse_value(key, value)?,
            "shadow_sigma_db" => self.shadow_sigma_db = parse_value(key, value)?,
            "drops" => self.drops = parse_value(key, value)?,
            "master_seed" => self.master_seed = parse_value(key, value)?,
            "schemes" => self.schemes = parse_schemes(value)?,
            "gom_rate" => {
                self.gom_rate = match value {
                    "all_open" => GomRate::AllOpen,
                    "nominee_only" => GomRate::NomineeOnly,
                    _ => return Err(Error::Config(format!("bad gom_rate `{value}` (all_open|nominee_only)"))),
                }
            }
            "jain_mode" => {
                self.jain_mode = match value {
                    "per_drop" => JainMode::PerDrop,
                    "pooled" => JainMode::Pooled,
                    _ => return Err(Error::Config(format!("bad jain_mode `{value}` (per_drop|pooled)"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k < 1 {
            return fail("k must be at least 1".into());
        }
        if self.n < 1 {
            return fail("n must be at least 1".into());
        }
        if self.l < 1 || self.l > self.k {
            return fail(format!("l must satisfy 1 <= l <= k (l = {}, k = {})", self.l, self.k));
        }
        if self.drops < 1 {
            return fail("drops must be at least 1".into());
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m < self.cell_radius_m) {
            return fail("need 0 < min_distance_m < cell_radius_m".into());
        }
        if !(self.rb_bandwidth_hz > 0.0) || self.n as f64 * self.rb_bandwidth_hz > self.bandwidth_hz * (1.0 + 1e-12) {
            return fail(format!(
                "{} resource blocks of {} Hz do not fit {} Hz",
                self.n, self.rb_bandwidth_hz, self.bandwidth_hz
            ));
        }
        if !self.shadow_sigma_db.is_finite() || self.shadow_sigma_db < 0.0 {
            return fail("shadow_sigma_db must be a nonnegative number".into());
        }
        if !self.max_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return fail("power and noise levels must be finite".into());
        }
        if self.schemes.is_empty() {
            return fail("no schemes selected".into());
        }
        Ok(())
    }

    /// Per-user power budget in mW.
    pub fn power_budget_mw(&self) -> f64 {
        10f64.powf(self.max_power_dbm / 10.0)
    }

    /// Noise power per resource block in mW.
    pub fn noise_per_rb_mw(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz + 10.0 * self.rb_bandwidth_hz.log10()) / 10.0)
    }

    pub fn pathloss(&self) -> PathlossParams {
        PathlossParams {
            min_distance_m: self.min_distance_m,
            ..PathlossParams::default()
        }
    }
}

/// Link-level BER experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLevelConfig {
    pub n_subcarriers: usize,
    pub spacing_hz: f64,
    pub l: usize,
    pub modulation: Constellation,
    pub coded: bool,
    pub ebn0_grid_db: Vec<f64>,
    pub target_errors: u64,
    pub max_frames: u64,
    pub symbols_per_block: usize,
    /// `pedb`, `rayleigh` (i.i.d. per subcarrier) or `flat`.
    pub fading: String,
    /// Optional `delay_ns power_db` table overriding `fading`.
    pub tap_profile_file: Option<PathBuf>,
    pub master_seed: u64,
}

impl Default for LinkLevelConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            spacing_hz: 15_000.0,
            l: 2,
            modulation: Constellation::Bpsk,
            coded: false,
            ebn0_grid_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            target_errors: 500,
            max_frames: 100_000,
            symbols_per_block: 10,
            fading: "pedb".into(),
            tap_profile_file: None,
            master_seed: 1,
        }
    }
}

impl LinkLevelConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_config(&text)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_subcarriers" => self.n_subcarriers = parse_value(key, value)?,
            "spacing_hz" => self.spacing_hz = parse_value(key, value)?,
            "l" => self.l = parse_value(key, value)?,
            "modulation" => {
                self.modulation = match value.to_ascii_lowercase().as_str() {
                    "bpsk" => Constellation::Bpsk,
                    "qpsk" => Constellation::Qpsk,
                    _ => return Err(Error::Config(format!("bad modulation `{value}` (bpsk|qpsk)"))),
                }
            }
            "coded" => self.coded = parse_bool(key, value)?,
            "ebn0_grid_db" => self.ebn0_grid_db = parse_grid(value)?,
            "target_errors" => self.target_errors = parse_value(key, value)?,
            "max_frames" => self.max_frames = parse_value(key, value)?,
            "symbols_per_block" => self.symbols_per_block = parse_value(key, value)?,
            "fading" => {
                if !matches!(value, "pedb" | "rayleigh" | "flat") {
                    return Err(Error::Config(format!("bad fading `{value}` (pedb|rayleigh|flat)")));
                }
                self.fading = value.to_string();
            }
            "tap_profile_file" => self.tap_profile_file = Some(PathBuf::from(value)),
            "master_seed" => self.master_seed = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 1 || self.symbols_per_block < 1 {
            return Err(Error::Config(
                "n_subcarriers and symbols_per_block must be positive".into(),
            ));
        }
        if self.l < 1 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if !(self.spacing_hz > 0.0) {
            return Err(Error::Config("spacing_hz must be positive".into()));
        }
        if self.ebn0_grid_db.is_empty() || self.ebn0_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("ebn0_grid_db must be non-empty and ascending".into()));
        }
        if self.max_frames < 1 {
            return Err(Error::Config("max_frames must be positive".into()));
        }
        Ok(())
    }

    /// Simulator settings; reads the tap table when one is configured.
    pub fn sim_config(&self) -> Result<LinkSimConfig> {
        let fading = match (&self.tap_profile_file, self.fading.as_str()) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Fading::Profile(TapDelayProfile::parse_table(&text).map_err(|e| Error::Config(e.to_string()))?)
            }
            (None, "rayleigh") => Fading::IidRayleigh,
            (None, "flat") => Fading::Profile(TapDelayProfile::flat()),
            (None, _) => Fading::Profile(TapDelayProfile::pedestrian_b()),
        };
        Ok(LinkSimConfig {
            n_subcarriers: self.n_subcarriers,
            spacing_hz: self.spacing_hz,
            constellation: self.modulation,
            code: self.coded.then(CodeSpec::k7_rate_half),
            fading,
            symbols_per_block: self.symbols_per_block,
            target_errors: self.target_errors,
            max_frames: self.max_frames,
            seed: self.master_seed,
            ..LinkSimConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_scenario() {
        let c = ScenarioConfig::default();
        assert_eq!(
            (c.n, c.cell_radius_m, c.max_power_dbm, c.bandwidth_hz),
            (50, 500.0, 23.0, 10e6)
        );
        assert_eq!((c.noise_psd_dbm_hz, c.shadow_sigma_db), (-173.0, 8.0));
        let expected = 10f64.powf((-173.0 + 10.0 * 180_000f64.log10()) / 10.0);
        assert!((c.noise_per_rb_mw() / expected - 1.0).abs() < 1e-12);
        assert!((c.power_budget_mw() - 199.526_231_496_887_9).abs() < 1e-9);
        c.validate().unwrap();
    }

    #[test]
    fn parses_file_and_rejects_unknown_keys() {
        let c = ScenarioConfig::from_str_config("k = 10\n# comment\nl=3\nschemes = noma-gom, mac-iwf\n").unwrap();
        assert_eq!((c.k, c.l), (10, 3));
        assert_eq!(c.schemes, vec![Scheme::NomaGom, Scheme::MacIwf]);
        assert!(matches!(
            ScenarioConfig::from_str_config("kk = 3"),
            Err(Error::Config(_))
        ));
        assert!(ScenarioConfig::from_str_config("k = 3\nk = 4").is_err());
        assert!(ScenarioConfig::from_str_config("k = 3\nl = 4").is_err());
        assert!(ScenarioConfig::from_str_config("drops = 0").is_err());
        assert!(ScenarioConfig::from_str_config("k").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:2:6").unwrap(), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(parse_grid("1,3.5").unwrap(), vec![1.0, 3.5]);
        assert!(parse_grid("3,1").is_err());
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn link_config() {
        let c = LinkLevelConfig::from_str_config("coded = true\nebn0_grid_db = 0:1:3\nfading = rayleigh").unwrap();
        let sim = c.sim_config().unwrap();
        assert!(sim.code.is_some());
        assert_eq!(sim.fading, Fading::IidRayleigh);
        assert!(LinkLevelConfig::from_str_config("fading = awgn").is_err());
        assert!(LinkLevelConfig::from_str_config("spacing = 1").is_err());
    }
}
