//! Link-level campaign: OFDMA and NOMA BER curves on a shared Eb/N0 grid.

use std::path::Path;

use super::config::LinkLevelConfig;
use super::output;
use crate::linklevel::{simulate_ber, BerPoint, LinkScheme};
use crate::Result;

/// Simulates OFDMA and `l`-user NOMA at every grid point. With `out_dir`,
/// writes `link_ber.csv` there.
pub fn run_link_campaign(config: &LinkLevelConfig, out_dir: Option<&Path>) -> Result<Vec<BerPoint>> {
    config.validate()?;
    let sim = config.sim_config()?;
    let schemes = [LinkScheme::Ofdma, LinkScheme::Noma { users: config.l }];
    let points = simulate_ber(&sim, &schemes, &config.ebn0_grid_db)?;
    if let Some(dir) = out_dir {
        output::write_link_csv(dir, &points)?;
    }
    Ok(points)
}

/// (Eb/N0, BER) pairs of one curve, in grid order.
pub fn curve(points: &[BerPoint], scheme: &str, coded: bool) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.scheme.label() == scheme && p.coded == coded)
        .map(|p| (p.ebn0_db, p.ber()))
        .collect()
}
