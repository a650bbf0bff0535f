//! System-level Monte Carlo: drops, scheme runs and aggregation.

use std::path::Path;

use rayon::prelude::*;

use super::config::{JainMode, ScenarioConfig};
use super::output;
use crate::channel::{compose_channel_matrix, place_users, ChannelMatrix, ChannelSetup, TapDelayProfile};
use crate::metrics::{jain_index, per_user_rates, MetricRecord, Scheme};
use crate::noma_alloc::{allocate, AllocationState, AllocatorConfig, Criterion};
use crate::ofdma_alloc::pf_allocate;
use crate::powalloc::{iterative_waterfilling, IwfSettings};
use crate::seed::{derive, rng_from};
use crate::{Error, Result};

/// Everything one drop produced, for inspection beyond the records.
#[derive(Debug, Clone)]
pub struct DropOutcome {
    pub channel: ChannelMatrix,
    pub states: Vec<(Scheme, AllocationState)>,
    pub records: Vec<MetricRecord>,
    /// False if the IWF bound stopped on its iteration cap.
    pub iwf_converged: bool,
}

/// Seed of drop `drop_id` under `master_seed`.
pub fn drop_seed(master_seed: u64, drop_id: u64) -> u64 {
    derive(master_seed, drop_id)
}

/// Draws the geometry and channel of one drop.
pub fn draw_channel(config: &ScenarioConfig, drop_id: u64) -> Result<ChannelMatrix> {
    let mut rng = rng_from(drop_seed(config.master_seed, drop_id));
    let geometry = place_users(config.k, config.cell_radius_m, config.min_distance_m, &mut rng)?;
    let setup = ChannelSetup::resource_blocks(config.n, config.shadow_sigma_db, config.pathloss());
    compose_channel_matrix(&geometry, &[TapDelayProfile::pedestrian_b()], &setup, &mut rng)
}

fn run_scheme(config: &ScenarioConfig, scheme: Scheme, channel: &ChannelMatrix) -> Result<(AllocationState, bool)> {
    let budgets = vec![config.power_budget_mw(); config.k];
    let noise = config.noise_per_rb_mw();
    let noma = |criterion| AllocatorConfig {
        gom_rate: config.gom_rate,
        ..AllocatorConfig::new(config.l, criterion)
    };
    Ok(match scheme {
        Scheme::NomaLrm => (allocate(channel, &budgets, noise, noma(Criterion::Lrm))?, true),
        Scheme::NomaGom => (allocate(channel, &budgets, noise, noma(Criterion::Gom))?, true),
        Scheme::OfdmaPf => (pf_allocate(channel, &budgets, noise)?, true),
        Scheme::MacIwf => {
            let out = iterative_waterfilling(channel, &budgets, noise, IwfSettings::default())?;
            (out.state, out.converged)
        }
    })
}

/// Runs every configured scheme on one shared channel realization.
pub fn run_system_drop_detailed(config: &ScenarioConfig, drop_id: u64) -> Result<DropOutcome> {
    let in_drop = |e: Error| Error::Drop {
        drop_id,
        source: Box::new(e),
    };
    config.validate().map_err(in_drop)?;
    let channel = draw_channel(config, drop_id).map_err(in_drop)?;
    let noise = config.noise_per_rb_mw();
    let mut states = Vec::with_capacity(config.schemes.len());
    let mut records = Vec::with_capacity(config.schemes.len());
    let mut iwf_converged = true;
    for &scheme in &config.schemes {
        let (state, converged) = run_scheme(config, scheme, &channel).map_err(in_drop)?;
        iwf_converged &= converged;
        state
            .check_invariants()
            .map_err(|m| in_drop(Error::InvalidArgument(format!("{scheme} allocation invalid: {m}"))))?;
        let rates = per_user_rates(&state, &channel, noise, true);
        records.push(MetricRecord::new(scheme, drop_id, state.load_limit, rates, config.n));
        states.push((scheme, state));
    }
    Ok(DropOutcome {
        channel,
        states,
        records,
        iwf_converged,
    })
}

/// One [`MetricRecord`] per configured scheme.
pub fn run_system_drop(config: &ScenarioConfig, drop_id: u64) -> Result<Vec<MetricRecord>> {
    run_system_drop_detailed(config, drop_id).map(|o| o.records)
}

/// Mean and 95% half-width (normal approximation; zero for one sample).
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub k: usize,
    pub l: usize,
    pub drops: u64,
    pub mean_sum_se: f64,
    pub ci95_sum_se: f64,
    pub mean_jain: f64,
    pub ci95_jain: f64,
    /// Mean sum SE over the MAC-IWF mean, when that scheme ran.
    pub ratio_to_iwf: Option<f64>,
    /// Drops whose Jain index was undefined (all rates zero).
    pub jain_undefined: u64,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: ScenarioConfig,
    /// Drop-major, scheme order as configured.
    pub records: Vec<MetricRecord>,
    pub summary: Vec<SchemeSummary>,
    /// Drops on which IWF hit its iteration cap.
    pub iwf_unconverged: u64,
}

impl CampaignResult {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.scheme == scheme)
    }

    pub fn records_for(&self, scheme: Scheme) -> impl Iterator<Item = &MetricRecord> {
        self.records.iter().filter(move |r| r.scheme == scheme)
    }
}

pub fn summarize(config: &ScenarioConfig, records: &[MetricRecord]) -> Vec<SchemeSummary> {
    let mut out: Vec<SchemeSummary> = config
        .schemes
        .iter()
        .map(|&scheme| {
            let mine: Vec<&MetricRecord> = records.iter().filter(|r| r.scheme == scheme).collect();
            let se: Vec<f64> = mine.iter().map(|r| r.sum_se).collect();
            let (mean_sum_se, ci95_sum_se) = mean_ci95(&se);
            let jains: Vec<f64> = mine.iter().filter_map(|r| r.jain).collect();
            let (mean_jain, ci95_jain) = match config.jain_mode {
                JainMode::PerDrop => mean_ci95(&jains),
                JainMode::Pooled => {
                    let pooled: Vec<f64> = mine.iter().flat_map(|r| r.per_user_rates.iter().copied()).collect();
                    (jain_index(&pooled).unwrap_or(f64::NAN), 0.0)
                }
            };
            SchemeSummary {
                scheme,
                k: config.k,
                l: mine.first().map_or(config.l, |r| r.load_limit),
                drops: mine.len() as u64,
                mean_sum_se,
                ci95_sum_se,
                mean_jain,
                ci95_jain,
                ratio_to_iwf: None,
                jain_undefined: (mine.len() - jains.len()) as u64,
            }
        })
        .collect();
    if let Some(iwf) = out.iter().find(|s| s.scheme == Scheme::MacIwf).map(|s| s.mean_sum_se) {
        for s in &mut out {
            s.ratio_to_iwf = Some(s.mean_sum_se / iwf);
        }
    }
    out
}

/// Runs `config.drops` drops in parallel and aggregates them. With
/// `out_dir`, writes `system_drops.csv` and `system_summary.csv` there.
pub fn run_campaign(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<CampaignResult> {
    config.validate()?;
    let outcomes: Vec<DropOutcome> = (0..config.drops)
        .into_par_iter()
        .map(|d| run_system_drop_detailed(config, d))
        .collect::<Result<_>>()?;
    let iwf_unconverged = outcomes.iter().filter(|o| !o.iwf_converged).count() as u64;
    let records: Vec<MetricRecord> = outcomes.into_iter().flat_map(|o| o.records).collect();
    let summary = summarize(config, &records);
    let result = CampaignResult {
        config: config.clone(),
        records,
        summary,
        iwf_unconverged,
    };
    if let Some(dir) = out_dir {
        output::write_system_csvs(dir, &result)?;
    }
    Ok(result)
}
