//! CSV emission. Floats use Rust's shortest round-trip formatting; an
//! undefined value is written as an empty field.

use std::fs;
use std::path::Path;

use super::system::CampaignResult;
use crate::linklevel::BerPoint;
use crate::{Error, Result};

pub const SYSTEM_DROPS_FILE: &str = "system_drops.csv";
pub const SYSTEM_SUMMARY_FILE: &str = "system_summary.csv";
pub const LINK_FILE: &str = "link_ber.csv";

pub const SYSTEM_DROPS_HEADER: [&str; 7] = ["drop_id", "scheme", "K", "N", "L", "sum_se_bps_hz", "jain"];
pub const SYSTEM_SUMMARY_HEADER: [&str; 9] = [
    "scheme",
    "K",
    "L",
    "drops",
    "mean_sum_se",
    "ci95_sum_se",
    "mean_jain",
    "ci95_jain",
    "ratio_to_iwf",
];
pub const LINK_HEADER: [&str; 7] = ["scheme", "coded", "ebn0_db", "bits", "bit_errors", "ber", "flagged"];

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn system_drop_rows(result: &CampaignResult) -> Vec<Vec<String>> {
    result
        .records
        .iter()
        .map(|r| {
            vec![
                r.drop_id.to_string(),
                r.scheme.label().to_string(),
                r.users.to_string(),
                r.subcarriers.to_string(),
                r.load_limit.to_string(),
                r.sum_se.to_string(),
                opt(r.jain),
            ]
        })
        .collect()
}

pub fn system_summary_rows(result: &CampaignResult) -> Vec<Vec<String>> {
    result
        .summary
        .iter()
        .map(|s| {
            vec![
                s.scheme.label().to_string(),
                s.k.to_string(),
                s.l.to_string(),
                s.drops.to_string(),
                s.mean_sum_se.to_string(),
                s.ci95_sum_se.to_string(),
                opt(Some(s.mean_jain)),
                opt(Some(s.ci95_jain)),
                opt(s.ratio_to_iwf),
            ]
        })
        .collect()
}

pub fn link_rows(points: &[BerPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                p.scheme.label().to_string(),
                p.coded.to_string(),
                p.ebn0_db.to_string(),
                p.bits.to_string(),
                p.bit_errors.to_string(),
                p.ber().to_string(),
                p.flagged.to_string(),
            ]
        })
        .collect()
}

fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(dir, name)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

pub fn write_system_csvs(dir: &Path, result: &CampaignResult) -> Result<()> {
    write_table(dir, SYSTEM_DROPS_FILE, &SYSTEM_DROPS_HEADER, &system_drop_rows(result))?;
    write_table(
        dir,
        SYSTEM_SUMMARY_FILE,
        &SYSTEM_SUMMARY_HEADER,
        &system_summary_rows(result),
    )
}

pub fn write_link_csv(dir: &Path, points: &[BerPoint]) -> Result<()> {
    write_table(dir, LINK_FILE, &LINK_HEADER, &link_rows(points))
}
