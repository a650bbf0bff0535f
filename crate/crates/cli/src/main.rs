use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noma_core::harness::config::parse_pairs;
use noma_core::harness::{run_campaign, run_link_campaign, LinkLevelConfig, ScenarioConfig};
use noma_core::Error;

/// Uplink NOMA system- and link-level simulator.
#[derive(Debug, Parser)]
#[command(name = "noma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo drops comparing NOMA, OFDMA and the MAC bound.
    Syslevel(SysArgs),
    /// BER curves for OFDMA and NOMA with ML multi-user detection.
    Linklevel(LinkArgs),
}

#[derive(Debug, Args)]
struct SysArgs {
    /// key=value scenario file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    drops: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of noma-lrm,noma-gom,ofdma-pf,mac-iwf
    #[arg(long)]
    schemes: Option<String>,
    /// Directory for system_drops.csv and system_summary.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LinkArgs {
    /// key=value link-level file
    #[arg(long)]
    config: PathBuf,
    /// Enable the rate-1/2 convolutional code
    #[arg(long)]
    coded: bool,
    /// Eb/N0 grid in dB, `start:step:stop` or a comma list
    #[arg(long)]
    ebn0: Option<String>,
    /// Directory for link_ber.csv
    #[arg(long)]
    out: PathBuf,
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pairs(&text)
}

fn syslevel(args: SysArgs) -> Result<(), Error> {
    let mut cfg = ScenarioConfig::default();
    for (k, v) in read_pairs(&args.config)? {
        cfg.set(&k, &v)?;
    }
    let overrides = [
        ("k", args.k.map(|v| v.to_string())),
        ("l", args.l.map(|v| v.to_string())),
        ("drops", args.drops.map(|v| v.to_string())),
        ("master_seed", args.seed.map(|v| v.to_string())),
        ("schemes", args.schemes),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            cfg.set(key, &value)?;
        }
    }
    cfg.validate()?;
    let result = run_campaign(&cfg, Some(&args.out))?;
    println!("scheme      mean_sum_se  ci95     mean_jain  ratio_to_iwf");
    for s in &result.summary {
        let ratio = s.ratio_to_iwf.map_or("-".to_string(), |r| format!("{r:.4}"));
        println!(
            "{:<11} {:<12.4} {:<8.4} {:<10.4} {ratio}",
            s.scheme.label(),
            s.mean_sum_se,
            s.ci95_sum_se,
            s.mean_jain
        );
    }
    if result.iwf_unconverged > 0 {
        eprintln!("warning: IWF hit its iteration cap on {} drops", result.iwf_unconverged);
    }
    Ok(())
}

fn linklevel(args: LinkArgs) -> Result<(), Error> {
    let mut cfg = LinkLevelConfig::default();
    for (k, v) in read_pairs(&args.config)? {
        cfg.set(&k, &v)?;
    }
    if args.coded {
        cfg.coded = true;
    }
    if let Some(grid) = args.ebn0 {
        cfg.set("ebn0_grid_db", &grid)?;
    }
    cfg.validate()?;
    let points = run_link_campaign(&cfg, Some(&args.out))?;
    for p in &points {
        let flag = if p.flagged { " (frame cap)" } else { "" };
        println!(
            "{:<6} {:>6.2} dB  ber {:.4e}{flag}",
            p.scheme.label(),
            p.ebn0_db,
            p.ber()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Syslevel(args) => syslevel(args),
        Command::Linklevel(args) => linklevel(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
