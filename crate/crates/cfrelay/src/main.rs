use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cfrelay::config::{ConfigError, RateSpec, Scheme, SimConfig};
use cfrelay::report::{ber_svg, mi_csv, sweep_csv, CSV_VERSION};
use cfrelay::sim::{resolve_rates, run_sweep, RelayCodes, RelayModel, SchemeCodes};
use cfrelay::files;
use cfrelay_core::constellation::{Constellation, Labeling};
use cfrelay_core::mlc::{assign_rates, mi_relay_constraint, mi_source_levels, SystemModel};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cfrelay", about = "Compress-forward relay simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat `key = value`; see `cfrelay template`).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `schemes`, e.g. `tcq_cf,direct_only`.
    #[arg(long)]
    scheme: Option<String>,
    /// Overrides `snr_db`, e.g. `6,6.5,7`.
    #[arg(long)]
    snr: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// BER/FER sweep of every configured scheme; writes results.csv,
    /// ber.svg and metadata.json.
    Sweep(Common),
    /// Level mutual informations and the assigned rate profile at each SNR
    /// point; writes mi_<snr>.csv.
    Rates(Common),
    /// Writes the codes as alist files and the trellis quantizer of each
    /// SNR point as JSON.
    Design(Common),
    /// Prints the default configuration.
    Template,
}

fn load(c: &Common) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::load(&c.config)?;
    let value = |key: &str, msg: String| ConfigError::Value { key: key.into(), msg };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = &c.scheme {
        cfg.schemes = s
            .split(',')
            .map(|x| x.parse::<Scheme>().map_err(|e| value("--scheme", e)))
            .collect::<Result<_, _>>()?;
    }
    if let Some(s) = &c.snr {
        cfg.snr_db = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| value("--snr", format!("`{x}`: {e}"))))
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn sweep(c: &Common) -> Result<()> {
    let cfg = load(c)?;
    out_dir(&c.out)?;
    let result = run_sweep(&cfg, |r| {
        eprintln!("{:<12} {:>6} dB  ber {:.3e} ± {:.1e}  fer {:.3}  iters {:.1}", r.scheme, r.snr_db, r.ber, r.ber_ci95, r.fer, r.mean_iters)
    })?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write(c.out.join("results.csv"), &sweep_csv(&result.rows))?;
    write(c.out.join("ber.svg"), &ber_svg(&result.rows))?;
    let meta = json!({
        "csv_version": CSV_VERSION,
        "snr_definition": "snr_db = 10 log10(ps / n3_var); pr = ps * 10^(pr_offset_db / 10)",
        "ber_ci95": "1.96 * standard error of the per-block bit error rate",
        "fer_ci95": "1.96 * binomial standard error over blocks",
        "source_rates": result.rates,
        "warnings": result.warnings,
        "config": cfg.echo(),
    });
    write(c.out.join("metadata.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

fn rates(c: &Common) -> Result<()> {
    let cfg = load(c)?;
    out_dir(&c.out)?;
    let con = match cfg.labeling {
        Labeling::SetPartition => Constellation::build(cfg.modulation),
        Labeling::Gray => Constellation::build_gray(cfg.modulation),
    };
    for &snr in &cfg.snr_db {
        let ch = cfg.channel_at(snr);
        let relay = RelayModel::tcq(&cfg, &con, &ch)?;
        let sys = SystemModel { constellation: &con, channel: ch, relay: Some((&relay.model, &relay.table)) };
        let mis = mi_source_levels(&sys, cfg.mi_samples, cfg.seed)?;
        let est: Vec<f64> = mis.levels.iter().map(|e| e.mi).collect();
        let profile = match assign_rates(&est, &cfg.available_rates, cfg.rate_margin) {
            Ok(p) => Some(p),
            Err(e) => {
                eprintln!("{snr} dB: {e}");
                None
            }
        };
        let constraint = mi_relay_constraint(&sys, cfg.mi_samples, cfg.seed)?;
        eprintln!(
            "{snr} dB: total {:.4} bits, profile total {}, relay constraint {:.4} <= {:.4}: {}",
            mis.total.mi,
            profile.as_ref().map_or("-".into(), |p| format!("{:.4}", p.total)),
            constraint.lhs.mi,
            constraint.rhs.mi,
            constraint.feasible
        );
        write(c.out.join(format!("mi_{snr}.csv")), &mi_csv(&mis.levels, profile.as_ref()))?;
    }
    Ok(())
}

fn design(c: &Common) -> Result<()> {
    let cfg = load(c)?;
    out_dir(&c.out)?;
    let (rates, _) = resolve_rates(&cfg)?;
    if matches!(cfg.rates, RateSpec::Auto) {
        eprintln!("assigned rates {rates:?}");
    }
    let relay = RelayCodes::build(&cfg)?;
    for (i, code) in relay.codes.iter().enumerate() {
        files::save_alist(&c.out.join(format!("relay_level{}.alist", i + 1)), code)?;
    }
    for &scheme in &cfg.schemes {
        let codes = SchemeCodes::build(&cfg, scheme, &rates)?;
        if scheme == Scheme::DirectOnly || scheme == Scheme::TcqCf || scheme == Scheme::ScalarCf {
            for (i, code) in codes.source.iter().enumerate() {
                files::save_alist(&c.out.join(format!("source_level{}.alist", i + 1)), code)?;
            }
        } else {
            files::save_alist(&c.out.join("source_bicm.alist"), &codes.source[0])?;
        }
        if scheme == Scheme::TcqCf {
            for &snr in &cfg.snr_db {
                let m = RelayModel::tcq(&cfg, &codes.constellation, &cfg.channel_at(snr))?;
                files::save_quantizer(&c.out.join(format!("quantizer_{snr}.json")), &m.model)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(c) => sweep(c),
        Command::Rates(c) => rates(c),
        Command::Design(c) => design(c),
        Command::Template => {
            print!("{}", cfrelay::config::template());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
