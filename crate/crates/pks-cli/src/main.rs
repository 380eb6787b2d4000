//! Batch driver: run one scenario, write its diagnostics, reports,
//! snapshots, and manifest into an output directory.
//!
//! Exit codes: 0 healthy completion, 2 blow-up detected (a scientific
//! outcome, not a failure), 1 error.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pks_core::dynamics::Verdict;
use pks_core::experiments::{self, ChecksConfig, ScenarioConfig};

use config::{parse_config, OutputConfig};
use output::{write_manifest, write_run_artifacts, ManifestInput};

#[derive(Parser, Debug)]
#[command(
    name = "pks",
    version,
    about = "2D chemotaxis aggregation in a linear strain flow: solver and diagnostics"
)]
struct Args {
    /// Scenario file (key = value sections; see README)
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,

    /// Named preset: heat_sanity, advection_sanity, static_subcritical,
    /// static_critical, static_supercritical, strained_supercritical
    #[arg(long)]
    scenario: Option<String>,

    /// Output directory for CSVs, snapshots, and the manifest
    #[arg(long, default_value = "pks-out")]
    out: PathBuf,

    /// Override the cells per side (must be even)
    #[arg(long)]
    resolution: Option<usize>,

    /// Override the time horizon
    #[arg(long)]
    tmax: Option<f64>,

    /// Keep every k-th record's field as a PKS-FIELD snapshot
    #[arg(long)]
    snapshot_every: Option<usize>,

    /// Check toggles: all, none, or a comma-separated list
    #[arg(long)]
    checks: Option<String>,

    /// Suppress the per-check summary on stdout
    #[arg(long)]
    quiet: bool,
}

fn build_config(args: &Args) -> Result<(ScenarioConfig, OutputConfig), String> {
    let (mut cfg, mut out) = if let Some(path) = &args.config {
        parse_config(path).map_err(|e| format!("{}: {e}", path.display()))?
    } else if let Some(name) = &args.scenario {
        let cfg = experiments::preset(name).map_err(|e| e.to_string())?;
        (cfg, OutputConfig::default())
    } else {
        return Err("one of --config or --scenario is required".into());
    };

    if let Some(n) = args.resolution {
        if n == 0 || n % 2 != 0 {
            return Err(format!(
                "--resolution: N must be even and positive, got {n}"
            ));
        }
        cfg.resolution = n;
    }
    if let Some(t) = args.tmax {
        if !(t > 0.0) {
            return Err(format!("--tmax must be positive, got {t}"));
        }
        cfg.t_max = t;
    }
    if let Some(k) = args.snapshot_every {
        cfg.snapshot_every = k;
    }
    if let Some(list) = &args.checks {
        let toggles = ChecksConfig::parse_list(list).map_err(|e| e.to_string())?;
        cfg.checks = ChecksConfig {
            tol_log_hls_rel: cfg.checks.tol_log_hls_rel,
            tol_negative_entropy_rel: cfg.checks.tol_negative_entropy_rel,
            tol_energy_rel: cfg.checks.tol_energy_rel,
            tol_strip_rel: cfg.checks.tol_strip_rel,
            tol_moment_rel: cfg.checks.tol_moment_rel,
            ..toggles
        };
    }
    if args.quiet {
        out.quiet = true;
    }
    Ok((cfg, out))
}

fn summarize(outcome: &experiments::RunOutcome) {
    println!(
        "run {}: verdict={} t_end={:.6} records={} steps={}",
        outcome.name,
        outcome.verdict.name(),
        outcome.t_end,
        outcome.history.len(),
        outcome.final_state.step_count
    );
    if let Some(td) = outcome.detection_time {
        println!("blow-up detected at t = {td:.6}");
    }
    if let Some(tb) = outcome.t_box {
        println!("box-validity horizon t_box = {tb:.6}");
    }
    let pass_line = |name: &str, rows: &[pks_core::diagnostics::InequalityReport]| {
        if rows.is_empty() {
            return;
        }
        let worst = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        let ok = rows.iter().all(|r| r.pass);
        println!(
            "check {name}: {} ({} records, worst slack {worst:.3e})",
            if ok { "pass" } else { "FAIL" },
            rows.len()
        );
    };
    pass_line("log_hls", &outcome.log_hls_rows);
    pass_line("negative_entropy", &outcome.negative_entropy_rows);
    if let Some(split) = &outcome.splitting {
        pass_line("strip_mass_bound", &split.strip_rows);
        if let Some(rate) = split.fitted_rate {
            println!(
                "check splitting: fitted y+ rate {rate:.4} over {} records, \
                 spread prefactor {:.3e}, R^2 = {:.3}",
                split.fit_points, split.spread_prefactor, split.r_squared
            );
        }
    }
    if let Some(mb) = &outcome.moment_bounds {
        println!(
            "check moment_envelopes: {} ({} rows)",
            if mb.pass { "pass" } else { "FAIL" },
            mb.rows.len()
        );
    }
    println!(
        "check energy_monotone: {} (max uphill {:.3e}, tolerance {:.3e})",
        if outcome.max_energy_uphill <= outcome.energy_tolerance {
            "pass"
        } else {
            "FAIL"
        },
        outcome.max_energy_uphill,
        outcome.energy_tolerance
    );
    if let Some(v) = &outcome.virial {
        println!(
            "virial residuals: worst |dV/dt residual| {:.3e}, worst W slack {:.3e}",
            v.worst_v_residual(),
            v.worst_w_slack()
        );
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let start_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);

    let (cfg, outcfg) = match build_config(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = outcfg.dir.clone().unwrap_or_else(|| args.out.clone());

    match experiments::run(&cfg) {
        Ok(outcome) => {
            let exit = match outcome.verdict {
                Verdict::BlownUp => 2,
                _ => 0,
            };
            let files = match write_run_artifacts(&dir, &outcome) {
                Ok(a) => a.files,
                Err(e) => {
                    eprintln!("error: writing artifacts: {e}");
                    return ExitCode::from(1);
                }
            };
            let manifest = ManifestInput {
                cfg: &cfg,
                outcome: Some(&outcome),
                error: None,
                files: &files,
                start_unix,
                exit_code: exit,
            };
            if let Err(e) = write_manifest(&dir, &manifest) {
                eprintln!("error: writing manifest: {e}");
                return ExitCode::from(1);
            }
            if !outcfg.quiet {
                summarize(&outcome);
                println!("wrote {} files to {}", files.len() + 1, dir.display());
            }
            ExitCode::from(exit as u8)
        }
        Err(e) => {
            // manifest still gets written so failed runs stay inspectable
            let manifest = ManifestInput {
                cfg: &cfg,
                outcome: None,
                error: Some(&e.to_string()),
                files: &[],
                start_unix,
                exit_code: 1,
            };
            let _ = write_manifest(&dir, &manifest);
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
