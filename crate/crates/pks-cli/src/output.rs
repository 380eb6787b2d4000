//! Run-directory artifacts: diagnostics CSV, one CSV per inequality check,
//! optional field snapshots, and the manifest. The manifest is written even
//! when a run fails, and lists every file the run emitted.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pks_core::diagnostics::{
    write_diagnostics_csv, write_inequality_csv, InequalityReport, VirialReport,
};
use pks_core::experiments::{AmplitudeMode, RunOutcome, ScenarioConfig};
use pks_core::Result;

pub struct Artifacts {
    pub files: Vec<String>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(path)?;
    files.push(name.to_string());
    Ok(BufWriter::new(f))
}

fn write_virial_csv(report: &VirialReport, w: &mut impl Write) -> Result<()> {
    writeln!(w, "t,dv_dt,dv_expected,v_residual,dw_dt,dw_floor,w_slack")?;
    for r in &report.rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.dv_dt, r.dv_expected, r.v_residual, r.dw_dt, r.dw_floor, r.w_slack
        )?;
    }
    Ok(())
}

fn split_by_name<'a>(
    rows: &'a [InequalityReport],
) -> Vec<(&'static str, Vec<InequalityReport>)> {
    let mut groups: Vec<(&'static str, Vec<InequalityReport>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(n, _)| *n == row.name) {
            Some((_, v)) => v.push(row.clone()),
            None => groups.push((row.name, vec![row.clone()])),
        }
    }
    let _ = rows;
    groups
}

/// Write every run artifact into `dir`. Returns the emitted file list.
pub fn write_run_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let mut w = create(dir, "diagnostics.csv", &mut files)?;
    write_diagnostics_csv(&outcome.history, &mut w)?;

    if !outcome.log_hls_rows.is_empty() {
        let mut w = create(dir, "log_hls.csv", &mut files)?;
        write_inequality_csv(&outcome.log_hls_rows, &mut w)?;
    }
    if !outcome.negative_entropy_rows.is_empty() {
        let mut w = create(dir, "negative_entropy.csv", &mut files)?;
        write_inequality_csv(&outcome.negative_entropy_rows, &mut w)?;
    }
    if let Some(split) = &outcome.splitting {
        let mut w = create(dir, "strip_mass_bound.csv", &mut files)?;
        write_inequality_csv(&split.strip_rows, &mut w)?;
    }
    if let Some(mb) = &outcome.moment_bounds {
        for (name, rows) in split_by_name(&mb.rows) {
            let file = format!("{name}.csv");
            let mut w = create(dir, &file, &mut files)?;
            write_inequality_csv(&rows, &mut w)?;
        }
    }
    if let Some(virial) = &outcome.virial {
        let mut w = create(dir, "virial_residuals.csv", &mut files)?;
        write_virial_csv(virial, &mut w)?;
    }
    for (idx, (t, field)) in outcome.snapshots.iter().enumerate() {
        let name = format!("field_{idx:04}.dat");
        let mut w = create(dir, &name, &mut files)?;
        field.write_snapshot(&mut w, *t)?;
    }
    Ok(Artifacts { files })
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub struct ManifestInput<'a> {
    pub cfg: &'a ScenarioConfig,
    pub outcome: Option<&'a RunOutcome>,
    pub error: Option<&'a str>,
    pub files: &'a [String],
    pub start_unix: f64,
    pub exit_code: i32,
}

/// Plain-text `key = value` manifest sufficient to reproduce the run.
pub fn write_manifest(dir: &Path, input: &ManifestInput<'_>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("manifest.txt");
    let mut w = BufWriter::new(File::create(&path)?);
    let cfg = input.cfg;
    writeln!(w, "tool = pks {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "scenario = {}", cfg.name)?;
    writeln!(w, "status = {}", if input.error.is_some() { "error" } else { "ok" })?;
    writeln!(w, "exit_code = {}", input.exit_code)?;
    writeln!(w, "start_unix = {:.3}", input.start_unix)?;
    let end = unix_now();
    writeln!(w, "end_unix = {end:.3}")?;
    writeln!(w, "wall_seconds = {:.3}", end - input.start_unix)?;
    writeln!(w, "resolution = {}", cfg.resolution)?;
    writeln!(w, "half_width = {}", cfg.half_width)?;
    if let Ok(grid) = cfg.grid() {
        writeln!(w, "spacing = {:.16e}", grid.spacing())?;
    }
    writeln!(w, "epsilon_cells = {}", cfg.epsilon_cells)?;
    if let Ok(eps) = cfg.epsilon() {
        writeln!(w, "epsilon = {eps:.16e}")?;
    }
    writeln!(w, "bridge = {}", cfg.bridge.name())?;
    writeln!(w, "transport = {}", cfg.transport.name())?;
    writeln!(w, "grad_mode = {}", cfg.grad_mode.name())?;
    writeln!(w, "cfl = {}", cfg.cfl)?;
    writeln!(w, "dt_policy = adaptive (cfl*h/max|u| each step, halved on breach)")?;
    writeln!(w, "diffusion = {}", cfg.diffusion)?;
    writeln!(w, "chemotaxis = {}", cfg.chemotaxis)?;
    writeln!(w, "delta = {}", cfg.delta)?;
    writeln!(w, "eta = {}", cfg.eta)?;
    match cfg.amplitude {
        AmplitudeMode::Explicit(a) => writeln!(w, "amplitude_mode = explicit {a:.16e}")?,
        AmplitudeMode::Auto => writeln!(w, "amplitude_mode = auto")?,
    }
    writeln!(w, "t_max = {}", cfg.t_max)?;
    writeln!(
        w,
        "blowup_thresholds = ratio {} support_fraction {} support_ratio {} trend {}",
        cfg.thresholds.ratio,
        cfg.thresholds.support_fraction,
        cfg.thresholds.support_ratio,
        cfg.thresholds.trend_window
    )?;

    if let Some(out) = input.outcome {
        writeln!(w, "verdict = {}", out.verdict.name())?;
        writeln!(w, "amplitude = {:.16e}", out.resolved_amplitude)?;
        writeln!(w, "r_squared = {:.16e}", out.hypothesis.r_squared)?;
        writeln!(w, "mass = {:.16e}", out.hypothesis.mass)?;
        writeln!(w, "t_end = {:.16e}", out.t_end)?;
        if let Some(tb) = out.t_box {
            writeln!(w, "t_box = {tb:.16e}")?;
        }
        if let Some(td) = out.detection_time {
            writeln!(w, "detection_time = {td:.16e}")?;
        }
        writeln!(w, "records = {}", out.history.len())?;
        writeln!(w, "steps = {}", out.final_state.step_count)?;
        writeln!(w, "boundary_outflow = {:.16e}", out.final_state.boundary_outflow)?;
        writeln!(w, "clamped_mass = {:.16e}", out.final_state.clamped_mass)?;
        writeln!(
            w,
            "max_interior_drift = {:.16e}",
            out.final_state.max_interior_drift
        )?;
        writeln!(
            w,
            "max_symmetry_error = {:.16e}",
            out.final_state.max_symmetry_error
        )?;
        writeln!(w, "cfl_halvings = {}", out.final_state.cfl_halvings)?;
        writeln!(w, "kernel_max_grad = {:.16e}", out.kernel_bounds.max_grad)?;
        writeln!(w, "checks_passed = {}", out.checks_passed())?;
    }
    if let Some(e) = input.error {
        writeln!(w, "error = {e}")?;
    }
    for f in input.files {
        writeln!(w, "file = {f}")?;
    }
    writeln!(w, "file = manifest.txt")?;
    Ok(path)
}
