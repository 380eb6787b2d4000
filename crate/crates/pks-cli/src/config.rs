//! Line-oriented `key = value` scenario files with sections `[initial]`,
//! `[numerics]`, `[strain]`, `[checks]`, `[output]`. A top-level
//! `preset = <name>` line seeds the defaults; everything after overrides.
//! Unknown keys are errors, reported with their line number.

use std::path::{Path, PathBuf};

use pks_core::dynamics::TransportScheme;
use pks_core::experiments::{preset, AmplitudeMode, ChecksConfig, InitialData, ScenarioConfig};
use pks_core::kernel::{BridgeKind, GradMode};

/// Output-related settings that live beside the scenario itself.
#[derive(Debug, Clone, Default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| err(line, format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| err(line, format!("{key}: expected an integer, got {value:?}")))
}

fn parse_switch(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("{key}: expected on/off, got {value:?}"))),
    }
}

/// Parse a scenario file. Returns the scenario plus output settings.
pub fn parse_config(path: &Path) -> Result<(ScenarioConfig, OutputConfig), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<(ScenarioConfig, OutputConfig), ConfigError> {
    let mut cfg: Option<ScenarioConfig> = None;
    let mut out = OutputConfig::default();
    let mut section = String::new();
    // deferred single-bump pieces: the kind may arrive before its parameters
    let mut pending: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(lineno, format!("malformed section header {line:?}")))?;
            match name {
                "initial" | "numerics" | "strain" | "checks" | "output" => {
                    section = name.to_string();
                }
                other => return Err(err(lineno, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected key = value, got {line:?}")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();

        if section.is_empty() && key == "preset" {
            if cfg.is_some() {
                return Err(err(lineno, "preset named twice"));
            }
            cfg = Some(preset(&value).map_err(|e| err(lineno, e.to_string()))?);
            continue;
        }
        pending.push((lineno, format!("{section}.{key}"), value));
    }

    let mut cfg = cfg.unwrap_or_else(|| {
        // no preset named: start from the subcritical static scenario
        preset("static_subcritical").expect("builtin preset")
    });
    cfg.name = format!("custom({})", cfg.name);

    for (lineno, scoped, value) in pending {
        apply_key(&mut cfg, &mut out, lineno, &scoped, &value)?;
    }
    validate(&cfg)?;
    Ok((cfg, out))
}

fn apply_key(
    cfg: &mut ScenarioConfig,
    out: &mut OutputConfig,
    line: usize,
    scoped: &str,
    value: &str,
) -> Result<(), ConfigError> {
    match scoped {
        // [initial]
        "initial.kind" => {
            cfg.initial = match value {
                "single_bump" => InitialData::SingleBump {
                    mass: cfg.initial.total_mass().unwrap_or(4.0 * std::f64::consts::PI),
                    sigma: 0.5,
                    center: (0.0, 0.0),
                },
                "two_bump" => InitialData::TwoBump {
                    mass: cfg.initial.total_mass().unwrap_or(12.0 * std::f64::consts::PI),
                    y0: 4.0,
                    sigma: 0.5,
                },
                "snapshot" => InitialData::Snapshot {
                    path: PathBuf::new(),
                },
                other => return Err(err(line, format!("unknown initial kind {other:?}"))),
            };
            cfg.symmetric = cfg.initial.is_symmetric();
        }
        "initial.mass" => {
            let m = parse_f64(line, scoped, value)?;
            cfg.initial
                .set_mass(m)
                .map_err(|e| err(line, e.to_string()))?;
        }
        "initial.mass_pi" => {
            let m = parse_f64(line, scoped, value)? * std::f64::consts::PI;
            cfg.initial
                .set_mass(m)
                .map_err(|e| err(line, e.to_string()))?;
        }
        "initial.sigma" => {
            let s = parse_f64(line, scoped, value)?;
            if !(s > 0.0) {
                return Err(err(line, "sigma must be positive"));
            }
            match &mut cfg.initial {
                InitialData::SingleBump { sigma, .. } | InitialData::TwoBump { sigma, .. } => {
                    *sigma = s
                }
                _ => return Err(err(line, "sigma needs Gaussian initial data")),
            }
        }
        "initial.y0" => {
            let y = parse_f64(line, scoped, value)?;
            match &mut cfg.initial {
                InitialData::TwoBump { y0, .. } => *y0 = y,
                _ => return Err(err(line, "y0 needs two_bump initial data")),
            }
        }
        "initial.cx" | "initial.cy" => {
            let v = parse_f64(line, scoped, value)?;
            match &mut cfg.initial {
                InitialData::SingleBump { center, .. } => {
                    if scoped.ends_with("cx") {
                        center.0 = v;
                    } else {
                        center.1 = v;
                    }
                }
                _ => return Err(err(line, "cx/cy need single_bump initial data")),
            }
            cfg.symmetric = cfg.initial.is_symmetric();
        }
        "initial.path" => match &mut cfg.initial {
            InitialData::Snapshot { path } => *path = PathBuf::from(value),
            _ => return Err(err(line, "path needs snapshot initial data")),
        },

        // [numerics]
        "numerics.n" | "numerics.resolution" => {
            cfg.resolution = parse_usize(line, scoped, value)?;
        }
        "numerics.l" | "numerics.half_width" => {
            cfg.half_width = parse_f64(line, scoped, value)?;
        }
        "numerics.epsilon_cells" => {
            let e = parse_f64(line, scoped, value)?;
            if e < 1.0 {
                return Err(err(
                    line,
                    "epsilon_cells must be >= 1 (kernel under-resolved below one cell)",
                ));
            }
            cfg.epsilon_cells = e;
        }
        "numerics.cfl" => {
            let c = parse_f64(line, scoped, value)?;
            if !(c > 0.0 && c < 1.0) {
                return Err(err(line, "cfl must lie in (0, 1)"));
            }
            cfg.cfl = c;
        }
        "numerics.transport" => {
            cfg.transport = match value {
                "upwind1" => TransportScheme::Upwind1,
                "muscl" => TransportScheme::Muscl,
                other => return Err(err(line, format!("unknown transport {other:?}"))),
            };
        }
        "numerics.bridge" => {
            cfg.bridge = match value {
                "log_cap" => BridgeKind::LogCap,
                "quintic_hermite" => BridgeKind::QuinticHermite,
                other => return Err(err(line, format!("unknown bridge {other:?}"))),
            };
        }
        "numerics.grad_mode" => {
            cfg.grad_mode = match value {
                "convolution" => GradMode::Convolution,
                "central_difference" => GradMode::CentralDifference,
                other => return Err(err(line, format!("unknown grad_mode {other:?}"))),
            };
        }
        "numerics.diffusion" => cfg.diffusion = parse_switch(line, scoped, value)?,
        "numerics.chemotaxis" => cfg.chemotaxis = parse_switch(line, scoped, value)?,

        // [strain]
        "strain.a_mode" => {
            cfg.amplitude = match value {
                "auto" => AmplitudeMode::Auto,
                "explicit" => match cfg.amplitude {
                    AmplitudeMode::Explicit(a) => AmplitudeMode::Explicit(a),
                    AmplitudeMode::Auto => AmplitudeMode::Explicit(0.0),
                },
                other => return Err(err(line, format!("unknown a_mode {other:?}"))),
            };
        }
        "strain.amplitude" | "strain.a" => {
            let a = parse_f64(line, scoped, value)?;
            if a < 0.0 {
                return Err(err(line, "amplitude must be nonnegative"));
            }
            cfg.amplitude = AmplitudeMode::Explicit(a);
        }
        "strain.delta" => {
            let d = parse_f64(line, scoped, value)?;
            if !(d > 0.0) {
                return Err(err(line, "delta must be positive"));
            }
            cfg.delta = d;
        }
        "strain.eta" => {
            let e = parse_f64(line, scoped, value)?;
            if !(e > 0.0) {
                return Err(err(line, "eta must be positive"));
            }
            cfg.eta = e;
        }

        // [checks]
        "checks.enable" => {
            let parsed =
                ChecksConfig::parse_list(value).map_err(|e| err(line, e.to_string()))?;
            // keep the configured tolerances, change only the toggles
            cfg.checks = ChecksConfig {
                tol_log_hls_rel: cfg.checks.tol_log_hls_rel,
                tol_negative_entropy_rel: cfg.checks.tol_negative_entropy_rel,
                tol_energy_rel: cfg.checks.tol_energy_rel,
                tol_strip_rel: cfg.checks.tol_strip_rel,
                tol_moment_rel: cfg.checks.tol_moment_rel,
                ..parsed
            };
        }
        "checks.tol_log_hls_rel" => cfg.checks.tol_log_hls_rel = parse_f64(line, scoped, value)?,
        "checks.tol_negative_entropy_rel" => {
            cfg.checks.tol_negative_entropy_rel = parse_f64(line, scoped, value)?
        }
        "checks.tol_energy_rel" => cfg.checks.tol_energy_rel = parse_f64(line, scoped, value)?,
        "checks.tol_strip_rel" => cfg.checks.tol_strip_rel = parse_f64(line, scoped, value)?,
        "checks.tol_moment_rel" => cfg.checks.tol_moment_rel = parse_f64(line, scoped, value)?,
        "checks.blowup_ratio" => cfg.thresholds.ratio = parse_f64(line, scoped, value)?,
        "checks.blowup_support_fraction" => {
            cfg.thresholds.support_fraction = parse_f64(line, scoped, value)?
        }
        "checks.blowup_support_ratio" => {
            cfg.thresholds.support_ratio = parse_f64(line, scoped, value)?
        }
        "checks.blowup_trend_window" => {
            cfg.thresholds.trend_window = parse_usize(line, scoped, value)?
        }

        // [output]
        "output.t_max" => {
            let t = parse_f64(line, scoped, value)?;
            if !(t > 0.0) {
                return Err(err(line, "t_max must be positive"));
            }
            cfg.t_max = t;
        }
        "output.interval" => {
            if value == "auto" {
                cfg.output_interval = None;
            } else {
                let v = parse_f64(line, scoped, value)?;
                if !(v > 0.0) {
                    return Err(err(line, "interval must be positive (or auto)"));
                }
                cfg.output_interval = Some(v);
            }
        }
        "output.snapshot_every" => cfg.snapshot_every = parse_usize(line, scoped, value)?,
        "output.dir" => out.dir = Some(PathBuf::from(value)),
        "output.quiet" => out.quiet = parse_switch(line, scoped, value)?,

        other => {
            let (section, key) = other.split_once('.').unwrap_or(("", other));
            return Err(err(
                line,
                if section.is_empty() {
                    format!("unknown key {key:?} before any section")
                } else {
                    format!("unknown key {key:?} in section [{section}]")
                },
            ));
        }
    }
    Ok(())
}

fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    if cfg.resolution == 0 || cfg.resolution % 2 != 0 {
        return Err(ConfigError {
            line: None,
            message: format!(
                "N must be even and positive so no cell straddles the x2 = 0 axis; got {}",
                cfg.resolution
            ),
        });
    }
    if !(cfg.half_width > 0.0) {
        return Err(ConfigError {
            line: None,
            message: format!("L must be positive, got {}", cfg.half_width),
        });
    }
    if let InitialData::Snapshot { path } = &cfg.initial {
        if path.as_os_str().is_empty() {
            return Err(ConfigError {
                line: None,
                message: "snapshot initial data needs a path".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn minimal_preset_line_gives_full_defaults() {
        let (cfg, out) = parse_config_str("preset = strained_supercritical\n").unwrap();
        assert_eq!(cfg.resolution, 512);
        assert_eq!(cfg.amplitude, AmplitudeMode::Auto);
        assert!(out.dir.is_none());
    }

    #[test]
    fn odd_resolution_is_rejected_with_invariant_named() {
        let e = parse_config_str("preset = heat_sanity\n[numerics]\nN = 255\n").unwrap_err();
        assert!(e.to_string().contains("even"), "{e}");
    }

    #[test]
    fn auto_amplitude_resolves_via_delta() {
        let text = "preset = strained_supercritical\n[strain]\na_mode = auto\ndelta = 0.25\n";
        let (cfg, _) = parse_config_str(text).unwrap();
        assert_eq!(cfg.amplitude, AmplitudeMode::Auto);
        assert_eq!(cfg.delta, 0.25);
        // with M = 12pi the auto rule gives A = (6pi)/0.0625 = 96pi
        let n0 = {
            let mut c = cfg.clone();
            c.resolution = 128;
            c.build_initial().unwrap()
        };
        let m_plus = n0.half_plane_stats().unwrap().mass;
        let a = pks_core::dynamics::select_amplitude(m_plus, cfg.delta).unwrap();
        assert!((a - 96.0 * PI).abs() < 0.01 * 96.0 * PI);
    }

    #[test]
    fn unknown_keys_error_with_line_number() {
        let text = "preset = heat_sanity\n[numerics]\nwibble = 3\n";
        let e = parse_config_str(text).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("wibble"));
        let e = parse_config_str("preset = heat_sanity\n[nope]\n").unwrap_err();
        assert!(e.to_string().contains("unknown section"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\npreset = heat_sanity\n\n[output]\nt_max = 0.25 # trailing\n";
        let (cfg, _) = parse_config_str(text).unwrap();
        assert_eq!(cfg.t_max, 0.25);
    }

    #[test]
    fn mass_pi_shorthand() {
        let text = "preset = static_subcritical\n[initial]\nmass_pi = 12\n";
        let (cfg, _) = parse_config_str(text).unwrap();
        assert!((cfg.initial.total_mass().unwrap() - 12.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn bad_switch_and_bad_number_errors() {
        assert!(parse_config_str("preset = heat_sanity\n[numerics]\ndiffusion = maybe\n").is_err());
        assert!(parse_config_str("preset = heat_sanity\n[numerics]\ncfl = fast\n").is_err());
        assert!(parse_config_str("preset = heat_sanity\n[numerics]\ncfl = 1.5\n").is_err());
    }
}
