//! Reproducible runs driven by a single JSON config: simulation to files,
//! time-resolved tomography reports and single-shot analyses.

mod analyze;
mod simulate;
mod tomo;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optics::{CircularConvention, CorrectionArms, CorrectionUnitary};
use crate::sim::{EmitterConfig, StreamFormat};

pub use analyze::{cmd_analyze, AnalyzeRequest, DataSource};
pub use simulate::{cmd_simulate, Manifest, ManifestEntry, StreamFile};
pub use tomo::{cmd_report, cmd_tomo, BinMetrics, Extremum, FitSummary, Report, TomoSource};

/// Environment variable whose value replaces `simulation.seed`.
pub const SEED_ENV: &str = "CASCADE_TOMO_SEED";

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits kept for every float written to a report or CSV.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub emitter: EmitterConfig,
    pub tomography: TomographyConfig,
    pub simulation: Option<SimulationConfig>,
    pub io: IoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    /// 16 or 36 projections.
    pub basis_count: usize,
    pub bin_width_ps: f64,
    /// Delay bins reconstructed: `[min_delay_ps, max_delay_ps]`, measured
    /// as `t_X − t_XX`.
    pub min_delay_ps: f64,
    pub max_delay_ps: f64,
    pub min_counts_per_bin: u64,
    /// Poisson resamples per bin; fewer than 2 disables the bootstrap.
    pub bootstrap_samples: usize,
    pub correction: CorrectionConfig,
    pub convention: CircularConvention,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            basis_count: 36,
            bin_width_ps: 100.0,
            min_delay_ps: 0.0,
            max_delay_ps: 8000.0,
            min_counts_per_bin: 1000,
            bootstrap_samples: 0,
            correction: CorrectionConfig::default(),
            convention: CircularConvention::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionConfig {
    pub theta: f64,
    pub phi: f64,
    pub arms: CorrectionArms,
}

impl CorrectionConfig {
    pub fn unitary(&self) -> CorrectionUnitary {
        CorrectionUnitary::new(self.theta, self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_pulses: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub output_dir: PathBuf,
    pub formats: FormatConfig,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            output_dir: PathBuf::from("cascade-tomo-out"),
            formats: FormatConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatConfig {
    /// Encoding of simulated timestamp streams.
    pub streams: StreamFormat,
}

impl Default for FormatConfig {
    fn default() -> Self {
        FormatConfig {
            streams: StreamFormat::Binary,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        let t = &self.tomography;
        if t.basis_count != 16 && t.basis_count != 36 {
            return Err(Error::validation(format!(
                "tomography.basis_count must be 16 or 36, got {}",
                t.basis_count
            )));
        }
        if !(t.bin_width_ps > 0.0 && t.bin_width_ps.is_finite()) {
            return Err(Error::validation(format!(
                "tomography.bin_width_ps must be positive, got {}",
                t.bin_width_ps
            )));
        }
        if !(t.max_delay_ps >= t.bin_width_ps && t.max_delay_ps.is_finite()) {
            return Err(Error::validation(format!(
                "tomography.max_delay_ps must be finite and at least one bin width, got {}",
                t.max_delay_ps
            )));
        }
        if !(t.min_delay_ps.abs() < t.max_delay_ps) {
            return Err(Error::validation(format!(
                "tomography.min_delay_ps must lie inside ±max_delay_ps, got {}",
                t.min_delay_ps
            )));
        }
        if t.bootstrap_samples == 1 {
            return Err(Error::validation("tomography.bootstrap_samples must be 0 or at least 2"));
        }
        if !(t.correction.theta.is_finite() && t.correction.phi.is_finite()) {
            return Err(Error::validation("correction angles must be finite"));
        }
        Ok(())
    }

    /// Reads `path` (defaults when `None`), applies `key=value` overrides
    /// and the seed environment variable, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str::<Value>(&text).map_err(|e| Error::Parse {
                    path: p.to_path_buf(),
                    index: e.line(),
                    message: e.to_string(),
                })?
            }
            None => serde_json::to_value(RunConfig::default())?,
        };
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        if let Some(seed) = env_seed {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("{SEED_ENV} must be an unsigned integer, got '{seed}'")))?;
            match value.get_mut("simulation") {
                Some(Value::Object(sim)) => {
                    sim.insert("seed".into(), Value::from(seed));
                }
                _ => {
                    return Err(Error::validation(format!(
                        "{SEED_ENV} is set but the config has no simulation block"
                    )))
                }
            }
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::validation(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sets the dotted `key` of a JSON document. The value is parsed as JSON
/// and taken as a string when that fails; intermediate objects are created.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override '{item}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::validation(format!("override '{item}' has an empty key segment")));
    }
    let parsed = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    for seg in key.split('.') {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let Value::Object(map) = node else {
            return Err(Error::validation(format!("override '{key}': '{seg}' is not inside an object")));
        };
        node = map.entry(seg.to_string()).or_insert(Value::Null);
    }
    *node = parsed;
    Ok(())
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest text of `round_sig(x)`; exponent form outside `[1e-6, 1e16)`.
pub fn format_float(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // Normalizes −0.
        "0".into()
    } else if r.is_finite() && (r.abs() < 1e-6 || r.abs() >= 1e16) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                let r = round_sig(x);
                *v = serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r })
                    .map(Value::Number)
                    .unwrap_or(Value::Null);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to [`SIGNIFICANT_DIGITS`] and object
/// keys sorted, so equal inputs give equal bytes.
pub fn to_stable_json<T: Serialize>(item: &T) -> Result<String> {
    let mut v = serde_json::to_value(item)?;
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(
            None,
            &[
                "emitter.fss=0".into(),
                "tomography.basis_count=16".into(),
                "simulation={\"n_pulses\": 10, \"seed\": 4}".into(),
                "io.output_dir=some/dir".into(),
            ],
            None,
        )
        .unwrap();
        assert_eq!(cfg.emitter.fss, 0.0);
        assert_eq!(cfg.tomography.basis_count, 16);
        assert_eq!(cfg.simulation, Some(SimulationConfig { n_pulses: 10, seed: 4 }));
        assert_eq!(cfg.io.output_dir, PathBuf::from("some/dir"));
    }

    #[test]
    fn env_seed_replaces_config_seed() {
        let set = ["simulation.n_pulses=5".to_string(), "simulation.seed=1".to_string()];
        let cfg = RunConfig::load(None, &set, Some("99")).unwrap();
        assert_eq!(cfg.simulation.unwrap().seed, 99);
        assert!(RunConfig::load(None, &set, Some("x")).is_err());
        assert!(RunConfig::load(None, &[], Some("3")).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            "tomography.basis_count=20",
            "emitter.tau_x=-1",
            "emitter.bogus=1",
            "tomography.bootstrap_samples=1",
            "simulation.n_pulses=3",
        ] {
            let err = RunConfig::load(None, &[bad.to_string()], None).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}: {err}");
        }
        assert!(apply_override(&mut Value::Null, "novalue").is_err());
        assert!(apply_override(&mut serde_json::json!({"a": 1}), "a.b=2").is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let mut cfg = RunConfig::default();
        cfg.simulation = Some(SimulationConfig { n_pulses: 7, seed: 3 });
        cfg.tomography.correction.theta = 0.25;
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(RunConfig::load(Some(&path), &[], None).unwrap(), cfg);
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(RunConfig::load(Some(&path), &[], None), Err(Error::Parse { .. })));
    }

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.1 + 0.2), "0.3");
        assert_eq!(format_float(889.412_345_678_912_3), "889.412345679");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1e-20 / 3.0), "3.33333333333e-21");
        assert_eq!(round_sig(f64::INFINITY), f64::INFINITY);
        let text = to_stable_json(&serde_json::json!({"x": 2.0 / 3.0, "n": 3})).unwrap();
        assert!(text.contains("0.666666666667"), "{text}");
        assert!(text.contains("\"n\": 3"));
    }
}
