use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::analysis::{
    cross_correlate, first_lens_rate, fit_model, fss_from_peak_positions_with, fss_from_period, g2_zero,
    period_from_fss, poisson_weights, FitKind, FssScanOptions, Histogram,
};
use crate::error::{Error, Result};
use crate::sim::{import_stream, TimestampStream, CHANNEL_A, CHANNEL_B};
use crate::tomography::csv_error;

/// Relative disagreement above which a reported first-lens rate is flagged.
const FIRST_LENS_TOLERANCE: f64 = 0.01;

/// Input of a histogram-based analysis: a histogram CSV or a timestamp
/// stream (binary, or CSV with a `channel` column).
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Histogram(Histogram),
    Stream(TimestampStream),
}

impl DataSource {
    pub fn open(path: &Path) -> Result<DataSource> {
        let mut head = [0u8; 16];
        let n = std::fs::File::open(path)
            .and_then(|mut f| f.read(&mut head))
            .map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8_lossy(&head[..n]);
        if text.trim_start().starts_with("bin_start_ps") {
            Ok(DataSource::Histogram(Histogram::read_csv(path)?))
        } else {
            let report = import_stream(path)?;
            for w in &report.warnings {
                log::warn!("{}: {w}", path.display());
            }
            Ok(DataSource::Stream(report.stream))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyzeRequest {
    /// Windowed g²(0) of a two-channel autocorrelation.
    G2 {
        input: PathBuf,
        rep_period: f64,
        side_peaks: usize,
        bin_width: f64,
    },
    /// Exponential decay of arrival times modulo the pulse period.
    Lifetime {
        input: PathBuf,
        rep_period: f64,
        bin_width: f64,
    },
    /// FSS from a `angle_rad,peak_energy_uev` CSV.
    Fss { input: PathBuf, options: FssScanOptions },
    /// Period (ps) to FSS (µeV), or the inverse when `from_fss`.
    FssPeriod { value: f64, from_fss: bool },
    /// Recapture model on the zero-delay peak within `±window`.
    Recapture {
        input: PathBuf,
        bin_width: f64,
        window: f64,
    },
    /// Power law on an `x,y` CSV.
    Power { input: PathBuf },
    Efficiency {
        measured_cps: f64,
        setup_eff: f64,
        detector_eff: f64,
        rep_rate_mhz: f64,
        reported_mhz: Option<f64>,
    },
    /// Any model on an `x,y[,weight]` CSV.
    Fit { kind: FitKind, input: PathBuf },
}

pub fn cmd_analyze(req: &AnalyzeRequest) -> Result<Value> {
    match req {
        AnalyzeRequest::G2 {
            input,
            rep_period,
            side_peaks,
            bin_width,
        } => {
            let reach = (*side_peaks as f64 + 0.5) * rep_period;
            let h = histogram_of(input, *bin_width, reach)?;
            Ok(serde_json::to_value(g2_zero(&h, *rep_period, *side_peaks)?)?)
        }
        AnalyzeRequest::Lifetime {
            input,
            rep_period,
            bin_width,
        } => {
            let h = match DataSource::open(input)? {
                DataSource::Histogram(h) => h,
                DataSource::Stream(s) => folded_histogram(&s.timestamps(CHANNEL_A), *rep_period, *bin_width)?,
            };
            let peak = (0..h.len()).max_by_key(|&i| (h.counts()[i], std::cmp::Reverse(i))).unwrap_or(0);
            let x: Vec<f64> = (peak..h.len()).map(|i| h.bin_center(i)).collect();
            let y: Vec<f64> = h.counts()[peak..].iter().map(|&c| c as f64).collect();
            let fit = fit_model(FitKind::Exponential, &x, &y, Some(&poisson_weights(&y)), None)?;
            Ok(serde_json::to_value(fit)?)
        }
        AnalyzeRequest::Fss { input, options } => {
            let rows: Vec<AngleRow> = read_rows(input)?;
            let angles: Vec<f64> = rows.iter().map(|r| r.angle_rad).collect();
            let energies: Vec<f64> = rows.iter().map(|r| r.peak_energy_uev).collect();
            let (fss, fit) = fss_from_peak_positions_with(&angles, &energies, options)?;
            Ok(json!({ "fss_uev": fss, "fit": fit }))
        }
        AnalyzeRequest::FssPeriod { value, from_fss } => {
            if *from_fss {
                Ok(json!({ "fss_uev": value, "period_ps": period_from_fss(*value)? }))
            } else {
                Ok(json!({ "period_ps": value, "fss_uev": fss_from_period(*value)? }))
            }
        }
        AnalyzeRequest::Recapture {
            input,
            bin_width,
            window,
        } => {
            let h = histogram_of(input, *bin_width, *window)?;
            let (x, y): (Vec<f64>, Vec<f64>) = (0..h.len())
                .filter(|&i| h.bin_center(i).abs() <= *window)
                .map(|i| (h.bin_center(i), h.counts()[i] as f64))
                .unzip();
            let fit = fit_model(FitKind::Recapture, &x, &y, Some(&poisson_weights(&y)), None)?;
            Ok(serde_json::to_value(fit)?)
        }
        AnalyzeRequest::Power { input } => {
            let rows: Vec<XyRow> = read_rows(input)?;
            let (x, y, w) = split_rows(&rows);
            Ok(serde_json::to_value(fit_model(FitKind::PowerLaw, &x, &y, w.as_deref(), None)?)?)
        }
        AnalyzeRequest::Efficiency {
            measured_cps,
            setup_eff,
            detector_eff,
            rep_rate_mhz,
            reported_mhz,
        } => {
            let r = first_lens_rate(*measured_cps, *setup_eff, *detector_eff, *rep_rate_mhz)?;
            let warning = reported_mhz.and_then(|m| r.compare_reported(m, FIRST_LENS_TOLERANCE));
            if let Some(w) = &warning {
                log::warn!("{w}");
            }
            Ok(json!({
                "rate_mhz": r.rate_mhz,
                "fraction_of_pulses": r.fraction_of_pulses,
                "warning": warning,
            }))
        }
        AnalyzeRequest::Fit { kind, input } => {
            let rows: Vec<XyRow> = read_rows(input)?;
            let (x, y, w) = split_rows(&rows);
            Ok(serde_json::to_value(fit_model(*kind, &x, &y, w.as_deref(), None)?)?)
        }
    }
}

/// Histogram from a histogram CSV, or the A→B cross-correlation of a stream
/// over `±max_delay`.
fn histogram_of(path: &Path, bin_width: f64, max_delay: f64) -> Result<Histogram> {
    match DataSource::open(path)? {
        DataSource::Histogram(h) => Ok(h),
        DataSource::Stream(s) => cross_correlate(&s.timestamps(CHANNEL_A), &s.timestamps(CHANNEL_B), bin_width, max_delay),
    }
}

/// Arrival times modulo the pulse period, binned over `[0, rep_period)`.
fn folded_histogram(times: &[u64], rep_period: f64, bin_width: f64) -> Result<Histogram> {
    if !(rep_period > 0.0 && bin_width > 0.0 && bin_width <= rep_period) {
        return Err(Error::validation(format!(
            "need 0 < bin width ({bin_width}) ≤ rep period ({rep_period})"
        )));
    }
    let bins = (rep_period / bin_width).floor() as usize;
    let mut counts = vec![0u64; bins];
    for &t in times {
        let k = ((t as f64).rem_euclid(rep_period) / bin_width) as usize;
        if k < bins {
            counts[k] += 1;
        }
    }
    Histogram::new(bin_width, 0.0, counts)
}

#[derive(Deserialize)]
struct AngleRow {
    angle_rad: f64,
    peak_energy_uev: f64,
}

#[derive(Deserialize)]
struct XyRow {
    x: f64,
    y: f64,
    #[serde(default)]
    weight: Option<f64>,
}

fn split_rows(rows: &[XyRow]) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let x = rows.iter().map(|r| r.x).collect();
    let y = rows.iter().map(|r| r.y).collect();
    let w = rows.iter().map(|r| r.weight).collect::<Option<Vec<f64>>>();
    (x, y, w)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| csv_error(path, i + 1, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{export_stream, simulate_autocorrelation_run, simulate_lifetime_run, EmitterConfig, Species};

    #[test]
    fn fss_period_pairs() {
        let v = cmd_analyze(&AnalyzeRequest::FssPeriod { value: 890.0, from_fss: false }).unwrap();
        assert!((v["fss_uev"].as_f64().unwrap() - 4.647).abs() < 5e-4);
        let v = cmd_analyze(&AnalyzeRequest::FssPeriod { value: 4.6, from_fss: true }).unwrap();
        assert!((v["period_ps"].as_f64().unwrap() - 899.0).abs() < 0.5);
        let err = cmd_analyze(&AnalyzeRequest::FssPeriod { value: -1.0, from_fss: false }).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn efficiency_flags_discrepancy() {
        let v = cmd_analyze(&AnalyzeRequest::Efficiency {
            measured_cps: 40_000.0,
            setup_eff: 0.008,
            detector_eff: 0.5,
            rep_rate_mhz: 80.0,
            reported_mhz: Some(16.67),
        })
        .unwrap();
        assert!((v["rate_mhz"].as_f64().unwrap() - 10.0).abs() < 1e-9);
        assert!(v["warning"].is_string());
    }

    #[test]
    fn g2_on_simulated_x_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ctts");
        let cfg = EmitterConfig {
            setup_efficiency: 0.5,
            detector_efficiency: 1.0,
            ..Default::default()
        };
        let (a, b) = simulate_autocorrelation_run(&cfg, Species::X, 400_000, 3).unwrap();
        let mut events = a.events.clone();
        events.extend(b.events.iter().copied());
        let merged = TimestampStream::new(events, a.duration, None).unwrap();
        export_stream(&merged, &path, false).unwrap();
        let v = cmd_analyze(&AnalyzeRequest::G2 {
            input: path,
            rep_period: cfg.rep_period(),
            side_peaks: 3,
            bin_width: 50.0,
        })
        .unwrap();
        assert!(v["g2_zero"].as_f64().unwrap() <= 0.03, "{v}");
    }

    #[test]
    fn lifetime_from_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("life.csv");
        let cfg = EmitterConfig::lossless();
        let s = simulate_lifetime_run(&cfg, Species::Xx, 200_000, 5).unwrap();
        export_stream(&s, &path, false).unwrap();
        let v = cmd_analyze(&AnalyzeRequest::Lifetime {
            input: path,
            rep_period: cfg.rep_period(),
            bin_width: 50.0,
        })
        .unwrap();
        let tau = v["params"]["tau"].as_f64().unwrap();
        assert!((tau / 1100.0 - 1.0).abs() < 0.03, "{tau}");
    }

    #[test]
    fn generic_fit_reads_xy_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let mut text = String::from("x,y\n");
        for i in -100..=100 {
            let x = 50.0 * i as f64;
            let u = x.abs();
            let y = 20.0 + 3000.0 * (-u / 1100.0).exp() * (1.0 - (-u / 546.0).exp());
            text.push_str(&format!("{x},{y}\n"));
        }
        std::fs::write(&path, text).unwrap();
        let v = cmd_analyze(&AnalyzeRequest::Fit {
            kind: FitKind::Recapture,
            input: path.clone(),
        })
        .unwrap();
        assert!((v["params"]["t_c"].as_f64().unwrap() / 546.0 - 1.0).abs() < 0.05);
        std::fs::write(&path, "x,y\n1,oops\n").unwrap();
        let err = cmd_analyze(&AnalyzeRequest::Power { input: path }).unwrap_err();
        assert!(matches!(err, Error::Parse { index: 1, .. }), "{err:?}");
    }
}
