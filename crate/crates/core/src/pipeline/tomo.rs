use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::Manifest;
use super::{format_float, to_stable_json, write_text, RunConfig, TOOLKIT_VERSION};
use crate::analysis::{cross_correlate, fit_model, fss_from_period, FitKind, FitResult, Histogram};
use crate::error::{Error, Result};
use crate::optics::{apply_correction, tomography_bases, BasisPair};
use crate::quantum::{concurrence, fidelity, DensityMatrix, PureState2Q};
use crate::sim::{derive_seed, CHANNEL_A, CHANNEL_B};
use crate::tomography::{
    bootstrap_metrics, mle_reconstruct, time_binned_tomography, MleOptions, TimeBin,
    TimeBinnedOptions, TomographyInput,
};

pub const REPORT_NAME: &str = "report.json";
pub const METRICS_NAME: &str = "metrics.csv";

/// Fewest reconstructed bins for which the fidelity oscillation is fitted.
const MIN_BINS_FOR_PERIOD_FIT: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TomoSource {
    /// Simulation manifest; coincidences are histogrammed per delay bin.
    Manifest(PathBuf),
    /// `basis,counts[,weight]` CSV for one state.
    Counts(PathBuf),
}

impl TomoSource {
    /// Manifest for `.json` paths, count CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TomoSource::Manifest(path.to_path_buf()),
            _ => TomoSource::Counts(path.to_path_buf()),
        }
    }

    fn path(&self) -> &Path {
        match self {
            TomoSource::Manifest(p) | TomoSource::Counts(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub index: usize,
    /// Delay bin; absent for untimed count input.
    pub time_bin: Option<TimeBin>,
    pub counts: u64,
    pub fidelity: f64,
    pub fidelity_std: Option<f64>,
    pub concurrence: f64,
    pub concurrence_std: Option<f64>,
    pub converged: bool,
    pub density_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub bin_index: usize,
    pub center_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub result: FitResult,
    /// Quantities computed from the fitted parameters.
    pub derived: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub toolkit_version: String,
    pub source: PathBuf,
    pub config: RunConfig,
    /// Fidelities are taken against this state, in (HH, HV, VH, VV) order.
    pub target: String,
    pub bins: Vec<BinMetrics>,
    pub skipped_bins: usize,
    pub max_fidelity: Option<Extremum>,
    pub max_concurrence: Option<Extremum>,
    pub min_concurrence: Option<Extremum>,
    pub fits: Vec<FitSummary>,
    /// Outputs relative to the report directory.
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn read(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            index: e.line(),
            message: e.to_string(),
        })
    }

    pub fn fit(&self, name: &str) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// Per-projection coincidence histograms of `t_X − t_XX` over
/// `[min_delay_ps, max_delay_ps]` for the configured basis set. A missing
/// basis pair is an error naming it.
pub fn manifest_histograms(manifest_path: &Path, config: &RunConfig) -> Result<Vec<(BasisPair, Histogram)>> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.verify(dir)?;
    let bases = tomography_bases(config.tomography.basis_count)?;
    if let Some(missing) = bases.iter().find(|b| manifest.entries.iter().all(|e| e.basis != **b)) {
        return Err(Error::validation(format!("input has no data for basis pair {missing}")));
    }
    let t = &config.tomography;
    bases
        .par_iter()
        .map(|&basis| {
            let (xx, x) = manifest.load_pair(dir, basis)?;
            let h = cross_correlate(&xx.timestamps(CHANNEL_A), &x.timestamps(CHANNEL_B), t.bin_width_ps, t.max_delay_ps)?;
            Ok((basis, h.crop_from(t.min_delay_ps)?))
        })
        .collect()
}

struct Reconstructed {
    index: usize,
    time_bin: Option<TimeBin>,
    input: TomographyInput,
    rho: DensityMatrix,
    converged: bool,
}

/// Reconstructs every delay bin (or the single count set), applies the
/// configured correction, and writes `report.json`, `metrics.csv` and one
/// density-matrix JSON per reconstructed bin under `io.output_dir/tomo`.
pub fn cmd_tomo(source: &TomoSource, config: &RunConfig) -> Result<(PathBuf, Report)> {
    config.validate()?;
    let t = &config.tomography;
    let mle = MleOptions::default();
    let (reconstructed, skipped) = match source {
        TomoSource::Manifest(path) => {
            let hists = manifest_histograms(path, config)?;
            let opts = TimeBinnedOptions {
                min_counts: t.min_counts_per_bin,
                mle,
                convention: t.convention,
            };
            let outcomes = time_binned_tomography(&hists, t.bin_width_ps, &opts)?;
            let skipped = outcomes.iter().filter(|o| o.skipped()).count();
            let mut rec = Vec::new();
            for (index, o) in outcomes.into_iter().enumerate() {
                if let Some(res) = o.result {
                    let input = TomographyInput::new(o.input)?
                        .with_time_bin(o.time_bin)
                        .with_convention(t.convention);
                    rec.push(Reconstructed {
                        index,
                        time_bin: Some(o.time_bin),
                        input,
                        rho: res.rho,
                        converged: res.converged,
                    });
                }
            }
            (rec, skipped)
        }
        TomoSource::Counts(path) => {
            let input = TomographyInput::read_csv(path)?.with_convention(t.convention);
            let expected = tomography_bases(t.basis_count)?;
            let present: Vec<BasisPair> = input.records().iter().map(|r| r.pair).collect();
            if let Some(missing) = expected.iter().find(|b| !present.contains(b)) {
                return Err(Error::validation(format!("input has no data for basis pair {missing}")));
            }
            let res = mle_reconstruct(&input, &mle)?;
            let rec = vec![Reconstructed {
                index: 0,
                time_bin: None,
                input,
                rho: res.rho,
                converged: res.converged,
            }];
            (rec, 0)
        }
    };
    if reconstructed.is_empty() {
        log::warn!("no bin reached {} counts; the report has no reconstructed states", t.min_counts_per_bin);
    }

    let corr = t.correction.unitary();
    let correct = |rho: &DensityMatrix| -> Result<DensityMatrix> {
        if corr.is_identity() {
            Ok(*rho)
        } else {
            apply_correction(rho, &corr, t.correction.arms)
        }
    };
    let target = PureState2Q::phi_plus();
    let seed = config.simulation.map_or(0, |s| s.seed);

    let out = config.io.output_dir.join("tomo");
    let mut files = Vec::new();
    let mut bins = Vec::new();
    let mut densities = Vec::new();
    for r in &reconstructed {
        let rho = correct(&r.rho)?;
        let (fid_std, conc_std) = if t.bootstrap_samples >= 2 {
            let metrics = |est: &DensityMatrix| match correct(est) {
                Ok(c) => vec![fidelity(&c, &target), concurrence(&c)],
                Err(_) => vec![f64::NAN, f64::NAN],
            };
            let summary = bootstrap_metrics(&r.input, t.bootstrap_samples, derive_seed(seed, r.index as u64), &mle, metrics)?;
            (Some(summary[0].std), Some(summary[1].std))
        } else {
            (None, None)
        };
        let density_file = PathBuf::from("density").join(format!("bin_{:04}.json", r.index));
        densities.push((density_file.clone(), rho));
        bins.push(BinMetrics {
            index: r.index,
            time_bin: r.time_bin,
            counts: r.input.total_counts(),
            fidelity: fidelity(&rho, &target),
            fidelity_std: fid_std,
            concurrence: concurrence(&rho),
            concurrence_std: conc_std,
            converged: r.converged,
            density_file,
        });
    }

    let extremum = |pick: fn(&BinMetrics) -> f64, max: bool| {
        bins.iter()
            .max_by(|a, b| {
                let ord = pick(a).total_cmp(&pick(b));
                // Earliest bin wins ties.
                if max { ord.then(b.index.cmp(&a.index)) } else { ord.reverse().then(b.index.cmp(&a.index)) }
            })
            .map(|b| Extremum {
                value: pick(b),
                bin_index: b.index,
                center_ps: b.time_bin.map(|t| t.center_ps()),
            })
    };
    let max_fidelity = extremum(|b| b.fidelity, true);
    let max_concurrence = extremum(|b| b.concurrence, true);
    let min_concurrence = extremum(|b| b.concurrence, false);

    let mut fits = Vec::new();
    let timed: Vec<(f64, f64)> = bins
        .iter()
        .filter_map(|b| b.time_bin.map(|t| (t.center_ps(), b.fidelity)))
        .collect();
    if timed.len() >= MIN_BINS_FOR_PERIOD_FIT {
        let (x, y): (Vec<f64>, Vec<f64>) = timed.into_iter().unzip();
        match fit_model(FitKind::Sinusoid, &x, &y, None, None) {
            Ok(result) => {
                let mut derived = BTreeMap::new();
                if let Ok(fss) = fss_from_period(result.param("P")) {
                    derived.insert("fss_uev".to_string(), fss);
                }
                fits.push(FitSummary {
                    name: "fidelity_oscillation".into(),
                    result,
                    derived,
                });
            }
            Err(e) => log::warn!("fidelity oscillation fit failed: {e}"),
        }
    }

    for (rel, rho) in &densities {
        write_text(&out.join(rel), &to_stable_json(rho)?)?;
        files.push(rel.clone());
    }
    write_text(&out.join(METRICS_NAME), &metrics_csv(&bins))?;
    files.push(PathBuf::from(METRICS_NAME));

    let report = Report {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        source: source.path().to_path_buf(),
        config: config.clone(),
        target: "phi_plus".into(),
        bins,
        skipped_bins: skipped,
        max_fidelity,
        max_concurrence,
        min_concurrence,
        fits,
        files,
    };
    let path = out.join(REPORT_NAME);
    write_text(&path, &to_stable_json(&report)?)?;
    Ok((path, report))
}

fn metrics_csv(bins: &[BinMetrics]) -> String {
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    let mut s = String::from("bin,start_ps,center_ps,width_ps,counts,fidelity,fidelity_std,concurrence,concurrence_std\n");
    for b in bins {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            b.index,
            opt(b.time_bin.map(|t| t.start_ps)),
            opt(b.time_bin.map(|t| t.center_ps())),
            opt(b.time_bin.map(|t| t.width_ps)),
            b.counts,
            format_float(b.fidelity),
            opt(b.fidelity_std),
            format_float(b.concurrence),
            opt(b.concurrence_std),
        );
    }
    s
}

/// Plain-text summary of a report file.
pub fn cmd_report(path: &Path) -> Result<String> {
    let r = Report::read(path)?;
    let mut s = String::new();
    let _ = writeln!(s, "source: {}", r.source.display());
    let _ = writeln!(
        s,
        "bins: {} reconstructed, {} below {} counts",
        r.bins.len(),
        r.skipped_bins,
        r.config.tomography.min_counts_per_bin
    );
    let pm = |v: f64, e: Option<f64>| match e {
        Some(e) => format!("{v:.4} ± {e:.4}"),
        None => format!("{v:.4}"),
    };
    let _ = writeln!(s, "{:>12} {:>9} {:>18} {:>18}", "center_ps", "counts", "fidelity", "concurrence");
    for b in &r.bins {
        let center = b.time_bin.map_or("-".to_string(), |t| format!("{:.1}", t.center_ps()));
        let _ = writeln!(
            s,
            "{center:>12} {:>9} {:>18} {:>18}",
            b.counts,
            pm(b.fidelity, b.fidelity_std),
            pm(b.concurrence, b.concurrence_std)
        );
    }
    for (label, e) in [
        ("max fidelity", &r.max_fidelity),
        ("max concurrence", &r.max_concurrence),
        ("min concurrence", &r.min_concurrence),
    ] {
        if let Some(e) = e {
            let at = e.center_ps.map_or(String::new(), |c| format!(" at {c:.1} ps"));
            let _ = writeln!(s, "{label}: {:.4} (bin {}){at}", e.value, e.bin_index);
        }
    }
    for f in &r.fits {
        let params: Vec<String> = f
            .result
            .params
            .iter()
            .map(|(k, v)| format!("{k} = {v:.6} ± {:.2e}", f.result.std_error(k)))
            .collect();
        let _ = writeln!(s, "fit {} ({}): {}", f.name, f.result.model, params.join(", "));
        for (k, v) in &f.derived {
            let _ = writeln!(s, "  {k} = {v:.6}");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{cmd_simulate, SimulationConfig};
    use crate::quantum::density_of;
    use crate::tomography::{ideal_input, ProjectionRecord};

    fn sim_config(dir: &Path, fss: f64, n_pulses: u64) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.emitter.setup_efficiency = 1.0;
        cfg.emitter.detector_efficiency = 1.0;
        cfg.emitter.fss = fss;
        cfg.simulation = Some(SimulationConfig { n_pulses, seed: 11 });
        cfg.tomography.max_delay_ps = 3000.0;
        cfg.tomography.min_counts_per_bin = 2000;
        cfg.io.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn zero_fss_is_flat_and_high() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sim_config(dir.path(), 0.0, 100_000);
        let (manifest, _) = cmd_simulate(&cfg).unwrap();
        let (path, report) = cmd_tomo(&TomoSource::Manifest(manifest), &cfg).unwrap();
        assert!(report.bins.len() >= 5);
        for b in &report.bins {
            assert!(b.fidelity >= 0.99, "bin {} fidelity {}", b.index, b.fidelity);
        }
        let listed: Vec<PathBuf> = report.files.iter().map(|f| path.parent().unwrap().join(f)).collect();
        assert!(listed.iter().all(|f| f.exists()));
        let on_disk = std::fs::read_dir(path.parent().unwrap().join("density")).unwrap().count();
        assert_eq!(on_disk, report.bins.len());
        let text = cmd_report(&path).unwrap();
        assert!(text.contains("max fidelity"), "{text}");
    }

    #[test]
    fn reports_are_reproducible_and_identity_correction_is_neutral() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sim_config(dir.path(), 4.65, 60_000);
        let (manifest, _) = cmd_simulate(&cfg).unwrap();
        let src = TomoSource::Manifest(manifest);
        let (p1, _) = cmd_tomo(&src, &cfg).unwrap();
        let first = std::fs::read(&p1).unwrap();
        let csv1 = std::fs::read(p1.parent().unwrap().join(METRICS_NAME)).unwrap();
        let (p2, _) = cmd_tomo(&src, &cfg).unwrap();
        assert_eq!(first, std::fs::read(&p2).unwrap());
        assert_eq!(csv1, std::fs::read(p2.parent().unwrap().join(METRICS_NAME)).unwrap());
        cfg.tomography.correction.theta = 0.0;
        cfg.tomography.correction.phi = 0.0;
        let (p3, _) = cmd_tomo(&src, &cfg).unwrap();
        assert_eq!(first, std::fs::read(&p3).unwrap());
    }

    #[test]
    fn correction_rotates_reported_states() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("counts.csv");
        let input = ideal_input(&density_of(&PureState2Q::phi_plus()), &tomography_bases(36).unwrap(), 1e5).unwrap();
        input.write_csv(&csv).unwrap();
        let mut cfg = RunConfig::default();
        cfg.io.output_dir = dir.path().join("out");
        let (_, plain) = cmd_tomo(&TomoSource::Counts(csv.clone()), &cfg).unwrap();
        assert!(plain.bins[0].fidelity > 0.999);
        assert!(plain.bins[0].time_bin.is_none());
        cfg.tomography.correction.theta = 1.0;
        cfg.tomography.correction.arms = crate::optics::CorrectionArms::XOnly;
        let (_, rotated) = cmd_tomo(&TomoSource::Counts(csv), &cfg).unwrap();
        assert!(rotated.bins[0].fidelity < 0.9);
        assert!((rotated.bins[0].concurrence - plain.bins[0].concurrence).abs() < 1e-6);
    }

    #[test]
    fn missing_basis_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("counts.csv");
        let input = ideal_input(&density_of(&PureState2Q::phi_plus()), &tomography_bases(16).unwrap(), 1e4).unwrap();
        input.write_csv(&csv).unwrap();
        let mut cfg = RunConfig::default();
        cfg.io.output_dir = dir.path().join("out");
        let err = cmd_tomo(&TomoSource::Counts(csv), &cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("basis pair"), "{err}");

        let cfg = sim_config(dir.path(), 0.0, 100);
        let (manifest, _) = cmd_simulate(&cfg).unwrap();
        let mut m = Manifest::read(&manifest).unwrap();
        let dropped = m.entries.remove(5).basis;
        write_text(&manifest, &serde_json::to_string(&m).unwrap()).unwrap();
        let err = cmd_tomo(&TomoSource::Manifest(manifest), &cfg).unwrap_err();
        assert!(err.to_string().contains(&dropped.to_string()), "{err}");
    }

    #[test]
    fn bootstrap_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("counts.csv");
        let rho = density_of(&PureState2Q::phi_plus()).mix(&DensityMatrix::maximally_mixed(), 0.9).unwrap();
        let input = ideal_input(&rho, &tomography_bases(36).unwrap(), 4000.0).unwrap();
        let rounded: Vec<ProjectionRecord> = input.records().to_vec();
        TomographyInput::new(rounded).unwrap().write_csv(&csv).unwrap();
        let mut cfg = RunConfig::default();
        cfg.io.output_dir = dir.path().join("out");
        cfg.tomography.bootstrap_samples = 20;
        let (_, report) = cmd_tomo(&TomoSource::Counts(csv), &cfg).unwrap();
        let b = &report.bins[0];
        let (fs, cs) = (b.fidelity_std.unwrap(), b.concurrence_std.unwrap());
        assert!(fs > 0.0 && fs < 0.05, "{fs}");
        assert!(cs > 0.0 && cs < 0.1, "{cs}");
    }
}
