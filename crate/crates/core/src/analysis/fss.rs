use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::fit::{linear_least_squares, wrap_phase, FitKind, FitResult};
use crate::error::{Error, Result};
use crate::quantum::PLANCK_UEV_PS;

/// FSS (µeV) whose phase winds once per `period_ps`: `h / period`.
pub fn fss_from_period(period_ps: f64) -> Result<f64> {
    if !(period_ps > 0.0 && period_ps.is_finite()) {
        return Err(Error::validation(format!("period must be positive, got {period_ps}")));
    }
    Ok(PLANCK_UEV_PS / period_ps)
}

/// Oscillation period (ps) for a splitting `fss_uev`: `h / fss`.
pub fn period_from_fss(fss_uev: f64) -> Result<f64> {
    if !(fss_uev > 0.0 && fss_uev.is_finite()) {
        return Err(Error::validation(format!("fss must be positive, got {fss_uev}")));
    }
    Ok(PLANCK_UEV_PS / fss_uev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FssScanOptions {
    /// Energy oscillation cycles per radian of plate rotation; 4 for a
    /// half-wave plate in front of a fixed polarizer.
    pub angular_multiplier: f64,
    pub min_samples: usize,
}

impl Default for FssScanOptions {
    fn default() -> Self {
        FssScanOptions {
            angular_multiplier: 4.0,
            min_samples: 8,
        }
    }
}

/// Splitting from peak energies recorded while rotating the analysis plate.
///
/// Fits `y0 + A·sin(m·θ + phi0)` with the multiplier `m` fixed and returns
/// the peak-to-peak amplitude `2A` as the FSS. The reported sinusoid has
/// `P = 2π/m` (held fixed, zero error). The angles must cover half a turn:
/// their range plus one median step must reach π.
pub fn fss_from_peak_positions(angles: &[f64], peak_energy: &[f64]) -> Result<(f64, FitResult)> {
    fss_from_peak_positions_with(angles, peak_energy, &FssScanOptions::default())
}

pub fn fss_from_peak_positions_with(
    angles: &[f64],
    peak_energy: &[f64],
    opts: &FssScanOptions,
) -> Result<(f64, FitResult)> {
    if angles.len() != peak_energy.len() {
        return Err(Error::validation(format!(
            "{} angles but {} energies",
            angles.len(),
            peak_energy.len()
        )));
    }
    if angles.len() < opts.min_samples.max(4) {
        return Err(Error::validation(format!(
            "need at least {} samples, got {}",
            opts.min_samples.max(4),
            angles.len()
        )));
    }
    if angles.iter().chain(peak_energy).any(|v| !v.is_finite()) {
        return Err(Error::validation("angles and energies must be finite"));
    }
    if !(opts.angular_multiplier > 0.0) {
        return Err(Error::validation("angular multiplier must be positive"));
    }
    let mut sorted = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut steps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let coverage = sorted[sorted.len() - 1] - sorted[0] + steps[steps.len() / 2];
    if coverage < PI * (1.0 - 1e-9) {
        return Err(Error::validation(format!(
            "angular coverage {coverage:.4} rad is less than half a rotation"
        )));
    }
    let m = opts.angular_multiplier;
    let one = |_: f64| 1.0;
    let s = |t: f64| (m * t).sin();
    let c = |t: f64| (m * t).cos();
    let w = vec![1.0; angles.len()];
    let (coef, resid) = linear_least_squares(angles, peak_energy, &w, &[&one, &s, &c])
        .ok_or_else(|| Error::Fit("sinusoid normal equations are singular".into()))?;
    let amp = coef[1].hypot(coef[2]);
    let phase = wrap_phase(coef[2].atan2(coef[1]));
    let dof = (angles.len() - 3) as f64;
    let reduced_chi2 = resid / dof;
    let (se_y0, se_a, se_phi) = linear_errors(angles, m, &coef, reduced_chi2);
    let params = BTreeMap::from([
        ("y0".to_string(), coef[0]),
        ("A".to_string(), amp),
        ("P".to_string(), TAU / m),
        ("phi0".to_string(), phase),
    ]);
    let std_errors = BTreeMap::from([
        ("y0".to_string(), se_y0),
        ("A".to_string(), se_a),
        ("P".to_string(), 0.0),
        ("phi0".to_string(), se_phi),
    ]);
    let fit = FitResult {
        model: FitKind::Sinusoid,
        params,
        std_errors,
        reduced_chi2,
        converged: true,
    };
    Ok((2.0 * amp, fit))
}

/// Standard errors of `y0`, amplitude and phase propagated from the linear
/// coefficients `(y0, a, b)` of `y0 + a·sin + b·cos`.
fn linear_errors(angles: &[f64], m: f64, coef: &[f64], s2: f64) -> (f64, f64, f64) {
    let rows: Vec<[f64; 3]> = angles.iter().map(|t| [1.0, (m * t).sin(), (m * t).cos()]).collect();
    let xtx = nalgebra::Matrix3::from_fn(|i, j| rows.iter().map(|r| r[i] * r[j]).sum());
    let Some(cov) = xtx.try_inverse() else {
        return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    };
    let cov = cov * s2;
    let (a, b) = (coef[1], coef[2]);
    let r2 = a * a + b * b;
    if r2 == 0.0 {
        return (cov[(0, 0)].sqrt(), cov[(1, 1)].max(cov[(2, 2)]).sqrt(), PI);
    }
    let r = r2.sqrt();
    // Gradients of r = |(a, b)| and φ = atan2(b, a).
    let (ga, gb) = (a / r, b / r);
    let var_r = ga * ga * cov[(1, 1)] + 2.0 * ga * gb * cov[(1, 2)] + gb * gb * cov[(2, 2)];
    let (pa, pb) = (-b / r2, a / r2);
    let var_phi = pa * pa * cov[(1, 1)] + 2.0 * pa * pb * cov[(1, 2)] + pb * pb * cov[(2, 2)];
    (cov[(0, 0)].sqrt(), var_r.max(0.0).sqrt(), var_phi.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstLensRate {
    /// Photon rate at the first lens, MHz.
    pub rate_mhz: f64,
    /// Photons per excitation pulse.
    pub fraction_of_pulses: f64,
}

impl FirstLensRate {
    /// Warning text when a separately reported rate disagrees with the one
    /// implied by the inputs by more than `rel_tol`.
    pub fn compare_reported(&self, reported_mhz: f64, rel_tol: f64) -> Option<String> {
        let rel = (reported_mhz - self.rate_mhz).abs() / self.rate_mhz;
        (rel > rel_tol).then(|| {
            format!(
                "reported first-lens rate {reported_mhz} MHz differs from the {:.6} MHz implied by the \
                 measured rate and efficiencies ({:.1}% discrepancy)",
                self.rate_mhz,
                100.0 * rel
            )
        })
    }
}

/// Photon rate at the collection optics: `measured_cps / (setup_eff ·
/// detector_eff)`, and its ratio to the repetition rate.
pub fn first_lens_rate(measured_cps: f64, setup_eff: f64, detector_eff: f64, rep_rate_mhz: f64) -> Result<FirstLensRate> {
    for (name, v) in [
        ("measured rate", measured_cps),
        ("setup efficiency", setup_eff),
        ("detector efficiency", detector_eff),
        ("repetition rate", rep_rate_mhz),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("setup efficiency", setup_eff), ("detector efficiency", detector_eff)] {
        if v > 1.0 {
            return Err(Error::validation(format!("{name} must not exceed 1, got {v}")));
        }
    }
    let rate_mhz = measured_cps / (setup_eff * detector_eff) * 1e-6;
    Ok(FirstLensRate {
        rate_mhz,
        fraction_of_pulses: rate_mhz / rep_rate_mhz,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    #[test]
    fn period_and_fss_conversions() {
        let fss = fss_from_period(890.0).unwrap();
        assert!((fss - 4.647).abs() < 5e-4, "{fss}");
        assert!((4.62..=4.67).contains(&fss));
        let p = period_from_fss(4.6).unwrap();
        assert!((p - 899.0).abs() < 0.5, "{p}");
        // h from its SI value: 4.135667696e-15 eV·s = 4135.667696 µeV·ps.
        assert!((PLANCK_UEV_PS - 4_135.667_696).abs() < 1e-3);
        for bad in [0.0, -1.0, f64::NAN] {
            assert!(fss_from_period(bad).is_err());
            assert!(period_from_fss(bad).is_err());
        }
    }

    fn scan(amplitude_pp: f64, phase: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let angles: Vec<f64> = (0..=36).map(|i| (5.0 * i as f64).to_radians()).collect();
        let energies = angles
            .iter()
            .map(|t| 953_000.0 + 0.5 * amplitude_pp * (4.0 * t + phase).sin() + if noise > 0.0 { n.sample(&mut rng) } else { 0.0 })
            .collect();
        (angles, energies)
    }

    #[test]
    fn recovers_splitting_from_scan() {
        let (a, e) = scan(4.6, 0.7, 0.2, 3);
        let (fss, fit) = fss_from_peak_positions(&a, &e).unwrap();
        assert!((fss - 4.6).abs() < 0.1, "{fss}");
        assert!((fit.param("P") - PI / 2.0).abs() < 1e-15);
        assert!(fit.std_error("A") > 0.0 && fit.std_error("A") < 0.1);
    }

    #[test]
    fn flat_energies_give_zero() {
        let (a, e) = scan(0.0, 0.0, 0.0, 0);
        let (fss, _) = fss_from_peak_positions(&a, &e).unwrap();
        assert!(fss.abs() < 1e-6, "{fss}");
        let (a, e) = scan(0.0, 0.0, 0.05, 9);
        let (fss, fit) = fss_from_peak_positions(&a, &e).unwrap();
        assert!(fss < 4.0 * fit.std_error("A"), "{fss}");
    }

    #[test]
    fn antiphase_traces() {
        let (a, x) = scan(4.6, 0.3, 0.0, 0);
        let (_, xx) = scan(4.6, 0.3 + PI, 0.0, 0);
        let (fx, fit_x) = fss_from_peak_positions(&a, &x).unwrap();
        let (fxx, fit_xx) = fss_from_peak_positions(&a, &xx).unwrap();
        assert!((fx - fxx).abs() < 1e-9);
        let dphi = wrap_phase(fit_x.param("phi0") - fit_xx.param("phi0"));
        assert!((dphi.abs() - PI).abs() < 1e-9, "{dphi}");
    }

    #[test]
    fn coverage_and_count_enforced() {
        let angles: Vec<f64> = (0..20).map(|i| (5.0 * i as f64).to_radians()).collect();
        let e = vec![1.0; 20];
        assert!(matches!(fss_from_peak_positions(&angles, &e), Err(Error::Validation(_))));
        let few: Vec<f64> = (0..7).map(|i| i as f64 * 0.5).collect();
        assert!(fss_from_peak_positions(&few, &[1.0; 7]).is_err());
        let opts = FssScanOptions {
            angular_multiplier: 2.0,
            ..Default::default()
        };
        let (a, _) = scan(0.0, 0.0, 0.0, 0);
        let e: Vec<f64> = a.iter().map(|t| (2.0 * t).cos()).collect();
        let (fss, fit) = fss_from_peak_positions_with(&a, &e, &opts).unwrap();
        assert!((fss - 2.0).abs() < 1e-9);
        assert!((fit.param("P") - PI).abs() < 1e-15);
    }

    #[test]
    fn first_lens_examples() {
        let r = first_lens_rate(40_000.0, 0.008, 0.5, 80.0).unwrap();
        assert!((r.rate_mhz - 10.0).abs() < 1e-9);
        assert!((r.fraction_of_pulses - 0.125).abs() < 1e-12);
        assert!(r.compare_reported(16.67, 0.01).is_some());
        assert!(r.compare_reported(10.0, 0.01).is_none());
        let unit = first_lens_rate(2.5e6, 1.0, 1.0, 80.0).unwrap();
        assert!((unit.rate_mhz - 2.5).abs() < 1e-12);
        assert!((unit.fraction_of_pulses - 2.5 / 80.0).abs() < 1e-15);
        assert!(first_lens_rate(1.0, 0.0, 0.5, 80.0).is_err());
        assert!(first_lens_rate(1.0, 1.5, 0.5, 80.0).is_err());
    }

    proptest! {
        #[test]
        fn conversions_are_inverse(x in 1e-3f64..1e6) {
            let back = period_from_fss(fss_from_period(x).unwrap()).unwrap();
            prop_assert!((back / x - 1.0).abs() < 1e-12);
        }

        #[test]
        fn first_lens_is_linear(cps in 1.0f64..1e8, se in 1e-4f64..1.0, de in 1e-3f64..1.0) {
            let a = first_lens_rate(cps, se, de, 80.0).unwrap();
            let b = first_lens_rate(2.0 * cps, se, de, 80.0).unwrap();
            prop_assert_eq!(b.rate_mhz, 2.0 * a.rate_mhz);
            prop_assert_eq!(b.fraction_of_pulses, 2.0 * a.fraction_of_pulses);
        }
    }
}
