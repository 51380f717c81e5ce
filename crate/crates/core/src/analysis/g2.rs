use serde::{Deserialize, Serialize};

use super::fit::{fit_model, poisson_weights, FitKind, FitResult};
use super::Histogram;
use crate::error::{Error, Result};

/// Half-width of the side-peak fit windows, as a fraction of the period.
pub const SIDE_PEAK_WINDOW: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    pub g2_zero: f64,
    /// Integration window Δ (ps): mean FWHM of the side-peak fits.
    pub window_delta: f64,
    /// FWHM of each side peak, ordered −n … −1, 1 … n.
    pub side_peak_fwhm: Vec<f64>,
    /// Fitted centre of each side peak, same order.
    pub side_peak_centers: Vec<f64>,
    /// Zero-delay offset: mean of `center − k·period` over the side peaks.
    pub zero_offset: f64,
    pub center_counts: u64,
    pub mean_side_counts: f64,
}

/// Windowed g²(0) of a pulsed autocorrelation histogram.
///
/// Each of the `n_side_peaks` peaks on either side is fitted with a
/// Lorentzian over `±0.4·rep_period` around `k·rep_period`. The window Δ is
/// their mean FWHM; g²(0) is the count in `[−Δ/2, Δ/2]` around zero delay
/// divided by the mean count in equal windows around the side peaks. Windows
/// are shifted by the mean fitted offset of the side peaks, and a bin belongs
/// to a window when its centre does.
pub fn g2_zero(h: &Histogram, rep_period: f64, n_side_peaks: usize) -> Result<G2Result> {
    if !(rep_period > 0.0 && rep_period.is_finite()) {
        return Err(Error::validation(format!("rep period must be positive, got {rep_period}")));
    }
    if n_side_peaks == 0 {
        return Err(Error::validation("need at least one side peak"));
    }
    let reach = (n_side_peaks as f64 + SIDE_PEAK_WINDOW) * rep_period;
    let (first, last) = (h.bin_start(0), h.bin_start(h.len()));
    if first > -reach || last < reach {
        return Err(Error::validation(format!(
            "histogram [{first}, {last}) does not span ±{reach} ps for {n_side_peaks} side peaks"
        )));
    }
    let half = SIDE_PEAK_WINDOW * rep_period;
    let n = n_side_peaks as i64;
    let mut fwhm = Vec::new();
    let mut centers = Vec::new();
    let mut offsets = Vec::new();
    for k in (-n..=-1).chain(1..=n) {
        let c = k as f64 * rep_period;
        let (x, y): (Vec<f64>, Vec<f64>) = (0..h.len())
            .filter(|&i| (h.bin_center(i) - c).abs() <= half)
            .map(|i| (h.bin_center(i), h.counts()[i] as f64))
            .unzip();
        let fit = fit_model(FitKind::Lorentzian, &x, &y, Some(&poisson_weights(&y)), None)
            .map_err(|e| Error::Fit(format!("side peak {k}: {e}")))?;
        check_peak(k, &fit, c, half)?;
        fwhm.push(fit.param("gamma"));
        centers.push(fit.param("x0"));
        offsets.push(fit.param("x0") - c);
    }
    let delta = fwhm.iter().sum::<f64>() / fwhm.len() as f64;
    let offset = offsets.iter().sum::<f64>() / offsets.len() as f64;
    let window = |c: f64| h.sum_between(c - 0.5 * delta, c + 0.5 * delta);
    let center_counts = window(offset);
    let side_total: u64 = (-n..=-1)
        .chain(1..=n)
        .map(|k| window(k as f64 * rep_period + offset))
        .sum();
    let mean_side = side_total as f64 / (2 * n_side_peaks) as f64;
    if mean_side <= 0.0 {
        return Err(Error::Fit("side-peak windows are empty".into()));
    }
    Ok(G2Result {
        g2_zero: center_counts as f64 / mean_side,
        window_delta: delta,
        side_peak_fwhm: fwhm,
        side_peak_centers: centers,
        zero_offset: offset,
        center_counts,
        mean_side_counts: mean_side,
    })
}

fn check_peak(k: i64, fit: &FitResult, nominal: f64, half: f64) -> Result<()> {
    let (a, gamma, x0) = (fit.param("A"), fit.param("gamma"), fit.param("x0"));
    let problem = if !fit.converged {
        Some("Lorentzian fit did not converge".to_string())
    } else if !(a > 0.0) {
        Some(format!("non-positive amplitude {a}"))
    } else if !(gamma > 0.0 && gamma < 2.0 * half) {
        Some(format!("FWHM {gamma} outside (0, {})", 2.0 * half))
    } else if (x0 - nominal).abs() > half {
        Some(format!("centre {x0} outside the fit window"))
    } else {
        None
    };
    match problem {
        Some(msg) => Err(Error::Fit(format!("side peak {k}: {msg}"))),
        None => Ok(()),
    }
}
