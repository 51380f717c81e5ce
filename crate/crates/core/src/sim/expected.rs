//! Expected outcome of the windowed g²(0) procedure for the autocorrelation
//! model of [`simulate_autocorrelation_run`](super::simulate_autocorrelation_run).
//!
//! Emission-time densities are tabulated on a 1 ps grid. Convolution with an
//! exponential is done by the exact recursion for `y' = r·(p − y)`, with
//! the source term integrated by the trapezoid rule. Window probabilities
//! then reduce to one-dimensional quadratures.

use super::{EmitterConfig, Species};
use crate::error::{Error, Result};

const STEP_PS: f64 = 1.0;

/// A probability density on `[0, len·STEP_PS)` with its running integral.
struct Tabulated {
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl Tabulated {
    fn from_density(density: Vec<f64>) -> Self {
        let mut cdf = vec![0.0; density.len()];
        for i in 1..density.len() {
            cdf[i] = cdf[i - 1] + 0.5 * STEP_PS * (density[i - 1] + density[i]);
        }
        Tabulated { density, cdf }
    }

    fn exponential(rate: f64, len: usize) -> Self {
        Self::from_density((0..len).map(|i| rate * (-rate * i as f64 * STEP_PS).exp()).collect())
    }

    /// Density of `T + E` with `E ~ Exp(rate)` independent of `T`.
    fn then_exponential(&self, rate: f64) -> Self {
        let decay = (-rate * STEP_PS).exp();
        let p = &self.density;
        let mut y = vec![0.0; p.len()];
        for i in 1..p.len() {
            y[i] = decay * y[i - 1] + 0.5 * rate * STEP_PS * (decay * p[i - 1] + p[i]);
        }
        Self::from_density(y)
    }

    fn mixture(parts: &[(f64, &Tabulated)]) -> Self {
        let len = parts[0].1.density.len();
        let density = (0..len).map(|i| parts.iter().map(|(w, t)| w * t.density[i]).sum()).collect();
        Self::from_density(density)
    }

    /// `P(T ≤ x)` with linear interpolation.
    fn cdf_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let u = x / STEP_PS;
        let i = u.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return *self.cdf.last().expect("nonempty grid");
        }
        let f = u - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }

    /// `P(lo ≤ S − T < hi)` for independent `S ~ other`, `T ~ self`.
    fn difference_in(&self, other: &Tabulated, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        let n = self.density.len();
        for i in 0..n {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            let t = i as f64 * STEP_PS;
            let p = self.density[i];
            if p == 0.0 {
                continue;
            }
            acc += w * p * (other.cdf_at(t + hi) - other.cdf_at(t + lo));
        }
        acc * STEP_PS
    }
}

/// Per-pulse emission model of one species: photon-time densities with their
/// expected multiplicities, plus the same-pulse pair-delay density.
struct EmissionModel {
    photons: Vec<(f64, Tabulated)>,
    /// Delay between the two photons of a recaptured pulse (XX only).
    pair_delay: Option<Tabulated>,
    recapture: f64,
}

impl EmissionModel {
    fn new(cfg: &EmitterConfig, species: Species) -> Self {
        let a = 1.0 / cfg.tau_xx;
        let b = 1.0 / cfg.tau_x;
        let a_c = a + 1.0 / cfg.recapture_time;
        let r = cfg.recapture_probability;
        let span = 40.0 * cfg.tau_xx.max(cfg.tau_x) + 4.0 * (cfg.tau_xx + cfg.tau_x);
        let len = (span / STEP_PS).ceil() as usize + 2;
        let first = Tabulated::exponential(a, len);
        let gap = Tabulated::exponential(a, len).then_exponential(a_c);
        let second = first.then_exponential(a).then_exponential(a_c);
        match species {
            Species::Xx => EmissionModel {
                photons: vec![(1.0, first), (r, second)],
                pair_delay: Some(gap),
                recapture: r,
            },
            Species::X => {
                let x = Tabulated::mixture(&[
                    (1.0 - r, &first.then_exponential(b)),
                    (r, &second.then_exponential(b)),
                ]);
                EmissionModel {
                    photons: vec![(1.0, x)],
                    pair_delay: None,
                    recapture: 0.0,
                }
            }
        }
    }

    fn photons_per_pulse(&self) -> f64 {
        self.photons.iter().map(|(w, _)| w).sum()
    }
}

/// Expected coincidences per pulse between arm `a` and arm `b` with delay in
/// `[lo, hi)`, signal photons only.
fn signal_in(model: &EmissionModel, cfg: &EmitterConfig, lo: f64, hi: f64) -> f64 {
    let f = cfg.excitation_fraction;
    let arm = 0.5 * cfg.efficiency();
    let period = cfg.rep_period();
    let mut total = 0.0;
    if let Some(gap) = &model.pair_delay {
        // Positive delay: first photon on arm a; negative: on arm b.
        let pos = gap.cdf_at(hi) - gap.cdf_at(lo);
        let neg = gap.cdf_at(-lo) - gap.cdf_at(-hi);
        total += f * model.recapture * arm * arm * (pos + neg);
    }
    let m_lo = ((lo - period) / period).floor() as i64 - 1;
    let m_hi = ((hi + period) / period).ceil() as i64 + 1;
    for m in m_lo..=m_hi {
        if m == 0 {
            continue;
        }
        let shift = m as f64 * period;
        for (wi, ti) in &model.photons {
            for (wj, tj) in &model.photons {
                let p = ti.difference_in(tj, lo - shift, hi - shift);
                total += f * f * wi * wj * arm * arm * p;
            }
        }
    }
    total
}

/// Signal-only window sums per pulse: zero-delay window, mean side-peak
/// window, and the mean detected photons per pulse and arm.
fn window_signals(cfg: &EmitterConfig, species: Species, window: f64, n_side_peaks: usize) -> Result<(f64, f64, f64)> {
    cfg.validate()?;
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::validation(format!("window must be positive, got {window}")));
    }
    if n_side_peaks == 0 {
        return Err(Error::validation("need at least one side peak"));
    }
    let model = EmissionModel::new(cfg, species);
    let w = 0.5 * window;
    let period = cfg.rep_period();
    let at = |c: f64| signal_in(&model, cfg, c - w, c + w);
    let centre = at(0.0);
    let side = (1..=n_side_peaks)
        .map(|k| {
            let c = k as f64 * period;
            at(c) + at(-c)
        })
        .sum::<f64>()
        / (2.0 * n_side_peaks as f64);
    let mu = cfg.excitation_fraction * model.photons_per_pulse() * 0.5 * cfg.efficiency();
    Ok((centre, side, mu))
}

/// Background coincidences per pulse in a window of width `window`:
/// signal–background on either arm plus background–background.
fn background_in(cfg: &EmitterConfig, mu: f64, window: f64) -> f64 {
    let beta = cfg.background_rate * 1e-12;
    2.0 * mu * beta * window + beta * beta * cfg.rep_period() * window
}

/// Expected value of the windowed g²(0) estimate: coincidences within
/// `±window/2` of zero delay divided by the mean over the first
/// `n_side_peaks` side peaks on each side.
///
/// Includes uncorrelated background on both channels and leakage between
/// neighbouring peaks; assumes zero detector jitter and neglects the run
/// edges.
pub fn expected_g2_zero(cfg: &EmitterConfig, species: Species, window: f64, n_side_peaks: usize) -> Result<f64> {
    let (centre, side, mu) = window_signals(cfg, species, window, n_side_peaks)?;
    let bg = background_in(cfg, mu, window);
    Ok((centre + bg) / (side + bg))
}

/// Bisects a monotone increasing `g(x)` on `[lo, hi]` for `g(x) = target`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Recapture probability giving an expected XX g²(0) of `target`.
pub fn solve_recapture_for_g2(cfg: &EmitterConfig, target: f64, window: f64, n_side_peaks: usize) -> Result<f64> {
    let g = |r: f64| {
        let c = EmitterConfig {
            recapture_probability: r,
            ..*cfg
        };
        expected_g2_zero(&c, Species::Xx, window, n_side_peaks)
    };
    let (g0, g1) = (g(0.0)?, g(1.0)?);
    if !(g0 <= target && target <= g1) {
        return Err(Error::validation(format!(
            "XX g2(0) target {target} outside the reachable range [{g0:.4}, {g1:.4}]"
        )));
    }
    bisect(0.0, 1.0, target, g)
}

/// Background rate (counts/s per channel) giving an expected g²(0) of
/// `target` for `species`. The background term is quadratic in the rate, so
/// the solution is closed form.
pub fn solve_background_for_g2(
    cfg: &EmitterConfig,
    species: Species,
    target: f64,
    window: f64,
    n_side_peaks: usize,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::validation(format!("g2(0) target must lie in (0, 1), got {target}")));
    }
    let (centre, side, mu) = window_signals(cfg, species, window, n_side_peaks)?;
    let needed = (target * side - centre) / (1.0 - target);
    if needed < 0.0 {
        return Err(Error::validation(format!(
            "g2(0) without background already exceeds {target}"
        )));
    }
    // β²·T·W + 2·μ·W·β − needed = 0, β in counts per ps.
    let (qa, qb) = (cfg.rep_period() * window, 2.0 * mu * window);
    let beta = (-qb + (qb * qb + 4.0 * qa * needed).sqrt()) / (2.0 * qa);
    Ok(beta * 1e12)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `P(D > d)` for `D = X₁ − X₂` with `Xᵢ` i.i.d. with density
    /// `Σ cᵢ exp(−rᵢ t)`.
    fn tail_of_difference(c: &[f64], r: &[f64], d: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                s += c[i] * c[j] * (-r[i] * d).exp() / (r[i] * (r[i] + r[j]));
            }
        }
        s
    }

    #[test]
    fn hypoexponential_difference_matches_closed_form() {
        let (a, b) = (1.0 / 1100.0, 1.0 / 1610.0);
        let k = a * b / (b - a);
        let x = Tabulated::exponential(a, 80_000).then_exponential(b);
        for w in [100.0, 760.0, 2500.0] {
            let exact = 1.0 - 2.0 * tail_of_difference(&[k, -k], &[a, b], w);
            let got = x.difference_in(&x, -w, w);
            assert!((got - exact).abs() < 1e-5, "w={w}: {got} vs {exact}");
        }
    }

    #[test]
    fn recaptured_photon_density_matches_closed_form() {
        let (a, c) = (1.0 / 1100.0, 1.0 / 546.0);
        let t = Tabulated::exponential(a, 80_000).then_exponential(a).then_exponential(a + c);
        for time in [200.0f64, 1000.0, 3000.0, 9000.0] {
            let exact = a * a * (a + c) / (c * c) * ((c * time - 1.0) * (-a * time).exp() + (-(a + c) * time).exp());
            let got = t.density[time as usize];
            assert!((got - exact).abs() < 1e-5 * exact.abs().max(1e-9), "t={time}: {got} vs {exact}");
        }
        assert!((t.cdf.last().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_photon_source_without_background_has_zero_g2() {
        let cfg = EmitterConfig {
            rep_rate: 1.0,
            ..EmitterConfig::lossless()
        };
        let g = expected_g2_zero(&cfg, Species::X, 1500.0, 2).unwrap();
        assert!(g < 1e-9, "{g}");
    }

    #[test]
    fn neighbouring_peaks_leak_into_the_centre_window() {
        // X photon times are hypoexponential; window sums follow from the
        // closed-form tail of their difference.
        let cfg = EmitterConfig::lossless();
        let (a, b) = (1.0 / cfg.tau_xx, 1.0 / cfg.tau_x);
        let k = a * b / (b - a);
        let s = |d: f64| tail_of_difference(&[k, -k], &[a, b], d);
        let (t, w) = (cfg.rep_period(), 750.0);
        let in_band = |c: f64| s(c - w) - s(c + w);
        let centre = 2.0 * in_band(t);
        let side = (1.0 - 2.0 * s(w)) + in_band(t) + in_band(2.0 * t);
        let exact = centre / side;
        let got = expected_g2_zero(&cfg, Species::X, 2.0 * w, 1).unwrap();
        assert!(exact > 1e-3);
        assert!((got - exact).abs() < 1e-3 * exact, "{got} vs {exact}");
    }

    #[test]
    fn uncorrelated_background_drives_g2_to_one() {
        let cfg = EmitterConfig {
            background_rate: 1e12,
            ..EmitterConfig::lossless()
        };
        let g = expected_g2_zero(&cfg, Species::X, 1500.0, 2).unwrap();
        assert!((g - 1.0).abs() < 1e-3, "{g}");
    }

    #[test]
    fn recapture_g2_without_window_losses() {
        // A window much wider than the peaks keeps every coincidence:
        // g2 → 2r / (f (1 + r)²).
        let cfg = EmitterConfig {
            recapture_probability: 0.3,
            rep_rate: 1.0,
            ..EmitterConfig::lossless()
        };
        let g = expected_g2_zero(&cfg, Species::Xx, 200_000.0, 1).unwrap();
        let exact = 2.0 * 0.3 / 1.3f64.powi(2);
        assert!((g - exact).abs() < 1e-5, "{g} vs {exact}");
    }

    #[test]
    fn solvers_hit_their_targets() {
        let base = EmitterConfig::lossless();
        let r = solve_recapture_for_g2(&base, 0.38, 1500.0, 2).unwrap();
        let c = EmitterConfig {
            recapture_probability: r,
            ..base
        };
        assert!((expected_g2_zero(&c, Species::Xx, 1500.0, 2).unwrap() - 0.38).abs() < 1e-9);

        let bg = solve_background_for_g2(&base, Species::X, 0.024, 1800.0, 3).unwrap();
        let c = EmitterConfig {
            background_rate: bg,
            ..base
        };
        assert!((expected_g2_zero(&c, Species::X, 1800.0, 3).unwrap() - 0.024).abs() < 1e-9);
        assert!(solve_recapture_for_g2(&base, 5.0, 1500.0, 2).is_err());
    }
}
