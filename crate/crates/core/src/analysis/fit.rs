//! Weighted least-squares curve fits by Levenberg–Marquardt.
//!
//! Each model has a grid or linear-algebra initializer so fits converge from
//! data alone; explicit initial values override the automatic ones.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `B + A·exp(−(x − x0)/tau)` with `x0` fixed to the smallest `x`.
    Exponential,
    /// `y0 + A·sin(2πx/P + phi0)` with `A ≥ 0` and `phi0 ∈ (−π, π]`.
    Sinusoid,
    /// `C + A·exp(−|x − t0|/t_d)·(1 − exp(−|x − t0|/t_c))`.
    Recapture,
    /// `log y = s·log x + b`, fitted in log–log space.
    PowerLaw,
    /// `B + A·(gamma/2)² / ((x − x0)² + (gamma/2)²)`; `gamma` is the FWHM.
    Lorentzian,
}

impl FitKind {
    pub const ALL: [FitKind; 5] = [
        FitKind::Exponential,
        FitKind::Sinusoid,
        FitKind::Recapture,
        FitKind::PowerLaw,
        FitKind::Lorentzian,
    ];

    /// Parameter names in the order used internally.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            FitKind::Exponential => &["B", "A", "tau", "x0"],
            FitKind::Sinusoid => &["y0", "A", "P", "phi0"],
            FitKind::Recapture => &["C", "A", "t0", "t_d", "t_c"],
            FitKind::PowerLaw => &["s", "b"],
            FitKind::Lorentzian => &["B", "A", "x0", "gamma"],
        }
    }

    /// Number of adjusted parameters (`x0` of the exponential is fixed).
    pub fn free_params(self) -> usize {
        match self {
            FitKind::Exponential => 3,
            k => k.param_names().len(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitKind::Exponential => "exponential",
            FitKind::Sinusoid => "sinusoid",
            FitKind::Recapture => "recapture",
            FitKind::PowerLaw => "power_law",
            FitKind::Lorentzian => "lorentzian",
        }
    }

    /// Model value at `x` for parameters in [`param_names`](Self::param_names) order.
    pub fn eval(self, x: f64, p: &[f64]) -> f64 {
        match self {
            FitKind::Exponential => p[0] + p[1] * (-(x - p[3]) / p[2]).exp(),
            FitKind::Sinusoid => p[0] + p[1] * (TAU * x / p[2] + p[3]).sin(),
            FitKind::Recapture => {
                let u = (x - p[2]).abs();
                p[0] + p[1] * (-u / p[3]).exp() * (1.0 - (-u / p[4]).exp())
            }
            FitKind::PowerLaw => (p[0] * x.ln() + p[1]).exp(),
            FitKind::Lorentzian => {
                let h2 = 0.25 * p[3] * p[3];
                p[0] + p[1] * h2 / ((x - p[2]).powi(2) + h2)
            }
        }
    }
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "power" && *k == FitKind::PowerLaw))
            .ok_or_else(|| Error::validation(format!("unknown fit model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitKind,
    pub params: BTreeMap<String, f64>,
    /// One standard deviation from the covariance scaled by the reduced χ².
    /// Fixed parameters report 0.
    pub std_errors: BTreeMap<String, f64>,
    pub reduced_chi2: f64,
    pub converged: bool,
}

impl FitResult {
    /// Parameter by name; panics on a name the model does not have.
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.std_errors[name]
    }

    /// Parameters in [`FitKind::param_names`] order.
    pub fn values(&self) -> Vec<f64> {
        self.model.param_names().iter().map(|n| self.params[*n]).collect()
    }

    /// Evaluates the fitted model.
    pub fn eval(&self, x: f64) -> f64 {
        self.model.eval(x, &self.values())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative parameter step below which the fit counts as converged.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 2000,
            xtol: 1e-12,
        }
    }
}

/// Inverse-variance weights for count data: `1 / max(y, 1)`.
pub fn poisson_weights(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| 1.0 / v.max(1.0)).collect()
}

/// Fits `kind` to `(x, y)` with optional inverse-variance `weights` (uniform
/// when absent; for the power law, uniform in `log y`) and optional initial
/// values keyed by parameter name.
///
/// Non-convergence is reported through `converged = false` with the best
/// parameters found; invalid input is an error.
pub fn fit_model(
    kind: FitKind,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    init: Option<&BTreeMap<String, f64>>,
) -> Result<FitResult> {
    fit_model_with(kind, x, y, weights, init, &LmOptions::default())
}

pub fn fit_model_with(
    kind: FitKind,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    init: Option<&BTreeMap<String, f64>>,
    opts: &LmOptions,
) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::validation(format!("x has {} points but y has {}", x.len(), y.len())));
    }
    if x.len() < kind.free_params() + 1 {
        return Err(Error::validation(format!(
            "{kind} fit needs at least {} points, got {}",
            kind.free_params() + 1,
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("fit data must be finite"));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != x.len() => {
            return Err(Error::validation(format!("{} weights for {} points", w.len(), x.len())))
        }
        Some(w) if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) => {
            return Err(Error::validation("weights must be finite and nonnegative"))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; x.len()],
    };
    let (lo, hi) = min_max(x);
    if hi - lo <= 0.0 {
        return Err(Error::validation("degenerate x: all abscissae are equal"));
    }
    if let Some(init) = init {
        if let Some(bad) = init.keys().find(|k| !kind.param_names().contains(&k.as_str())) {
            return Err(Error::validation(format!("{kind} has no parameter '{bad}'")));
        }
    }

    match kind {
        FitKind::PowerLaw => fit_power_law(x, y, weights.map(|_| w.as_slice()), init, opts),
        _ => {
            let mut p = initial_guess(kind, x, y, &w);
            if let Some(init) = init {
                for (i, name) in kind.param_names().iter().enumerate() {
                    if let Some(&v) = init.get(*name) {
                        p[i] = v;
                    }
                }
            }
            let free = kind.free_params();
            let fixed = p[free..].to_vec();
            let total = kind.param_names().len();
            let full = |q: &[f64]| {
                let mut buf = [0.0; 5];
                buf[..free].copy_from_slice(q);
                buf[free..total].copy_from_slice(&fixed);
                buf
            };
            let model = |xv: f64, q: &[f64]| kind.eval(xv, &full(q)[..total]);
            let grad = |xv: f64, q: &[f64], g: &mut [f64]| gradient(kind, xv, &full(q)[..total], g);
            let out = levenberg_marquardt(x, y, &w, &p[..free], &model, &grad, opts);
            let mut params = out.params.clone();
            params.extend_from_slice(&fixed);
            let mut errors = out.std_errors.clone();
            errors.resize(params.len(), 0.0);
            canonicalize(kind, &mut params);
            Ok(assemble(kind, params, errors, out.reduced_chi2, out.converged))
        }
    }
}

fn assemble(kind: FitKind, params: Vec<f64>, errors: Vec<f64>, reduced_chi2: f64, converged: bool) -> FitResult {
    let names = kind.param_names();
    FitResult {
        model: kind,
        params: names.iter().map(|n| n.to_string()).zip(params).collect(),
        std_errors: names.iter().map(|n| n.to_string()).zip(errors).collect(),
        reduced_chi2,
        converged,
    }
}

/// Maps sign and phase ambiguities onto one representative.
fn canonicalize(kind: FitKind, p: &mut [f64]) {
    match kind {
        FitKind::Sinusoid => {
            if p[2] < 0.0 {
                p[2] = -p[2];
                p[3] = -p[3];
                p[1] = -p[1];
            }
            if p[1] < 0.0 {
                p[1] = -p[1];
                p[3] += PI;
            }
            p[3] = wrap_phase(p[3]);
        }
        FitKind::Lorentzian => p[3] = p[3].abs(),
        _ => {}
    }
}

/// Wraps into `(−π, π]`.
pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let mut r = phi.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Partial derivatives of [`FitKind::eval`] with respect to the free
/// parameters.
fn gradient(kind: FitKind, x: f64, p: &[f64], g: &mut [f64]) {
    match kind {
        FitKind::Exponential => {
            let e = (-(x - p[3]) / p[2]).exp();
            g[0] = 1.0;
            g[1] = e;
            g[2] = p[1] * e * (x - p[3]) / (p[2] * p[2]);
        }
        FitKind::Sinusoid => {
            let arg = TAU * x / p[2] + p[3];
            let (s, c) = arg.sin_cos();
            g[0] = 1.0;
            g[1] = s;
            g[2] = -p[1] * c * TAU * x / (p[2] * p[2]);
            g[3] = p[1] * c;
        }
        FitKind::Recapture => {
            let d = x - p[2];
            let u = d.abs();
            let (ed, ec) = ((-u / p[3]).exp(), (-u / p[4]).exp());
            let shape = ed * (1.0 - ec);
            // d(shape)/du
            let dshape = -shape / p[3] + ed * ec / p[4];
            g[0] = 1.0;
            g[1] = shape;
            g[2] = -p[1] * dshape * d.signum();
            g[3] = p[1] * shape * u / (p[3] * p[3]);
            g[4] = -p[1] * ed * ec * u / (p[4] * p[4]);
        }
        FitKind::PowerLaw => unreachable!("power law is fitted linearly in log space"),
        FitKind::Lorentzian => {
            let h2 = 0.25 * p[3] * p[3];
            let d = x - p[2];
            let den = d * d + h2;
            let shape = h2 / den;
            g[0] = 1.0;
            g[1] = shape;
            g[2] = p[1] * shape * 2.0 * d / den;
            g[3] = p[1] * (0.5 * p[3] * den - h2 * 0.5 * p[3]) / (den * den);
        }
    }
}

struct LmOutcome {
    params: Vec<f64>,
    std_errors: Vec<f64>,
    reduced_chi2: f64,
    converged: bool,
}

fn chi2(x: &[f64], y: &[f64], w: &[f64], p: &[f64], model: &dyn Fn(f64, &[f64]) -> f64) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| wi * (yi - model(xi, p)).powi(2))
        .sum()
}

/// Marquardt-scaled damped Gauss–Newton iteration.
fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    p0: &[f64],
    model: &dyn Fn(f64, &[f64]) -> f64,
    grad: &dyn Fn(f64, &[f64], &mut [f64]),
    opts: &LmOptions,
) -> LmOutcome {
    let n = x.len();
    let m = p0.len();
    let mut p = p0.to_vec();
    let mut cost = chi2(x, y, w, &p, model);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut g = vec![0.0; m];

    let normal_equations = |p: &[f64], g: &mut [f64]| {
        let mut jtj = DMatrix::<f64>::zeros(m, m);
        let mut jtr = DVector::<f64>::zeros(m);
        for i in 0..n {
            grad(x[i], p, g);
            let r = y[i] - model(x[i], p);
            for a in 0..m {
                jtr[a] += w[i] * g[a] * r;
                for b in 0..=a {
                    jtj[(a, b)] += w[i] * g[a] * g[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                jtj[(b, a)] = jtj[(a, b)];
            }
        }
        (jtj, jtr)
    };

    if cost.is_finite() {
        let (mut jtj, mut jtr) = normal_equations(&p, &mut g);
        for _ in 0..opts.max_iter {
            if cost == 0.0 {
                converged = true;
                break;
            }
            let dmax = (0..m).map(|a| jtj[(a, a)]).fold(0.0, f64::max);
            let mut damped = jtj.clone();
            for a in 0..m {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12 * dmax).max(f64::MIN_POSITIVE);
            }
            let step = damped.cholesky().map(|c| c.solve(&jtr));
            // Step and position measured in the metric D = sqrt(diag JᵀW J),
            // so parameters sitting near zero do not block convergence.
            let scaled_norm = |v: &mut dyn Iterator<Item = (usize, f64)>| {
                v.map(|(a, d)| jtj[(a, a)] * d * d).sum::<f64>().sqrt()
            };
            let p_norm = scaled_norm(&mut p.iter().copied().enumerate());
            let accepted = match step {
                Some(delta) if delta.iter().all(|d| d.is_finite()) => {
                    let step_norm = scaled_norm(&mut delta.iter().copied().enumerate());
                    let tiny = step_norm <= opts.xtol * p_norm;
                    let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                    let trial_cost = chi2(x, y, w, &trial, model);
                    if trial_cost.is_finite() && trial_cost <= cost {
                        let small = tiny
                            || delta
                                .iter()
                                .zip(&p)
                                .all(|(d, v)| d.abs() <= opts.xtol * (v.abs() + opts.xtol));
                        let stalled = cost - trial_cost <= 1e-15 * cost;
                        p = trial;
                        cost = trial_cost;
                        (jtj, jtr) = normal_equations(&p, &mut g);
                        lambda = (lambda / 10.0).max(1e-12);
                        if small || (stalled && lambda <= 1e-6) {
                            converged = true;
                        }
                        true
                    } else {
                        // Even a negligible step fails to lower χ²: the
                        // current point is a minimum to working precision.
                        converged = tiny;
                        false
                    }
                }
                _ => false,
            };
            if converged {
                break;
            }
            if !accepted {
                lambda *= 10.0;
                if lambda > 1e16 {
                    // No damped step improves χ²: accept if at a stationary
                    // point to working precision.
                    let scaled = (0..m)
                        .map(|a| jtr[a].abs() / (jtj[(a, a)] * cost).sqrt().max(f64::MIN_POSITIVE))
                        .fold(0.0, f64::max);
                    converged = scaled < 1e-6;
                    break;
                }
            }
        }
    }

    let dof = (n - m).max(1) as f64;
    let reduced_chi2 = if cost.is_finite() { cost / dof } else { f64::INFINITY };
    let std_errors = if cost.is_finite() {
        let (jtj, _) = normal_equations(&p, &mut g);
        covariance_diagonal(&jtj)
            .into_iter()
            .map(|v| if v.is_infinite() { f64::INFINITY } else { (v * reduced_chi2).max(0.0).sqrt() })
            .collect()
    } else {
        vec![f64::INFINITY; m]
    };
    LmOutcome {
        params: p,
        std_errors,
        reduced_chi2,
        converged,
    }
}

/// Diagonal of the pseudo-inverse of a symmetric PSD matrix. Parameters the
/// data does not constrain (zero or non-finite diagonal) get infinite variance.
fn covariance_diagonal(jtj: &DMatrix<f64>) -> Vec<f64> {
    let m = jtj.nrows();
    let live: Vec<usize> = (0..m).filter(|&a| jtj[(a, a)].is_finite() && jtj[(a, a)] > 0.0).collect();
    let mut out = vec![f64::INFINITY; m];
    if live.is_empty() || live.iter().any(|&a| live.iter().any(|&b| !jtj[(a, b)].is_finite())) {
        return out;
    }
    // Column scaling keeps the SVD well conditioned across parameter units.
    let scale: Vec<f64> = live.iter().map(|&a| jtj[(a, a)].sqrt()).collect();
    let k = live.len();
    let scaled = DMatrix::from_fn(k, k, |i, j| jtj[(live[i], live[j])] / scale[i] / scale[j]);
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    for i in 0..k {
        let mut s = 0.0;
        for r in 0..k {
            let sv = svd.singular_values[r];
            if sv > 1e-14 * smax {
                s += vt[(r, i)] * u[(i, r)] / sv;
            }
        }
        out[live[i]] = s / scale[i] / scale[i];
    }
    out
}

/// Weighted linear least squares `y ≈ Σ cⱼ·basisⱼ(x)`; returns coefficients
/// and the weighted residual sum of squares.
pub(crate) fn linear_least_squares(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    basis: &[&dyn Fn(f64) -> f64],
) -> Option<(Vec<f64>, f64)> {
    let m = basis.len();
    let a = DMatrix::from_fn(x.len(), m, |i, j| w[i].sqrt() * basis[j](x[i]));
    let b = DVector::from_iterator(x.len(), y.iter().zip(w).map(|(v, wi)| wi.sqrt() * v));
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-12).ok()?;
    let resid = (&a * &coef - &b).norm_squared();
    Some((coef.iter().copied().collect(), resid))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Data-driven starting point, in [`FitKind::param_names`] order.
fn initial_guess(kind: FitKind, x: &[f64], y: &[f64], w: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(x);
    let span = hi - lo;
    let (ymin, ymax) = min_max(y);
    let one = |_: f64| 1.0;
    match kind {
        FitKind::Exponential => {
            let mut best = (f64::INFINITY, vec![ymin, ymax - ymin, span / 3.0, lo]);
            for tau in log_grid(span * 1e-3, span * 1e2, 200) {
                let decay = |v: f64| (-(v - lo) / tau).exp();
                if let Some((c, r)) = linear_least_squares(x, y, w, &[&one, &decay]) {
                    if r < best.0 {
                        best = (r, vec![c[0], c[1], tau, lo]);
                    }
                }
            }
            best.1
        }
        FitKind::Sinusoid => {
            let mut sorted = x.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut steps: Vec<f64> = sorted.windows(2).map(|p| p[1] - p[0]).filter(|d| *d > 0.0).collect();
            steps.sort_by(f64::total_cmp);
            let dx = steps.get(steps.len() / 2).copied().unwrap_or(span);
            // Frequencies from a quarter cycle over the span up to Nyquist,
            // stepped finely enough that the phase drift across the span
            // stays below a tenth of a cycle.
            let (f_lo, f_hi) = (0.25 / span, 0.5 / dx);
            let df = 0.1 / span;
            let count = (((f_hi - f_lo) / df).ceil() as usize).clamp(2, 20_000);
            let mut best = (f64::INFINITY, vec![0.5 * (ymin + ymax), 0.5 * (ymax - ymin), span, 0.0]);
            for i in 0..=count {
                let f = f_lo + (f_hi - f_lo) * i as f64 / count as f64;
                let s = |v: f64| (TAU * f * v).sin();
                let c = |v: f64| (TAU * f * v).cos();
                if let Some((coef, r)) = linear_least_squares(x, y, w, &[&one, &s, &c]) {
                    if r < best.0 {
                        let amp = coef[1].hypot(coef[2]);
                        best = (r, vec![coef[0], amp, 1.0 / f, coef[2].atan2(coef[1])]);
                    }
                }
            }
            best.1
        }
        FitKind::Recapture => {
            let base = ymin;
            let mass: f64 = y.iter().map(|v| (v - base).max(0.0)).sum();
            let t0 = if mass > 0.0 {
                x.iter().zip(y).map(|(xi, yi)| xi * (yi - base).max(0.0)).sum::<f64>() / mass
            } else {
                0.5 * (lo + hi)
            };
            let mut best = (f64::INFINITY, vec![base, ymax - base, t0, span / 6.0, span / 12.0]);
            let grid: Vec<f64> = log_grid(span * 2e-3, span, 40).collect();
            for &td in &grid {
                for &tc in &grid {
                    let shape = |v: f64| {
                        let u = (v - t0).abs();
                        (-u / td).exp() * (1.0 - (-u / tc).exp())
                    };
                    if let Some((c, r)) = linear_least_squares(x, y, w, &[&one, &shape]) {
                        if r < best.0 && c[1] > 0.0 {
                            best = (r, vec![c[0], c[1], t0, td, tc]);
                        }
                    }
                }
            }
            best.1
        }
        FitKind::Lorentzian => {
            let imax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
            let x0 = x[imax];
            let mut best = (f64::INFINITY, vec![ymin, ymax - ymin, x0, span / 4.0]);
            for gamma in log_grid(span * 1e-3, span * 10.0, 120) {
                let shape = |v: f64| {
                    let h2 = 0.25 * gamma * gamma;
                    h2 / ((v - x0).powi(2) + h2)
                };
                if let Some((c, r)) = linear_least_squares(x, y, w, &[&one, &shape]) {
                    if r < best.0 {
                        best = (r, vec![c[0], c[1], x0, gamma]);
                    }
                }
            }
            best.1
        }
        FitKind::PowerLaw => unreachable!("power law is fitted linearly in log space"),
    }
}

/// Straight line in log–log space. Without weights every point counts
/// equally in `log y`, so each decade is treated alike; inverse-variance
/// weights for `y` map to `w·y²` on `log y`.
fn fit_power_law(
    x: &[f64],
    y: &[f64],
    w: Option<&[f64]>,
    init: Option<&BTreeMap<String, f64>>,
    opts: &LmOptions,
) -> Result<FitResult> {
    if x.iter().chain(y).any(|&v| v <= 0.0) {
        return Err(Error::validation("power-law fit needs positive x and y"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lw: Vec<f64> = match w {
        Some(w) => w.iter().zip(y).map(|(wi, yi)| wi * yi * yi).collect(),
        None => vec![1.0; y.len()],
    };
    let (lo, hi) = min_max(&lx);
    if hi - lo <= 0.0 {
        return Err(Error::validation("degenerate x: all abscissae are equal"));
    }
    let one = |_: f64| 1.0;
    let ident = |v: f64| v;
    let (c, _) = linear_least_squares(&lx, &ly, &lw, &[&ident, &one])
        .ok_or_else(|| Error::Fit("power-law normal equations are singular".into()))?;
    let mut p0 = vec![c[0], c[1]];
    if let Some(init) = init {
        for (i, name) in ["s", "b"].iter().enumerate() {
            if let Some(&v) = init.get(*name) {
                p0[i] = v;
            }
        }
    }
    let line = |v: f64, q: &[f64]| q[0] * v + q[1];
    let grad = |v: f64, _: &[f64], g: &mut [f64]| {
        g[0] = v;
        g[1] = 1.0;
    };
    let out = levenberg_marquardt(&lx, &ly, &lw, &p0, &line, &grad, opts);
    Ok(assemble(FitKind::PowerLaw, out.params, out.std_errors, out.reduced_chi2, out.converged))
}

#[cfg(test)]
mod tests;
