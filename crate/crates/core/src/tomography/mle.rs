//! Maximum-likelihood reconstruction over the Cholesky-type parameterization
//! `ρ = T†T / tr(T†T)` with `T` lower triangular and a real diagonal.

use nalgebra::{Cholesky, SMatrix, SVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{linear_inversion, TomographyInput};
use crate::error::{Error, Result};
use crate::quantum::{c, project_physical, DensityMatrix, Matrix4c, C64};

const N_PARAMS: usize = 16;
type Params = SVector<f64, N_PARAMS>;
type InvHessian = SMatrix<f64, N_PARAMS, N_PARAMS>;

/// Probability floor inside the likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Weight of the mixing applied to the starting point so its Cholesky factor
/// has full rank.
const START_MIXING: f64 = 1e-4;
/// Weight of the `(tr(T†T) − 1)²` term that pins the scale of `T`.
const SCALE_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `Σ (N p − n)² / (2 N p)`
    #[default]
    Gaussian,
    /// Poisson deviance `Σ N p − n + n ln(n / N p)`
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Gradient-norm threshold on the objective divided by the total counts.
    pub tol: f64,
    /// Seeds the sub-1e-6 jitter of the starting factor.
    pub seed: u64,
    pub likelihood: Likelihood,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iter: 5000,
            tol: 1e-10,
            seed: 0,
            likelihood: Likelihood::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub neg_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn term(kind: Likelihood, expected: f64, n: f64) -> f64 {
    match kind {
        Likelihood::Gaussian => (expected - n).powi(2) / (2.0 * expected),
        Likelihood::Poisson => {
            let log_part = if n > 0.0 { n * (n / expected).ln() } else { 0.0 };
            expected - n + log_part
        }
    }
}

/// d term / d p for `expected = norm · p`.
fn term_slope(kind: Likelihood, norm: f64, p: f64, n: f64) -> f64 {
    match kind {
        Likelihood::Gaussian => norm / 2.0 - n * n / (2.0 * norm * p * p),
        Likelihood::Poisson => norm - n / p,
    }
}

/// Likelihood objective of `rho` for `input` (lower is better).
pub fn neg_log_likelihood(input: &TomographyInput, rho: &DensityMatrix, kind: Likelihood) -> Result<f64> {
    let norms = input.normalizations()?;
    Ok(input
        .states()
        .iter()
        .zip(&norms)
        .zip(input.records())
        .map(|((s, &norm), r)| {
            let p = rho.probability(s).max(PROBABILITY_FLOOR);
            term(kind, norm * p, r.counts as f64)
        })
        .sum())
}

struct Objective {
    states: Vec<Vector4<C64>>,
    counts: Vec<f64>,
    norms: Vec<f64>,
    kind: Likelihood,
    /// Divides the likelihood so the gradient tolerance is count-independent.
    scale: f64,
}

/// Lower-triangular entries below the diagonal, in parameter order.
const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn to_matrix(t: &Params) -> Matrix4c {
    let mut m = Matrix4c::zeros();
    for k in 0..4 {
        m[(k, k)] = c(t[k], 0.0);
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        m[(i, j)] = c(t[4 + 2 * k], t[5 + 2 * k]);
    }
    m
}

fn from_matrix(m: &Matrix4c) -> Params {
    let mut t = Params::zeros();
    for k in 0..4 {
        t[k] = m[(k, k)].re;
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        t[4 + 2 * k] = m[(i, j)].re;
        t[5 + 2 * k] = m[(i, j)].im;
    }
    t
}

fn density_from(t: &Params) -> Result<DensityMatrix> {
    let tm = to_matrix(t);
    let m = tm.adjoint() * tm;
    let tr = m.trace().re;
    let m = m / c(tr, 0.0);
    DensityMatrix::new((m + m.adjoint()) * c(0.5, 0.0))
}

/// Lower-triangular `T` with `ρ = T†T`, from a Cholesky factorization of the
/// index-reversed matrix.
fn factor(rho: &DensityMatrix) -> Option<Params> {
    let reversed = Matrix4c::from_fn(|i, j| rho.get(3 - i, 3 - j));
    let l = Cholesky::new(reversed)?.unpack();
    // ρ = (J L J)(J L J)†; J L J is upper triangular, its adjoint is T.
    let upper = Matrix4c::from_fn(|i, j| l[(3 - i, 3 - j)]);
    Some(from_matrix(&upper.adjoint()))
}

impl Objective {
    fn value_and_gradient(&self, t: &Params) -> (f64, Params) {
        let tm = to_matrix(t);
        let s: f64 = t.norm_squared();
        let mut value = 0.0;
        // Complex gradient accumulator for dL/dRe T + i dL/dIm T.
        let mut g = Matrix4c::zeros();
        let mut trace_coeff = 0.0;
        for ((psi, &n), &norm) in self.states.iter().zip(&self.counts).zip(&self.norms) {
            let u = tm * psi;
            let q = u.norm_squared();
            let raw_p = q / s;
            let p = raw_p.max(PROBABILITY_FLOOR);
            value += term(self.kind, norm * p, n);
            if raw_p > PROBABILITY_FLOOR {
                let slope = term_slope(self.kind, norm, p, n);
                // dp = (dq − p ds) / s with dq ↔ 2 u ψ†, ds ↔ 2 T
                g += (u * psi.adjoint()) * c(2.0 * slope / s, 0.0);
                trace_coeff += slope * p;
            }
        }
        g -= tm * c(2.0 * trace_coeff / s, 0.0);

        let value = value / self.scale + SCALE_PENALTY * (s - 1.0).powi(2);
        let mut grad = from_matrix(&g) / self.scale;
        grad += t * (4.0 * SCALE_PENALTY * (s - 1.0));
        // Only the real part of diagonal entries is a free parameter.
        (value, grad)
    }
}

/// Maximum-likelihood estimate of the state behind `input`.
///
/// Starts from the physically projected linear inversion and runs BFGS with a
/// backtracking Armijo line search; only decreasing steps are accepted.
pub fn mle_reconstruct(input: &TomographyInput, opts: &MleOptions) -> Result<ReconstructionResult> {
    let total = input.total_counts();
    if total == 0 {
        return Err(Error::validation("tomography input has zero total counts"));
    }
    let norms = input.normalizations()?;
    let objective = Objective {
        states: input.states(),
        counts: input.records().iter().map(|r| r.counts as f64).collect(),
        norms,
        kind: opts.likelihood,
        scale: total as f64,
    };

    let start_rho = project_physical(&linear_inversion(input)?)?;
    let start_nll = neg_log_likelihood(input, &start_rho, opts.likelihood)?;
    let mixed = start_rho.mix(&DensityMatrix::maximally_mixed(), 1.0 - START_MIXING)?;
    let mut t = factor(&mixed).ok_or_else(|| {
        Error::Singular("starting state has no Cholesky factorization".to_string())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 4..N_PARAMS {
        t[k] += 1e-7 * rng.random_range(-1.0..1.0);
    }

    let mut history = Vec::new();
    let (t, iterations, converged) = bfgs(&objective, t, opts, &mut history);
    let rho = density_from(&t)?;
    let nll = neg_log_likelihood(input, &rho, opts.likelihood)?;
    if nll > start_nll {
        // The optimizer never does worse than its physical starting point.
        return Ok(ReconstructionResult {
            rho: start_rho,
            neg_log_likelihood: start_nll,
            iterations,
            converged,
        });
    }
    Ok(ReconstructionResult {
        rho,
        neg_log_likelihood: nll,
        iterations,
        converged,
    })
}

/// Returns the final point, the iteration count and whether the gradient
/// criterion was met. `history` receives the objective after every accepted
/// step, starting with the initial value.
fn bfgs(obj: &Objective, mut x: Params, opts: &MleOptions, history: &mut Vec<f64>) -> (Params, usize, bool) {
    let (mut f, mut g) = obj.value_and_gradient(&x);
    history.push(f);
    let mut h = InvHessian::identity();
    let mut fresh = true;
    for iter in 0..opts.max_iter {
        if g.norm() < opts.tol {
            return (x, iter, true);
        }
        let mut d = -(h * g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = InvHessian::identity();
            fresh = true;
            d = -g;
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = x + d * step;
            let (fnew, gnew) = obj.value_and_gradient(&xn);
            if fnew.is_finite() && fnew <= f + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                // Steepest descent cannot make progress: numerically stationary.
                return (x, iter, g.norm() < opts.tol.sqrt());
            }
            h = InvHessian::identity();
            fresh = true;
            continue;
        };
        let s = xn - x;
        let y = gnew - g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if fresh {
                h = InvHessian::identity() * (sy / y.norm_squared());
            }
            let rho = 1.0 / sy;
            let hy = h * y;
            let yhy = y.dot(&hy);
            h += (s * s.transpose()) * (rho * rho * yhy + rho) - (hy * s.transpose() + s * hy.transpose()) * rho;
            fresh = false;
        }
        let progress = f - fnew;
        x = xn;
        f = fnew;
        g = gnew;
        history.push(f);
        if progress == 0.0 && g.norm() < opts.tol.sqrt() {
            return (x, iter + 1, true);
        }
    }
    let ok = g.norm() < opts.tol;
    (x, opts.max_iter, ok)
}
