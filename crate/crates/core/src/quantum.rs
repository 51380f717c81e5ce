//! Two-qubit states, density matrices and entanglement measures.
//!
//! Basis order everywhere is `(HH, HV, VH, VV)`; the first slot is the
//! biexciton (XX) photon and the second the exciton (X) photon. Energies are
//! in µeV and times in ps.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix4c = Matrix4<C64>;
pub type Matrix2c = Matrix2<C64>;

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.211_956_9;
/// Planck constant in µeV·ps.
pub const PLANCK_UEV_PS: f64 = TAU * HBAR_UEV_PS;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOL, 0)` are treated as zero.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub h: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: HBAR_UEV_PS,
            h: PLANCK_UEV_PS,
        }
    }
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A normalized two-qubit pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState2Q {
    amps: Vector4<C64>,
}

impl PureState2Q {
    pub const NORM_TOL: f64 = 1e-12;

    /// Wraps amplitudes that must already be normalized.
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let amps = Vector4::from(amps);
        let norm2 = amps.norm_squared();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::validation(format!(
                "pure state has squared norm {norm2}, expected 1"
            )));
        }
        Ok(PureState2Q { amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amps: [C64; 4]) -> Result<Self> {
        let amps = Vector4::from(amps);
        let norm = amps.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::validation("cannot normalize a zero state"));
        }
        Ok(PureState2Q { amps: amps / C64::from(norm) })
    }

    /// Tensor product `a ⊗ b` of two single-photon polarization states.
    pub fn product(a: [C64; 2], b: [C64; 2]) -> Result<Self> {
        Self::normalized([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]])
    }

    pub fn phi_plus() -> Self {
        let r = c(FRAC_1_SQRT_2, 0.0);
        PureState2Q {
            amps: Vector4::new(r, C64::ZERO, C64::ZERO, r),
        }
    }

    pub fn phi_minus() -> Self {
        let r = c(FRAC_1_SQRT_2, 0.0);
        PureState2Q {
            amps: Vector4::new(r, C64::ZERO, C64::ZERO, -r),
        }
    }

    pub fn psi_plus() -> Self {
        let r = c(FRAC_1_SQRT_2, 0.0);
        PureState2Q {
            amps: Vector4::new(C64::ZERO, r, r, C64::ZERO),
        }
    }

    pub fn psi_minus() -> Self {
        let r = c(FRAC_1_SQRT_2, 0.0);
        PureState2Q {
            amps: Vector4::new(C64::ZERO, r, -r, C64::ZERO),
        }
    }

    /// Computational basis state; `index` follows (HH, HV, VH, VV).
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "basis index {index} out of range");
        let mut amps = Vector4::zeros();
        amps[index] = C64::ONE;
        PureState2Q { amps }
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `|<self|other>|²`
    pub fn overlap(&self, other: &PureState2Q) -> f64 {
        self.amps.dotc(&other.amps).norm_sqr()
    }
}

/// The cascade state `(|HH> + exp(i·fss·t/ħ)|VV>)/√2` after an XX→X delay `t`.
pub fn time_evolved_state(fss_uev: f64, t_ps: f64) -> PureState2Q {
    let phase = fss_uev * t_ps / HBAR_UEV_PS;
    let r = FRAC_1_SQRT_2;
    PureState2Q {
        amps: Vector4::new(
            c(r, 0.0),
            C64::ZERO,
            C64::ZERO,
            C64::from_polar(r, phase),
        ),
    }
}

/// Oscillation period `h / fss` in ps.
pub fn fss_period(fss_uev: f64) -> f64 {
    PLANCK_UEV_PS / fss_uev
}

/// A physical two-qubit state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Matrix4c,
}

impl DensityMatrix {
    /// Validates `m` against the physicality tolerances.
    pub fn new(m: Matrix4c) -> Result<Self> {
        check_physical(&m)?;
        Ok(DensityMatrix { m })
    }

    pub fn from_pure(psi: &PureState2Q) -> Self {
        DensityMatrix {
            m: psi.amps * psi.amps.adjoint(),
        }
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            m: Matrix4c::identity() * c(0.25, 0.0),
        }
    }

    /// `p·ρ(Φ+) + (1−p)·I/4`
    pub fn werner(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!("Werner weight {p} outside [0, 1]")));
        }
        let bell = density_of(&PureState2Q::phi_plus());
        Ok(DensityMatrix {
            m: bell.m * c(p, 0.0) + Self::maximally_mixed().m * c(1.0 - p, 0.0),
        })
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::validation(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(DensityMatrix {
            m: self.m * c(w, 0.0) + other.m * c(1.0 - w, 0.0),
        })
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix4c {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3]]
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// `½‖ρ − σ‖₁`
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = self.m - other.m;
        let herm = (diff + diff.adjoint()) * c(0.5, 0.0);
        0.5 * SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .map(|l| l.abs())
            .sum::<f64>()
    }

    /// Born probability of projecting onto the (normalized) product state `psi`.
    pub fn probability(&self, psi: &Vector4<C64>) -> f64 {
        (psi.adjoint() * self.m * psi)[(0, 0)].re.clamp(0.0, 1.0)
    }

    /// Applies `(ua ⊗ ub) ρ (ua ⊗ ub)†` for unitaries `ua` (XX arm) and `ub` (X arm).
    pub fn local_transform(&self, ua: &Matrix2c, ub: &Matrix2c) -> Result<DensityMatrix> {
        let u = kron2(ua, ub);
        let out = u * self.m * u.adjoint();
        // Restore exact Hermiticity lost to rounding.
        DensityMatrix::new((out + out.adjoint()) * c(0.5, 0.0))
    }
}

pub fn density_of(psi: &PureState2Q) -> DensityMatrix {
    DensityMatrix::from_pure(psi)
}

pub fn kron2(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

fn check_physical(m: &Matrix4c) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("density matrix has non-finite entries"));
    }
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > HERMITIAN_TOL {
        return Err(Error::validation(format!(
            "density matrix not Hermitian (max |ρ−ρ†| = {asym:e})"
        )));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::validation(format!("density matrix trace {tr} ≠ 1")));
    }
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let min_ev = SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_ev < -PSD_TOL {
        return Err(Error::validation(format!(
            "density matrix has negative eigenvalue {min_ev:e}"
        )));
    }
    Ok(())
}

/// Fidelity `<ψ|ρ|ψ>` to a pure target, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, target: &PureState2Q) -> f64 {
    rho.probability(target.amplitudes())
}

/// `σy ⊗ σy` in the (HH, HV, VH, VV) basis.
pub fn spin_flip() -> Matrix4c {
    let mut y = Matrix4c::zeros();
    y[(0, 3)] = c(-1.0, 0.0);
    y[(1, 2)] = C64::ONE;
    y[(2, 1)] = C64::ONE;
    y[(3, 0)] = c(-1.0, 0.0);
    y
}

/// Eigen-components of ρ below this weight are dropped when factoring
/// `ρ = W W†`; round-off at this level would otherwise enter the concurrence
/// through a square root.
const FACTOR_CUTOFF: f64 = 1e-12;

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// The λᵢ (square roots of the eigenvalues of `ρ·ρ̃`, with
/// `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`) equal the singular values of the symmetric
/// matrix `Wᵀ (σy⊗σy) W` for any factorization `ρ = W W†`.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let eig = SymmetricEigen::new(rho.m);
    let columns: Vec<Vector4<C64>> = (0..4)
        .filter(|&k| eig.eigenvalues[k] > FACTOR_CUTOFF)
        .map(|k| eig.eigenvectors.column(k) * c(eig.eigenvalues[k].sqrt(), 0.0))
        .collect();
    if columns.is_empty() {
        return 0.0;
    }
    let w = nalgebra::Matrix4xX::from_columns(&columns);
    let tau = w.transpose() * spin_flip() * &w;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let rest: f64 = lambdas[1..].iter().sum();
    (lambdas[0] - rest).clamp(0.0, 1.0)
}

/// Maps a Hermitian (or nearly Hermitian) matrix onto a physical state by
/// clipping negative eigenvalues and renormalizing the trace.
pub fn project_physical(m: &Matrix4c) -> Result<DensityMatrix> {
    if m.iter().all(|z| *z == C64::ZERO) {
        return Err(Error::validation("cannot project the zero matrix"));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let total: f64 = clipped.sum();
    if total <= 0.0 {
        return Err(Error::validation(
            "matrix has no positive eigenvalues to normalize",
        ));
    }
    let d = Matrix4c::from_diagonal(&clipped.map(|l| c(l / total, 0.0)));
    let out = eig.eigenvectors * d * eig.eigenvectors.adjoint();
    let out = (out + out.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(out)
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    re: [[f64; 4]; 4],
    im: [[f64; 4]; 4],
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = self.m[(i, j)].re;
                im[i][j] = self.m[(i, j)].im;
            }
        }
        DensityMatrixJson { re, im }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DensityMatrixJson::deserialize(deserializer)?;
        let m = Matrix4c::from_fn(|i, j| c(raw.re[i][j], raw.im[i][j]));
        DensityMatrix::new(m).map_err(de::Error::custom)
    }
}

/// Haar-random samplers used by property tests and the simulator examples.
pub mod random {
    use super::*;

    fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    pub fn pure_state<R: Rng + ?Sized>(rng: &mut R) -> PureState2Q {
        loop {
            let amps = [
                gaussian_c64(rng),
                gaussian_c64(rng),
                gaussian_c64(rng),
                gaussian_c64(rng),
            ];
            if let Ok(psi) = PureState2Q::normalized(amps) {
                return psi;
            }
        }
    }

    /// Random state of the given rank (1..=4), Hilbert–Schmidt style.
    pub fn density<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> DensityMatrix {
        assert!((1..=4).contains(&rank), "rank must be 1..=4");
        loop {
            let g = nalgebra::Matrix4xX::<C64>::from_fn(rank, |_, _| gaussian_c64(rng));
            let m = &g * g.adjoint();
            let tr = m.trace().re;
            if tr > 1e-12 {
                let m = m / c(tr, 0.0);
                let m = (m + m.adjoint()) * c(0.5, 0.0);
                if let Ok(rho) = DensityMatrix::new(m) {
                    return rho;
                }
            }
        }
    }

    /// Haar-random 2×2 unitary via QR of a complex Gaussian matrix.
    pub fn unitary2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2c {
        let z = Matrix2c::from_fn(|_, _| gaussian_c64(rng));
        let qr = z.qr();
        let (q, r) = (qr.q(), qr.r());
        let phases = Matrix2c::from_diagonal(&nalgebra::Vector2::new(
            phase_of(r[(0, 0)]),
            phase_of(r[(1, 1)]),
        ));
        q * phases
    }

    fn phase_of(z: C64) -> C64 {
        if z.norm() == 0.0 {
            C64::ONE
        } else {
            z / z.norm()
        }
    }
}
