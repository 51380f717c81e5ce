//! Jones calculus for the projection bases, waveplates and the local-unitary
//! correction applied to reconstructed states.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{c, DensityMatrix, Matrix2c, C64};

/// Single-photon polarization state `(H, V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    h: C64,
    v: C64,
}

impl JonesVector {
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let n2 = h.norm_sqr() + v.norm_sqr();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("Jones vector has squared norm {n2}")));
        }
        Ok(JonesVector { h, v })
    }

    pub fn h(&self) -> C64 {
        self.h
    }

    pub fn v(&self) -> C64 {
        self.v
    }

    pub fn as_array(&self) -> [C64; 2] {
        [self.h, self.v]
    }

    /// `<self|other>`
    pub fn inner(&self, other: &JonesVector) -> C64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// The state orthogonal to this one, `(−v*, h*)`.
    pub fn orthogonal(&self) -> JonesVector {
        JonesVector {
            h: -self.v.conj(),
            v: self.h.conj(),
        }
    }

    pub fn transform(&self, m: &Matrix2c) -> JonesVector {
        JonesVector {
            h: m[(0, 0)] * self.h + m[(0, 1)] * self.v,
            v: m[(1, 0)] * self.h + m[(1, 1)] * self.v,
        }
    }
}

/// Sign convention for the circular states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularConvention {
    /// `R = (1, −i)/√2`
    #[default]
    RMinusI,
    /// `R = (1, +i)/√2`
    RPlusI,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolarizationBasis {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolarizationBasis {
    pub const ALL: [PolarizationBasis; 6] = [
        PolarizationBasis::H,
        PolarizationBasis::V,
        PolarizationBasis::D,
        PolarizationBasis::A,
        PolarizationBasis::R,
        PolarizationBasis::L,
    ];

    /// The minimal four-state set used by the 16-projection scheme.
    pub const MINIMAL: [PolarizationBasis; 4] = [
        PolarizationBasis::H,
        PolarizationBasis::V,
        PolarizationBasis::D,
        PolarizationBasis::R,
    ];

    pub fn orthogonal(self) -> PolarizationBasis {
        use PolarizationBasis::*;
        match self {
            H => V,
            V => H,
            D => A,
            A => D,
            R => L,
            L => R,
        }
    }

    /// Index of the measurement basis this state belongs to: 0 rectilinear,
    /// 1 diagonal, 2 circular.
    pub fn family(self) -> usize {
        use PolarizationBasis::*;
        match self {
            H | V => 0,
            D | A => 1,
            R | L => 2,
        }
    }

    pub fn label(self) -> char {
        use PolarizationBasis::*;
        match self {
            H => 'H',
            V => 'V',
            D => 'D',
            A => 'A',
            R => 'R',
            L => 'L',
        }
    }

    pub fn from_label(ch: char) -> Result<Self> {
        use PolarizationBasis::*;
        Ok(match ch.to_ascii_uppercase() {
            'H' => H,
            'V' => V,
            'D' => D,
            'A' => A,
            'R' => R,
            'L' => L,
            other => {
                return Err(Error::validation(format!(
                    "unknown polarization label '{other}'"
                )))
            }
        })
    }
}

impl fmt::Display for PolarizationBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

pub fn projector_for(basis: PolarizationBasis) -> JonesVector {
    projector_with(basis, CircularConvention::default())
}

pub fn projector_with(basis: PolarizationBasis, convention: CircularConvention) -> JonesVector {
    use PolarizationBasis::*;
    let r = FRAC_1_SQRT_2;
    let sign = match convention {
        CircularConvention::RMinusI => -1.0,
        CircularConvention::RPlusI => 1.0,
    };
    let (h, v) = match basis {
        H => (c(1.0, 0.0), C64::ZERO),
        V => (C64::ZERO, c(1.0, 0.0)),
        D => (c(r, 0.0), c(r, 0.0)),
        A => (c(r, 0.0), c(-r, 0.0)),
        R => (c(r, 0.0), c(0.0, sign * r)),
        L => (c(r, 0.0), c(0.0, -sign * r)),
    };
    JonesVector { h, v }
}

/// One two-photon projection: first slot XX arm, second slot X arm.
/// Serialized as a two-letter string such as `"HV"` or `"DR"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisPair {
    pub xx: PolarizationBasis,
    pub x: PolarizationBasis,
}

impl BasisPair {
    pub fn new(xx: PolarizationBasis, x: PolarizationBasis) -> Self {
        BasisPair { xx, x }
    }

    pub fn vectors(&self, convention: CircularConvention) -> (JonesVector, JonesVector) {
        (projector_with(self.xx, convention), projector_with(self.x, convention))
    }

    /// Product state `|a> ⊗ |b>` in (HH, HV, VH, VV) order.
    pub fn state(&self, convention: CircularConvention) -> Vector4<C64> {
        let (a, b) = self.vectors(convention);
        Vector4::new(a.h * b.h, a.h * b.v, a.v * b.h, a.v * b.v)
    }

    /// The four pairs `(a,b), (a,b⊥), (a⊥,b), (a⊥,b⊥)` forming a complete
    /// measurement together with this one.
    pub fn complete_set(&self) -> [BasisPair; 4] {
        let (a, b) = (self.xx, self.x);
        [
            BasisPair::new(a, b),
            BasisPair::new(a, b.orthogonal()),
            BasisPair::new(a.orthogonal(), b),
            BasisPair::new(a.orthogonal(), b.orthogonal()),
        ]
    }
}

impl fmt::Display for BasisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.xx, self.x)
    }
}

impl FromStr for BasisPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => Ok(BasisPair::new(
                PolarizationBasis::from_label(a)?,
                PolarizationBasis::from_label(b)?,
            )),
            _ => Err(Error::validation(format!(
                "basis pair must be two letters, got '{s}'"
            ))),
        }
    }
}

impl Serialize for BasisPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Informationally complete projection sets: 36 (all six states per arm) or
/// 16 (H, V, D, R per arm). Outer loop over the XX arm.
pub fn tomography_bases(count: usize) -> Result<Vec<BasisPair>> {
    let labels: &[PolarizationBasis] = match count {
        36 => &PolarizationBasis::ALL,
        16 => &PolarizationBasis::MINIMAL,
        other => {
            return Err(Error::validation(format!(
                "unsupported projection count {other}; expected 16 or 36"
            )))
        }
    };
    Ok(labels
        .iter()
        .flat_map(|&a| labels.iter().map(move |&b| BasisPair::new(a, b)))
        .collect())
}

fn rotation(angle: f64) -> Matrix2c {
    let (s, co) = angle.sin_cos();
    Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// Jones matrix of a linear retarder with the fast axis at `fast_axis`
/// (radians from H): `R(θ)·diag(1, e^{−iδ})·R(−θ)`.
pub fn waveplate_jones(retardance: f64, fast_axis: f64) -> Matrix2c {
    let d = Matrix2::new(
        C64::ONE,
        C64::ZERO,
        C64::ZERO,
        C64::from_polar(1.0, -retardance),
    );
    rotation(fast_axis) * d * rotation(-fast_axis)
}

pub fn quarter_wave_plate(fast_axis: f64) -> Matrix2c {
    waveplate_jones(PI / 2.0, fast_axis)
}

pub fn half_wave_plate(fast_axis: f64) -> Matrix2c {
    waveplate_jones(PI, fast_axis)
}

/// QWP and HWP fast-axis angles in front of an H polarizer, stored in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    qwp_angle: f64,
    hwp_angle: f64,
}

impl WaveplateSetting {
    pub fn new(qwp_angle: f64, hwp_angle: f64) -> Self {
        WaveplateSetting {
            qwp_angle: qwp_angle.rem_euclid(PI),
            hwp_angle: hwp_angle.rem_euclid(PI),
        }
    }

    pub fn qwp_angle(&self) -> f64 {
        self.qwp_angle
    }

    pub fn hwp_angle(&self) -> f64 {
        self.hwp_angle
    }

    /// State transmitted by QWP → HWP → H polarizer, i.e. `(HWP·QWP)†|H>`.
    pub fn projected_state(&self) -> JonesVector {
        let m = half_wave_plate(self.hwp_angle) * quarter_wave_plate(self.qwp_angle);
        let h = JonesVector {
            h: C64::ONE,
            v: C64::ZERO,
        };
        h.transform(&m.adjoint())
    }
}

/// Waveplate angles (QWP, HWP) realizing each projection with the default
/// circular convention. Reference only; the reconstruction uses the ideal
/// projectors.
pub const WAVEPLATE_TABLE: [(PolarizationBasis, f64, f64); 6] = [
    (PolarizationBasis::H, 0.0, 0.0),
    (PolarizationBasis::V, 0.0, FRAC_PI_4),
    (PolarizationBasis::D, FRAC_PI_4, FRAC_PI_8),
    (PolarizationBasis::A, FRAC_PI_4, 7.0 * FRAC_PI_8),
    (PolarizationBasis::R, FRAC_PI_4, 0.0),
    (PolarizationBasis::L, FRAC_PI_4, FRAC_PI_4),
];

pub fn waveplate_setting_for(basis: PolarizationBasis) -> WaveplateSetting {
    let (_, q, h) = WAVEPLATE_TABLE
        .iter()
        .copied()
        .find(|(b, _, _)| *b == basis)
        .expect("table covers every basis");
    WaveplateSetting::new(q, h)
}

/// Two-angle single-photon rotation used to undo setup birefringence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrectionUnitary {
    pub theta: f64,
    pub phi: f64,
}

impl CorrectionUnitary {
    pub fn new(theta: f64, phi: f64) -> Self {
        CorrectionUnitary { theta, phi }
    }

    pub fn is_identity(&self) -> bool {
        self.theta == 0.0 && self.phi == 0.0
    }
}

/// Which arms receive the correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionArms {
    #[default]
    Both,
    XxOnly,
    XOnly,
}

/// `Rz(φ)·Ry(θ)`
pub fn correction_unitary(corr: &CorrectionUnitary) -> Matrix2c {
    let (s, co) = (corr.theta / 2.0).sin_cos();
    let ry = Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
    let rz = Matrix2::new(
        C64::from_polar(1.0, -corr.phi / 2.0),
        C64::ZERO,
        C64::ZERO,
        C64::from_polar(1.0, corr.phi / 2.0),
    );
    rz * ry
}

pub fn apply_correction(
    rho: &DensityMatrix,
    corr: &CorrectionUnitary,
    arms: CorrectionArms,
) -> Result<DensityMatrix> {
    let u = correction_unitary(corr);
    let id = Matrix2c::identity();
    match arms {
        CorrectionArms::Both => rho.local_transform(&u, &u),
        CorrectionArms::XxOnly => rho.local_transform(&u, &id),
        CorrectionArms::XOnly => rho.local_transform(&id, &u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{concurrence, density_of, random, PureState2Q};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unitarity_defect(u: &Matrix2c) -> f64 {
        (u.adjoint() * u - Matrix2c::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|<a|b>|²` after removing a global phase, for "equal up to phase" checks.
    fn same_ray(a: &JonesVector, b: &JonesVector) -> bool {
        (a.inner(b).norm_sqr() - 1.0).abs() < 1e-12
    }

    #[test]
    fn projector_definitions() {
        use PolarizationBasis::*;
        let h = projector_for(H);
        assert_eq!(h.as_array(), [C64::ONE, C64::ZERO]);
        assert_abs_diff_eq!(projector_for(D).inner(&projector_for(A)).norm(), 0.0, epsilon = 1e-15);
        let r = projector_for(R);
        assert_abs_diff_eq!(r.v().im, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r.inner(&h).norm_sqr(), 0.5, epsilon = 1e-15);
        let r_flipped = projector_with(R, CircularConvention::RPlusI);
        assert!(same_ray(&r_flipped, &projector_for(L)));
    }

    #[test]
    fn projectors_form_three_mutually_unbiased_bases() {
        for a in PolarizationBasis::ALL {
            for b in PolarizationBasis::ALL {
                let p = projector_for(a).inner(&projector_for(b)).norm_sqr();
                let expected = if a == b {
                    1.0
                } else if a.orthogonal() == b {
                    0.0
                } else {
                    0.5
                };
                assert_abs_diff_eq!(p, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn waveplate_examples() {
        let h = projector_for(PolarizationBasis::H);
        let out = h.transform(&waveplate_jones(PI, 0.0));
        assert!(same_ray(&out, &h));
        let out = h.transform(&waveplate_jones(PI, FRAC_PI_4));
        assert!(same_ray(&out, &projector_for(PolarizationBasis::V)));
        let out = h.transform(&waveplate_jones(PI / 2.0, FRAC_PI_4));
        assert_abs_diff_eq!(out.h().norm_sqr(), 0.5, epsilon = 1e-12);
        let circular = same_ray(&out, &projector_for(PolarizationBasis::R))
            || same_ray(&out, &projector_for(PolarizationBasis::L));
        assert!(circular);
    }

    #[test]
    fn waveplate_table_realizes_projectors() {
        for basis in PolarizationBasis::ALL {
            let setting = waveplate_setting_for(basis);
            assert!(setting.qwp_angle() >= 0.0 && setting.qwp_angle() < PI);
            assert!(setting.hwp_angle() >= 0.0 && setting.hwp_angle() < PI);
            assert!(
                same_ray(&setting.projected_state(), &projector_for(basis)),
                "table entry for {basis} is wrong"
            );
        }
    }

    #[test]
    fn tomography_basis_enumeration() {
        let b36 = tomography_bases(36).unwrap();
        assert_eq!(b36.len(), 36);
        assert_eq!(b36[0].to_string(), "HH");
        assert_eq!(b36[35].to_string(), "LL");
        assert_eq!(b36[1].to_string(), "HV");
        let b16 = tomography_bases(16).unwrap();
        assert_eq!(b16.len(), 16);
        assert!(b16.contains(&"DR".parse().unwrap()));
        assert!(b16.iter().all(|p| p.xx != PolarizationBasis::A));
        assert!(tomography_bases(9).is_err());
    }

    #[test]
    fn projector_sum_over_36_is_nine_identity() {
        let mut sum = crate::quantum::Matrix4c::zeros();
        for pair in tomography_bases(36).unwrap() {
            let s = pair.state(CircularConvention::default());
            sum += s * s.adjoint();
        }
        let defect = (sum - crate::quantum::Matrix4c::identity() * c(9.0, 0.0))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(defect < 1e-10);
    }

    #[test]
    fn basis_pair_parsing() {
        let p: BasisPair = "dr".parse().unwrap();
        assert_eq!(p, BasisPair::new(PolarizationBasis::D, PolarizationBasis::R));
        assert!("HVX".parse::<BasisPair>().is_err());
        assert!("HQ".parse::<BasisPair>().is_err());
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"DR\"");
    }

    #[test]
    fn correction_examples() {
        let id = correction_unitary(&CorrectionUnitary::new(0.0, 0.0));
        assert!((id - Matrix2c::identity()).iter().all(|z| z.norm() < 1e-15));
        let flip = correction_unitary(&CorrectionUnitary::new(PI, 0.0));
        let out = projector_for(PolarizationBasis::H).transform(&flip);
        assert!(same_ray(&out, &projector_for(PolarizationBasis::V)));
        let tilted = correction_unitary(&CorrectionUnitary::new(0.521, -1.284));
        assert!(unitarity_defect(&tilted) < 1e-12);
    }

    #[test]
    fn apply_correction_examples() {
        let bell = density_of(&PureState2Q::phi_plus());
        let same = apply_correction(&bell, &CorrectionUnitary::default(), CorrectionArms::Both).unwrap();
        assert_eq!(same, bell);

        let hh = density_of(&PureState2Q::basis(0));
        let vv = apply_correction(&hh, &CorrectionUnitary::new(PI, 0.0), CorrectionArms::Both).unwrap();
        assert_abs_diff_eq!(vv.get(3, 3).re, 1.0, epsilon = 1e-10);

        let hv = apply_correction(&hh, &CorrectionUnitary::new(PI, 0.0), CorrectionArms::XOnly).unwrap();
        assert_abs_diff_eq!(hv.get(1, 1).re, 1.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn generated_matrices_are_unitary(ret in -10.0f64..10.0, axis in -10.0f64..10.0,
                                          theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
            prop_assert!(unitarity_defect(&waveplate_jones(ret, axis)) < 1e-12);
            prop_assert!(unitarity_defect(&correction_unitary(&CorrectionUnitary::new(theta, phi))) < 1e-12);
        }

        #[test]
        fn correction_preserves_spectrum_and_entanglement(seed in any::<u64>(), rank in 1usize..=4,
                                                           theta in -4.0f64..4.0, phi in -4.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(&mut rng, rank);
            for arms in [CorrectionArms::Both, CorrectionArms::XxOnly, CorrectionArms::XOnly] {
                let out = apply_correction(&rho, &CorrectionUnitary::new(theta, phi), arms).unwrap();
                let (a, b) = (rho.eigenvalues(), out.eigenvalues());
                for k in 0..4 {
                    prop_assert!((a[k] - b[k]).abs() < 1e-10);
                }
                prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-10);
                prop_assert!((concurrence(&rho) - concurrence(&out)).abs() < 1e-9);
            }
        }

        #[test]
        fn probabilities_over_36_sum_to_nine(seed in any::<u64>(), rank in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(&mut rng, rank);
            let total: f64 = tomography_bases(36).unwrap().iter()
                .map(|p| rho.probability(&p.state(CircularConvention::default())))
                .sum();
            prop_assert!((total - 9.0).abs() < 1e-9);
        }
    }
}
