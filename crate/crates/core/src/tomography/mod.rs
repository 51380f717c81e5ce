//! Two-qubit state reconstruction from projection coincidence counts.
//!
//! Counts are modelled as `n_ν ≈ N·w_ν·p_ν`, where `N` is the pair flux
//! estimated from complete orthogonal basis sets, `w_ν` the relative
//! acquisition weight of projection `ν` and `p_ν` its Born probability.

mod binned;
mod bootstrap;
mod mle;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{BasisPair, CircularConvention, JonesVector};
use crate::quantum::{c, DensityMatrix, Matrix4c, C64};

pub use binned::{time_binned_tomography, BinOutcome, TimeBinnedOptions};
pub use bootstrap::{bootstrap_metrics, bootstrap_uncertainty, BootstrapSummary, Metric};
pub use mle::{mle_reconstruct, neg_log_likelihood, Likelihood, MleOptions, ReconstructionResult};

/// Coincidences recorded for one basis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    #[serde(rename = "basis")]
    pub pair: BasisPair,
    pub counts: u64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl ProjectionRecord {
    pub fn new(pair: BasisPair, counts: u64) -> Self {
        ProjectionRecord {
            pair,
            counts,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    pub start_ps: f64,
    pub width_ps: f64,
}

impl TimeBin {
    pub fn center_ps(&self) -> f64 {
        self.start_ps + 0.5 * self.width_ps
    }
}

/// A complete set of 16 or 36 distinct projections.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyInput {
    records: Vec<ProjectionRecord>,
    pub time_bin: Option<TimeBin>,
    pub convention: CircularConvention,
}

impl TomographyInput {
    pub fn new(records: Vec<ProjectionRecord>) -> Result<Self> {
        if records.len() != 16 && records.len() != 36 {
            return Err(Error::validation(format!(
                "tomography needs 16 or 36 projections, got {}",
                records.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.pair) {
                return Err(Error::validation(format!("duplicate basis pair {}", r.pair)));
            }
            if !(r.weight.is_finite() && r.weight > 0.0) {
                return Err(Error::validation(format!(
                    "acquisition weight for {} must be positive, got {}",
                    r.pair, r.weight
                )));
            }
        }
        Ok(TomographyInput {
            records,
            time_bin: None,
            convention: CircularConvention::default(),
        })
    }

    pub fn with_time_bin(mut self, bin: TimeBin) -> Self {
        self.time_bin = Some(bin);
        self
    }

    pub fn with_convention(mut self, convention: CircularConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn records(&self) -> &[ProjectionRecord] {
        &self.records
    }

    pub fn total_counts(&self) -> u64 {
        self.records.iter().map(|r| r.counts).sum()
    }

    /// Same projections with replaced counts, in record order.
    pub fn with_counts(&self, counts: &[u64]) -> Self {
        assert_eq!(counts.len(), self.records.len());
        let mut out = self.clone();
        for (r, &n) in out.records.iter_mut().zip(counts) {
            r.counts = n;
        }
        out
    }

    pub(crate) fn states(&self) -> Vec<Vector4<C64>> {
        self.records.iter().map(|r| r.pair.state(self.convention)).collect()
    }

    /// Pair flux `N`: mean over all complete orthogonal sets present of
    /// `Σ n_ν / w_ν`.
    pub fn pair_flux(&self) -> Result<f64> {
        let index: HashMap<BasisPair, &ProjectionRecord> =
            self.records.iter().map(|r| (r.pair, r)).collect();
        let mut sets = BTreeSet::new();
        for r in &self.records {
            let mut set = r.pair.complete_set();
            if set.iter().all(|p| index.contains_key(p)) {
                set.sort();
                sets.insert(set);
            }
        }
        if sets.is_empty() {
            return Err(Error::validation(
                "no complete orthogonal basis set among the projections",
            ));
        }
        let total: f64 = sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(|p| index[p].counts as f64 / index[p].weight)
                    .sum::<f64>()
            })
            .sum();
        Ok(total / sets.len() as f64)
    }

    /// Per-projection normalization `N·w_ν`.
    pub fn normalizations(&self) -> Result<Vec<f64>> {
        let n = self.pair_flux()?;
        Ok(self.records.iter().map(|r| n * r.weight).collect())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, 0, e))?;
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<ProjectionRecord>().enumerate() {
            records.push(row.map_err(|e| csv_error(path, i + 1, e))?);
        }
        Self::new(records)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
        for r in &self.records {
            w.serialize(r).map_err(|e| csv_error(path, 0, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, index: usize, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::Parse {
            path: path.to_path_buf(),
            index,
            message: e.to_string(),
        },
    }
}

/// Born probability `<ψa ⊗ ψb| ρ |ψa ⊗ ψb>`.
pub fn expected_probability(rho: &DensityMatrix, pair: (JonesVector, JonesVector)) -> f64 {
    let (a, b) = pair;
    let s = Vector4::new(a.h() * b.h(), a.h() * b.v(), a.v() * b.h(), a.v() * b.v());
    rho.probability(&s)
}

/// Noiseless counts `round(N·p_ν)` for each pair.
pub fn ideal_input(rho: &DensityMatrix, pairs: &[BasisPair], pair_flux: f64) -> Result<TomographyInput> {
    let conv = CircularConvention::default();
    let records = pairs
        .iter()
        .map(|&p| {
            let prob = rho.probability(&p.state(conv));
            ProjectionRecord::new(p, (pair_flux * prob).round() as u64)
        })
        .collect();
    TomographyInput::new(records)
}

/// Poisson-sampled counts with mean `N·p_ν` for each pair.
pub fn sampled_input<R: rand::Rng + ?Sized>(
    rho: &DensityMatrix,
    pairs: &[BasisPair],
    pair_flux: f64,
    rng: &mut R,
) -> Result<TomographyInput> {
    let conv = CircularConvention::default();
    let records = pairs
        .iter()
        .map(|&p| {
            let mean = pair_flux * rho.probability(&p.state(conv));
            ProjectionRecord::new(p, poisson(mean, rng))
        })
        .collect();
    TomographyInput::new(records)
}

pub(crate) fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    use rand_distr::{Distribution, Poisson};
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Hermitian operator basis `σi ⊗ σj / 4`, i, j ∈ {I, X, Y, Z}.
fn pauli_product_basis() -> Vec<Matrix4c> {
    use nalgebra::Matrix2;
    let i = c(0.0, 1.0);
    let paulis = [
        Matrix2::new(C64::ONE, C64::ZERO, C64::ZERO, C64::ONE),
        Matrix2::new(C64::ZERO, C64::ONE, C64::ONE, C64::ZERO),
        Matrix2::new(C64::ZERO, -i, i, C64::ZERO),
        Matrix2::new(C64::ONE, C64::ZERO, C64::ZERO, -C64::ONE),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &paulis {
        for b in &paulis {
            out.push(crate::quantum::kron2(a, b) * c(0.25, 0.0));
        }
    }
    out
}

/// Least-squares solution of `p_ν = tr(Π_ν ρ)` for the normalized counts.
/// The output is Hermitian with unit trace but may have negative eigenvalues.
pub fn linear_inversion(input: &TomographyInput) -> Result<Matrix4c> {
    if input.total_counts() == 0 {
        return Err(Error::validation("tomography input has zero total counts"));
    }
    let norms = input.normalizations()?;
    let states = input.states();
    let basis = pauli_product_basis();
    let rows = states.len();
    let design = DMatrix::<f64>::from_fn(rows, 16, |r, k| {
        let s = &states[r];
        (s.adjoint() * basis[k] * s)[(0, 0)].re
    });
    let freq = DVector::<f64>::from_fn(rows, |r, _| input.records[r].counts as f64 / norms[r]);

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(Error::Singular(format!(
            "projection set is not informationally complete (condition {:.3e})",
            smax / smin.max(f64::MIN_POSITIVE)
        )));
    }
    let coeffs = svd
        .solve(&freq, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let mut rho = Matrix4c::zeros();
    for (k, b) in basis.iter().enumerate() {
        rho += b * c(coeffs[k], 0.0);
    }
    let rho = (rho + rho.adjoint()) * c(0.5, 0.0);
    let tr = rho.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Singular(format!("reconstructed trace {tr} is not positive")));
    }
    Ok(rho / c(tr, 0.0))
}
