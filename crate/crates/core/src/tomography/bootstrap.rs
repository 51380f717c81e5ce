use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mle_reconstruct, poisson, MleOptions, TomographyInput};
use crate::error::{Error, Result};
use crate::quantum::{concurrence, fidelity, DensityMatrix, PureState2Q};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Fidelity(PureState2Q),
    Concurrence,
}

impl Metric {
    pub fn evaluate(&self, rho: &DensityMatrix) -> f64 {
        match self {
            Metric::Fidelity(target) => fidelity(rho, target),
            Metric::Concurrence => concurrence(rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    /// Sample standard deviation over the usable resamples.
    pub std: f64,
    pub used: usize,
    /// Resamples dropped because the reconstruction did not converge.
    pub excluded: usize,
    pub samples: Vec<f64>,
}

/// Poisson-resampled uncertainty of a single metric.
pub fn bootstrap_uncertainty(
    input: &TomographyInput,
    n_resamples: usize,
    metric: Metric,
    seed: u64,
    opts: &MleOptions,
) -> Result<BootstrapSummary> {
    let mut out = bootstrap_metrics(input, n_resamples, seed, opts, |rho| vec![metric.evaluate(rho)])?;
    Ok(out.remove(0))
}

/// Resamples every count as `Poisson(n_ν)`, reconstructs, and evaluates
/// `metrics` on each estimate. Resample `k` draws from its own ChaCha stream,
/// so results do not depend on scheduling.
pub fn bootstrap_metrics<F>(
    input: &TomographyInput,
    n_resamples: usize,
    seed: u64,
    opts: &MleOptions,
    metrics: F,
) -> Result<Vec<BootstrapSummary>>
where
    F: Fn(&DensityMatrix) -> Vec<f64> + Sync,
{
    if n_resamples < 2 {
        return Err(Error::validation("bootstrap needs at least two resamples"));
    }
    let runs: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let counts: Vec<u64> = input
                .records()
                .iter()
                .map(|r| poisson(r.counts as f64, &mut rng))
                .collect();
            let resampled = input.with_counts(&counts);
            if resampled.total_counts() == 0 {
                return Ok(None);
            }
            let res = mle_reconstruct(&resampled, opts)?;
            Ok(res.converged.then(|| metrics(&res.rho)))
        })
        .collect::<Result<_>>()?;

    let excluded = runs.iter().filter(|r| r.is_none()).count();
    let kept: Vec<Vec<f64>> = runs.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(Error::Fit(format!(
            "only {} of {n_resamples} bootstrap resamples converged",
            kept.len()
        )));
    }
    let n_metrics = kept[0].len();
    Ok((0..n_metrics)
        .map(|m| {
            let samples: Vec<f64> = kept.iter().map(|v| v[m]).collect();
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            BootstrapSummary {
                mean,
                std: var.sqrt(),
                used: samples.len(),
                excluded,
                samples,
            }
        })
        .collect())
}
