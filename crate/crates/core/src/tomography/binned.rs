use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mle_reconstruct, MleOptions, ProjectionRecord, ReconstructionResult, TimeBin, TomographyInput};
use crate::analysis::Histogram;
use crate::error::{Error, Result};
use crate::optics::{BasisPair, CircularConvention};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinnedOptions {
    /// Bins with fewer coincidences (summed over all projections) are skipped.
    pub min_counts: u64,
    pub mle: MleOptions,
    pub convention: CircularConvention,
}

impl Default for TimeBinnedOptions {
    fn default() -> Self {
        TimeBinnedOptions {
            min_counts: 100,
            mle: MleOptions::default(),
            convention: CircularConvention::default(),
        }
    }
}

/// Outcome for one delay bin; `result` is `None` when the bin was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinOutcome {
    pub time_bin: TimeBin,
    pub total_counts: u64,
    pub input: Vec<ProjectionRecord>,
    pub result: Option<ReconstructionResult>,
}

impl BinOutcome {
    pub fn skipped(&self) -> bool {
        self.result.is_none()
    }
}

/// Runs [`mle_reconstruct`] on every delay bin of a set of per-projection
/// coincidence histograms, after merging histogram bins up to `bin_width`.
///
/// All histograms must share width, origin and length, and `bin_width` must
/// be an integer multiple of their width. Bins are independent and are
/// processed in parallel; the output is in time order.
pub fn time_binned_tomography(
    histograms: &[(BasisPair, Histogram)],
    bin_width: f64,
    opts: &TimeBinnedOptions,
) -> Result<Vec<BinOutcome>> {
    let Some((_, first)) = histograms.first() else {
        return Err(Error::validation("no histograms supplied"));
    };
    if histograms.len() < 16 {
        return Err(Error::validation(format!(
            "time-binned tomography needs at least 16 projections, got {}",
            histograms.len()
        )));
    }
    for (pair, h) in histograms {
        if !h.same_geometry(first) {
            return Err(Error::validation(format!(
                "histogram for {pair} has inconsistent binning"
            )));
        }
    }
    let ratio = bin_width / first.bin_width();
    let factor = ratio.round();
    if !(factor >= 1.0) || (ratio - factor).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::validation(format!(
            "tomography bin width {bin_width} is not an integer multiple of the histogram bin width {}",
            first.bin_width()
        )));
    }
    let factor = factor as usize;
    let rebinned: Vec<(BasisPair, Histogram)> = histograms
        .iter()
        .map(|(p, h)| Ok((*p, h.rebin(factor)?)))
        .collect::<Result<_>>()?;
    let n_bins = rebinned[0].1.len();
    let pairs: Vec<BasisPair> = rebinned.iter().map(|(p, _)| *p).collect();
    // Validates the projection set once, before the parallel section.
    TomographyInput::new(pairs.iter().map(|&p| ProjectionRecord::new(p, 0)).collect())?;

    (0..n_bins)
        .into_par_iter()
        .map(|k| {
            let records: Vec<ProjectionRecord> = rebinned
                .iter()
                .map(|(p, h)| ProjectionRecord::new(*p, h.counts()[k]))
                .collect();
            let time_bin = TimeBin {
                start_ps: rebinned[0].1.bin_start(k),
                width_ps: rebinned[0].1.bin_width(),
            };
            let total: u64 = records.iter().map(|r| r.counts).sum();
            let result = if total >= opts.min_counts.max(1) {
                let input = TomographyInput::new(records.clone())?
                    .with_time_bin(time_bin)
                    .with_convention(opts.convention);
                Some(mle_reconstruct(&input, &opts.mle)?)
            } else {
                None
            };
            Ok(BinOutcome {
                time_bin,
                total_counts: total,
                input: records,
                result,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::tomography_bases;
    use crate::quantum::{density_of, time_evolved_state};
    use crate::tomography::ideal_input;

    fn histograms_from(bins: &[Vec<u64>], pairs: &[BasisPair], width: f64) -> Vec<(BasisPair, Histogram)> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let counts = bins.iter().map(|b| b[i]).collect();
                (p, Histogram::new(width, 0.0, counts).unwrap())
            })
            .collect()
    }

    #[test]
    fn single_bin_matches_direct_reconstruction() {
        let pairs = tomography_bases(36).unwrap();
        let rho = density_of(&time_evolved_state(4.65, 200.0));
        let input = ideal_input(&rho, &pairs, 5e4).unwrap();
        let counts: Vec<u64> = input.records().iter().map(|r| r.counts).collect();
        let hs = histograms_from(&[counts], &pairs, 100.0);
        let out = time_binned_tomography(&hs, 100.0, &TimeBinnedOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        let direct = mle_reconstruct(&input, &MleOptions::default()).unwrap();
        assert_eq!(out[0].result.as_ref().unwrap(), &direct);
    }

    #[test]
    fn sparse_bins_are_skipped() {
        let pairs = tomography_bases(16).unwrap();
        let rho = density_of(&time_evolved_state(0.0, 0.0));
        let rich: Vec<u64> = ideal_input(&rho, &pairs, 1e4).unwrap().records().iter().map(|r| r.counts).collect();
        let poor = vec![1u64; 16];
        let hs = histograms_from(&[rich, poor], &pairs, 50.0);
        let out = time_binned_tomography(&hs, 50.0, &TimeBinnedOptions::default()).unwrap();
        assert!(!out[0].skipped());
        assert!(out[1].skipped());
        assert_eq!(out[1].total_counts, 16);
        assert_eq!(out[1].time_bin.start_ps, 50.0);
    }

    #[test]
    fn inconsistent_binning_rejected() {
        let pairs = tomography_bases(16).unwrap();
        let mut hs = histograms_from(&[vec![10; 16], vec![10; 16]], &pairs, 10.0);
        assert!(time_binned_tomography(&hs, 25.0, &TimeBinnedOptions::default()).is_err());
        hs[3].1 = Histogram::new(10.0, 5.0, vec![10, 10]).unwrap();
        assert!(time_binned_tomography(&hs, 20.0, &TimeBinnedOptions::default()).is_err());
    }
}
