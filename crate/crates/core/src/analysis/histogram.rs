use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::csv_error;

/// Uniformly binned counts; bin `k` covers `[origin + k·w, origin + (k+1)·w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_width: f64,
    origin: f64,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    bin_start_ps: f64,
    counts: u64,
}

impl Histogram {
    pub fn new(bin_width: f64, origin: f64, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::validation(format!("bin width must be positive, got {bin_width}")));
        }
        if !origin.is_finite() {
            return Err(Error::validation("histogram origin must be finite"));
        }
        if counts.is_empty() {
            return Err(Error::validation("histogram needs at least one bin"));
        }
        Ok(Histogram {
            bin_width,
            origin,
            counts,
        })
    }

    pub fn zeros(bin_width: f64, origin: f64, bins: usize) -> Result<Self> {
        Self::new(bin_width, origin, vec![0; bins])
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) + 0.5 * self.bin_width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.bin_center(k)).collect()
    }

    /// Sum of the bins whose centers lie in `[lo, hi]`.
    pub fn sum_between(&self, lo: f64, hi: f64) -> u64 {
        (0..self.len())
            .filter(|&k| {
                let x = self.bin_center(k);
                x >= lo && x <= hi
            })
            .map(|k| self.counts[k])
            .sum()
    }

    /// Bin index holding `x`, if inside the histogram.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = ((x - self.origin) / self.bin_width).floor();
        (k >= 0.0 && (k as usize) < self.len()).then_some(k as usize)
    }

    /// Merges groups of `factor` adjacent bins; a trailing partial group is
    /// dropped.
    pub fn rebin(&self, factor: usize) -> Result<Histogram> {
        if factor == 0 {
            return Err(Error::validation("rebin factor must be positive"));
        }
        let counts: Vec<u64> = self
            .counts
            .chunks_exact(factor)
            .map(|c| c.iter().sum())
            .collect();
        Histogram::new(self.bin_width * factor as f64, self.origin, counts)
    }

    /// Bins whose start lies at or after `from` (to 1e-9 of a bin).
    pub fn crop_from(&self, from: f64) -> Result<Histogram> {
        let first = (0..self.len())
            .find(|&k| self.bin_start(k) >= from - 1e-9 * self.bin_width)
            .ok_or_else(|| Error::validation(format!("no bins start at or after {from}")))?;
        Histogram::new(self.bin_width, self.bin_start(first), self.counts[first..].to_vec())
    }

    pub fn same_geometry(&self, other: &Histogram) -> bool {
        self.bin_width == other.bin_width && self.origin == other.origin && self.len() == other.len()
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if !self.same_geometry(other) {
            return Err(Error::validation("cannot merge histograms with different binning"));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Histogram::new(self.bin_width, self.origin, counts)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
        for (k, &n) in self.counts.iter().enumerate() {
            w.serialize(Row {
                bin_start_ps: self.bin_start(k),
                counts: n,
            })
            .map_err(|e| csv_error(path, k + 1, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads `bin_start_ps,counts`; the bin width is taken from the first two
    /// rows and every later row must follow it.
    pub fn read_csv(path: &Path) -> Result<Histogram> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, 0, e))?;
        let mut rows = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            rows.push(row.map_err(|e| csv_error(path, i + 1, e))?);
        }
        if rows.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                index: rows.len(),
                message: "histogram file needs at least two bins".into(),
            });
        }
        let origin = rows[0].bin_start_ps;
        let width = rows[1].bin_start_ps - origin;
        if !(width > 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                index: 2,
                message: "bin starts must increase".into(),
            });
        }
        for (k, row) in rows.iter().enumerate() {
            let expected = origin + k as f64 * width;
            if (row.bin_start_ps - expected).abs() > 1e-6 * width.max(1.0) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    index: k + 1,
                    message: format!("bin start {} breaks uniform width {width}", row.bin_start_ps),
                });
            }
        }
        Histogram::new(width, origin, rows.into_iter().map(|r| r.counts).collect())
    }
}

/// Bin layout shared by [`cross_correlate`] and anything that must reproduce
/// its binning: `2·max_delay / bin_width` bins (rounded up) starting at
/// `-max_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBinning {
    pub bin_width: f64,
    pub max_delay: f64,
    pub bins: usize,
}

impl DelayBinning {
    pub fn new(bin_width: f64, max_delay: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::validation(format!("bin width must be positive, got {bin_width}")));
        }
        if !(max_delay.is_finite() && max_delay >= bin_width) {
            return Err(Error::validation(format!(
                "max delay {max_delay} must be at least one bin width"
            )));
        }
        let bins = (2.0 * max_delay / bin_width - 1e-9).ceil() as usize;
        Ok(DelayBinning {
            bin_width,
            max_delay,
            bins,
        })
    }

    /// Bin of a delay `t_b − t_a`, for delays in `[-max_delay, max_delay)`.
    pub fn bin_of(&self, delay: i64) -> Option<usize> {
        let d = delay as f64;
        if d < -self.max_delay || d >= self.max_delay {
            return None;
        }
        let k = ((d + self.max_delay) / self.bin_width).floor() as usize;
        (k < self.bins).then_some(k)
    }
}

/// Histogram of pairwise delays `t_b − t_a` in `[-max_delay, max_delay)`.
///
/// Both inputs are sorted internally; the sweep visits each pair inside the
/// window once, so cost scales with the number of correlated pairs rather
/// than `|a|·|b|`.
pub fn cross_correlate(a: &[u64], b: &[u64], bin_width: f64, max_delay: f64) -> Result<Histogram> {
    let binning = DelayBinning::new(bin_width, max_delay)?;
    let mut counts = vec![0u64; binning.bins];
    if a.is_empty() || b.is_empty() {
        log::warn!("cross-correlation of an empty stream; histogram is all zero");
        return Histogram::new(bin_width, -max_delay, counts);
    }
    let sorted = |v: &[u64]| {
        let mut v = v.to_vec();
        if !v.is_sorted() {
            v.sort_unstable();
        }
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let reach = max_delay.ceil() as i64;
    let mut lo = 0usize;
    for &ta in &a {
        let ta = ta as i64;
        while lo < b.len() && (b[lo] as i64) < ta - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && (b[j] as i64) <= ta + reach {
            if let Some(k) = binning.bin_of(b[j] as i64 - ta) {
                counts[k] += 1;
            }
            j += 1;
        }
    }
    Histogram::new(bin_width, -max_delay, counts)
}
