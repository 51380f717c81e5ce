//! Coincidence histogramming and curve-fit analyses.

mod fit;
mod fss;
mod g2;
mod histogram;

pub use fit::{fit_model, fit_model_with, poisson_weights, FitKind, FitResult, LmOptions};
pub use fss::{
    first_lens_rate, fss_from_peak_positions, fss_from_peak_positions_with, fss_from_period, period_from_fss,
    FirstLensRate, FssScanOptions,
};
pub use g2::{g2_zero, G2Result, SIDE_PEAK_WINDOW};
pub use histogram::{cross_correlate, DelayBinning, Histogram};
