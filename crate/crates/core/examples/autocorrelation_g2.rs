//! Pulsed autocorrelation of the exciton line behind a 50:50 splitter, with
//! and without background, and the resulting g²(0).

use cascade_tomo::analysis::{cross_correlate, g2_zero};
use cascade_tomo::sim::{expected_g2_zero, simulate_autocorrelation_run, EmitterConfig, Species, CHANNEL_A, CHANNEL_B};

fn main() -> cascade_tomo::Result<()> {
    let period = EmitterConfig::default().rep_period();
    for background in [0.0, 2e5, 1e6] {
        let cfg = EmitterConfig {
            background_rate: background,
            ..EmitterConfig::lossless()
        };
        let (a, b) = simulate_autocorrelation_run(&cfg, Species::X, 400_000, 3)?;
        let h = cross_correlate(&a.timestamps(CHANNEL_A), &b.timestamps(CHANNEL_B), 50.0, 3.5 * period)?;
        let g2 = g2_zero(&h, period, 3)?;
        let expected = expected_g2_zero(&cfg, Species::X, g2.window_delta, 3)?;
        println!(
            "background {background:>9.0} cps: g2(0) = {:.4} (expected {expected:.4}), window {:.0} ps, centre {} vs side {:.0}",
            g2.g2_zero, g2.window_delta, g2.center_counts, g2.mean_side_counts
        );
    }
    Ok(())
}
