//! Biexciton autocorrelation with carrier recapture: the zero-delay peak is
//! fitted to the recapture model to recover the recapture time.

use cascade_tomo::analysis::{cross_correlate, fit_model, g2_zero, poisson_weights, FitKind};
use cascade_tomo::sim::{simulate_autocorrelation_run, EmitterConfig, Species, CHANNEL_A, CHANNEL_B};

fn main() -> cascade_tomo::Result<()> {
    let cfg = EmitterConfig {
        recapture_probability: 0.36,
        ..EmitterConfig::lossless()
    };
    let period = cfg.rep_period();
    let (a, b) = simulate_autocorrelation_run(&cfg, Species::Xx, 400_000, 11)?;
    let h = cross_correlate(&a.timestamps(CHANNEL_A), &b.timestamps(CHANNEL_B), 50.0, 3.5 * period)?;
    println!("g2(0) = {:.3}", g2_zero(&h, period, 3)?.g2_zero);

    // Stay clear of the neighbouring side peaks' tails.
    let (x, y): (Vec<f64>, Vec<f64>) = (0..h.len())
        .filter(|&i| h.bin_center(i).abs() <= 3000.0)
        .map(|i| (h.bin_center(i), h.counts()[i] as f64))
        .unzip();
    let fit = fit_model(FitKind::Recapture, &x, &y, Some(&poisson_weights(&y)), None)?;
    for name in FitKind::Recapture.param_names() {
        println!("{name:>4} = {:>10.2} ± {:.2}", fit.param(name), fit.std_error(name));
    }
    println!("simulated: t_d = {} ps, t_c = {} ps", cfg.tau_xx, cfg.recapture_time);
    Ok(())
}
