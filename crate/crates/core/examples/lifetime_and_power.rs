//! Radiative lifetimes from simulated decay histograms and a sublinear power
//! law fitted in log-log space.
//!
//! Against the laser clock the exciton trace is the biexciton decay convolved
//! with the exciton one. A single exponential fitted from the maximum then
//! returns an effective constant longer than the exciton lifetime; the two
//! rates are too close for any late-time window to separate them.

use cascade_tomo::analysis::{fit_model, poisson_weights, FitKind, Histogram};
use cascade_tomo::sim::{simulate_lifetime_run, EmitterConfig, Species, CHANNEL_A};

fn decay_histogram(cfg: &EmitterConfig, species: Species) -> cascade_tomo::Result<Histogram> {
    let period = cfg.rep_period();
    let stream = simulate_lifetime_run(cfg, species, 200_000, 5)?;
    let mut counts = vec![0u64; (period / 50.0) as usize];
    for t in stream.timestamps(CHANNEL_A) {
        counts[((t as f64 % period) / 50.0) as usize] += 1;
    }
    Histogram::new(50.0, 0.0, counts)
}

fn tau_from_peak(h: &Histogram) -> cascade_tomo::Result<(f64, f64)> {
    let start = (0..h.len()).max_by_key(|&i| h.counts()[i]).unwrap_or(0);
    let (x, y): (Vec<f64>, Vec<f64>) = (start..h.len()).map(|i| (h.bin_center(i), h.counts()[i] as f64)).unzip();
    let fit = fit_model(FitKind::Exponential, &x, &y, Some(&poisson_weights(&y)), None)?;
    Ok((fit.param("tau"), fit.std_error("tau")))
}

fn main() -> cascade_tomo::Result<()> {
    let cfg = EmitterConfig::lossless();
    for species in [Species::Xx, Species::X] {
        let h = decay_histogram(&cfg, species)?;
        let (tau, err) = tau_from_peak(&h)?;
        let simulated = match species {
            Species::Xx => cfg.tau_xx,
            Species::X => cfg.tau_x,
        };
        println!("{species:?}: tau = {tau:.0} ± {err:.0} ps (simulated lifetime {simulated})");
    }

    let power: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let rate: Vec<f64> = power.iter().map(|p| 1200.0 * p.powf(0.78)).collect();
    let fit = fit_model(FitKind::PowerLaw, &power, &rate, None, None)?;
    println!("power law slope {:.3}", fit.param("s"));
    Ok(())
}
