//! Fine-structure splitting from emission energy against analyser angle, the
//! period/splitting conversion, and the photon rate at the first lens.

use cascade_tomo::analysis::{first_lens_rate, fss_from_peak_positions, fss_from_period, period_from_fss};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> cascade_tomo::Result<()> {
    let fss = 4.65;
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let angles: Vec<f64> = (0..36).map(|k| k as f64 * std::f64::consts::PI / 36.0).collect();
    let energies: Vec<f64> = angles
        .iter()
        .map(|a| 0.5 * fss * (4.0 * a + 0.3).sin() + noise.sample(&mut rng))
        .collect();
    let (fitted, fit) = fss_from_peak_positions(&angles, &energies)?;
    println!("scan: fss = {fitted:.3} ± {:.3} µeV (simulated {fss})", 2.0 * fit.std_error("A"));

    println!("890 ps -> {:.3} µeV; {fss} µeV -> {:.1} ps", fss_from_period(890.0)?, period_from_fss(fss)?);

    let rate = first_lens_rate(4.0e4, 0.008, 0.5, 80.0)?;
    println!("first lens: {:.2} MHz, {:.3} of pulses", rate.rate_mhz, rate.fraction_of_pulses);
    if let Some(warning) = rate.compare_reported(16.67, 0.05) {
        println!("{warning}");
    }
    Ok(())
}
