//! Phase evolution of the cascade state under a fine-structure splitting:
//! fidelity to Φ⁺ and concurrence as the exciton delay grows.

use cascade_tomo::quantum::{concurrence, fidelity, fss_period, time_evolved_state, DensityMatrix, PureState2Q};

fn main() {
    let fss = 4.65;
    let period = fss_period(fss);
    println!("fss {fss} µeV -> oscillation period {period:.1} ps");
    println!("{:>8} {:>10} {:>12}", "t_ps", "fidelity", "concurrence");
    for k in 0..=8 {
        let t = k as f64 * period / 8.0;
        let rho = DensityMatrix::from_pure(&time_evolved_state(fss, t));
        println!("{t:>8.1} {:>10.4} {:>12.4}", fidelity(&rho, &PureState2Q::phi_plus()), concurrence(&rho));
    }
}
