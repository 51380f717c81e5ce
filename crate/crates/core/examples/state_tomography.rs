//! Maximum-likelihood reconstruction of a noisy Bell state from Poisson
//! counts, with bootstrap error bars.

use cascade_tomo::optics::tomography_bases;
use cascade_tomo::quantum::{concurrence, fidelity, DensityMatrix, PureState2Q};
use cascade_tomo::tomography::{bootstrap_uncertainty, linear_inversion, mle_reconstruct, sampled_input, Metric, MleOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cascade_tomo::Result<()> {
    let truth = DensityMatrix::werner(0.9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let input = sampled_input(&truth, &tomography_bases(36)?, 2000.0, &mut rng)?;
    println!("{} projections, {} coincidences", input.records().len(), input.total_counts());

    let linear = linear_inversion(&input)?;
    let min_eig = DensityMatrix::new(linear).map(|r| r.eigenvalues()[0]);
    println!("linear inversion: smallest eigenvalue {min_eig:?}");

    let opts = MleOptions::default();
    let res = mle_reconstruct(&input, &opts)?;
    let target = PureState2Q::phi_plus();
    println!(
        "MLE: converged {} after {} iterations, F = {:.4} (truth {:.4}), C = {:.4} (truth {:.4})",
        res.converged,
        res.iterations,
        fidelity(&res.rho, &target),
        fidelity(&truth, &target),
        concurrence(&res.rho),
        concurrence(&truth)
    );

    let f = bootstrap_uncertainty(&input, 100, Metric::Fidelity(target), 1, &opts)?;
    let c = bootstrap_uncertainty(&input, 100, Metric::Concurrence, 2, &opts)?;
    println!("bootstrap (100 resamples): F ± {:.4}, C ± {:.4}", f.std, c.std);
    Ok(())
}
