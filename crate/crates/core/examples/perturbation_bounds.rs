//! Perturb an odeco tensor slightly and check the value and angle bounds row
//! by row.
//!
//! cargo run --release --example perturbation_bounds

use odeco::incoherent::polar_factor;
use odeco::odeco::random_odeco;
use odeco::perturb::{verify_bounds, VerifyConfig};
use odeco::{rng_from_seed, Matrix, OdecoTensor};
use rand_distr::{Distribution, StandardNormal};

fn main() -> odeco::Result<()> {
    let a = random_odeco(&[8, 8, 8], &[5.0, 4.0, 4.0, 2.0], 7)?;
    let mut rng = rng_from_seed(8);
    let factors = a
        .factors()
        .iter()
        .map(|u| {
            let noisy: Vec<f64> = u
                .as_slice()
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + 1e-4 * z
                })
                .collect();
            polar_factor(&Matrix::from_row_major(u.rows(), u.cols(), noisy)?)
        })
        .collect::<odeco::Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = a.lambdas().iter().map(|l| l + 1e-4).collect();
    let b = OdecoTensor::new(lambdas, factors)?;

    let report = verify_bounds(&a, &b, 0.05, &VerifyConfig::default())?;
    print!("{}", report.to_csv());
    println!("all rows pass: {}", report.all_pass());
    Ok(())
}
