//! Multi-start spectral norm estimates: an odeco tensor (norm equals its top
//! value) against a tensor whose norm differs from every matricization norm.
//!
//! cargo run --release --example spectral_norm

use odeco::norm::{spectral_norm, NormConfig};
use odeco::odeco::random_odeco;
use odeco::DenseTensor;

fn main() -> odeco::Result<()> {
    let cfg = NormConfig::with_restarts(200);

    let t = random_odeco(&[5, 5, 5], &[3.0, 2.0, 1.0], 1)?.to_dense();
    let est = spectral_norm(&t, &cfg, 0)?;
    println!(
        "odeco (top value 3): {:.12} ({} of {} runs converged)",
        est.value, est.converged, cfg.restarts
    );

    // 2(e2⊗e2⊗e1 + e2⊗e1⊗e2 + e1⊗e2⊗e2) has norm 4/√3.
    let e = |i: usize| {
        if i == 0 {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        }
    };
    let mut w = DenseTensor::zeros(&[2, 2, 2])?;
    for f in [[1, 1, 0], [1, 0, 1], [0, 1, 1]] {
        w.add_rank_one(2.0, &f.map(e))?;
    }
    let est = spectral_norm(&w, &cfg, 0)?;
    println!(
        "symmetric W: {:.12} (4/sqrt 3 = {:.12})",
        est.value,
        4.0 / 3f64.sqrt()
    );
    let flat = odeco::dense_svd(&w.matricize(0)?).sigma[0];
    println!("top singular value of its unfolding: {flat:.12}");
    Ok(())
}
