//! Build a random odeco tensor, recover it by gradient iteration with
//! deflation, and compare against HOSVD.
//!
//! cargo run --release --example decompose

use odeco::decompose::{decompose_odeco, hosvd, IterationConfig};
use odeco::odeco::random_odeco;
use odeco::perturb::{match_tuples, max_sin_after_matching};

fn main() -> odeco::Result<()> {
    let truth = random_odeco(&[6, 5, 7], &[4.0, 3.0, 2.5, 1.0], 11)?;
    let dense = truth.to_dense();

    let dec = decompose_odeco(&dense, 4, &IterationConfig::default(), 3)?;
    let m = match_tuples(&truth, &dec.odeco)?;
    println!("gradient iteration: found {} tuples", dec.found);
    for k in 0..4 {
        println!(
            "  lambda {:.12} recovered {:.12}",
            truth.lambdas()[k],
            dec.odeco.lambdas()[m.pi[k]]
        );
    }
    println!(
        "  max sin angle {:.3e}",
        max_sin_after_matching(&truth, &dec.odeco, &m, 4)
    );

    let h = hosvd(&dense)?;
    let mh = match_tuples(&truth, &h)?;
    println!(
        "hosvd max sin angle {:.3e}",
        max_sin_after_matching(&truth, &h, &mh, 4)
    );
    Ok(())
}
