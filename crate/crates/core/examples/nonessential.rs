//! Enumerate every singular tuple of a small odeco tensor, essential and
//! nonessential, and check each against the singular-value equations.
//!
//! cargo run --release --example nonessential

use odeco::odeco::{all_tuples_on, random_odeco};

fn main() -> odeco::Result<()> {
    let t = random_odeco(&[3, 3, 3], &[3.0, 2.0, 1.0], 5)?;
    let dense = t.to_dense();
    for active in [vec![0], vec![0, 1], vec![0, 1, 2]] {
        let tuples = all_tuples_on(&t, &active)?;
        let worst = tuples
            .iter()
            .map(|s| s.residual(&dense))
            .collect::<odeco::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!(
            "active set {:?}: {} tuples, value {:.9}, worst residual {:.2e}",
            active,
            tuples.len(),
            tuples[0].value,
            worst
        );
    }
    Ok(())
}
