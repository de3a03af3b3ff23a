//! The three golden examples: a value gap larger than the perturbation norm,
//! the √(d−1) gap between unfolding and tensor norms, and the min-max value
//! of an odeco tensor with equal values.
//!
//! cargo run --release --example counterexamples

use odeco::experiments::counterexamples;
use odeco::norm::NormConfig;

fn main() -> odeco::Result<()> {
    let report = counterexamples(&NormConfig::with_restarts(200), 1)?;
    print!("{}", report.render());
    println!("all golden values reproduced: {}", report.pass());
    Ok(())
}
