//! A short run of the correlated-pair study on four grid points.
//!
//! cargo run --release --example figure1

use odeco::experiments::{figure1, figure1_csv, ExperimentConfig};

fn main() -> odeco::Result<()> {
    let mut cfg = ExperimentConfig::figure1(false, 42);
    cfg.omegas = vec![1000.0, 100.0, 20.0, 5.0];
    let rows = figure1(&cfg)?;
    print!("{}", figure1_csv(&cfg, &rows));
    Ok(())
}
