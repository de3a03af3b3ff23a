//! Scan the perturbation constant c_eps over a grid and report where the
//! objective max{1+eps, 1/c_eps} is smallest.
//!
//! cargo run --release --example constants

use odeco::experiments::{constants_table, epsilon_grid};

fn main() -> odeco::Result<()> {
    let table = constants_table(&epsilon_grid(0.01, 6.0), 3)?;
    for r in table.rows.iter().step_by(50) {
        println!(
            "eps {:5.2}  c_eps {:.6e}  objective {:10.4}",
            r.epsilon, r.c_epsilon, r.objective
        );
    }
    println!(
        "minimum objective {:.4} at eps {:.2}",
        table.best.objective, table.best.epsilon
    );
    Ok(())
}
