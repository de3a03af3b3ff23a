//! Project a nearly orthogonal CP tensor onto the odeco set and compare the
//! distance and column angles with their bounds.
//!
//! cargo run --release --example incoherent

use odeco::incoherent::{projection_report, random_near_orthogonal_cp};
use odeco::norm::NormConfig;
use odeco::rng_from_seed;

fn main() -> odeco::Result<()> {
    let mut rng = rng_from_seed(3);
    let x = random_near_orthogonal_cp(&[10, 10, 10], &[4.0, 3.0, 2.0], 0.05, &mut rng)?;
    let r = projection_report(&x, &NormConfig::with_restarts(200), 1)?;
    println!("isometry defect delta   {:.6e}", r.delta);
    println!("distance (lower bound)  {:.6e}", r.distance);
    println!("distance (frobenius)    {:.6e}", r.distance_frobenius);
    println!(
        "distance bound          {:.6e}  ok={}",
        r.distance_bound,
        r.distance_ok()
    );
    println!("max column sine         {:.6e}", r.max_column_sin);
    println!(
        "delta/sqrt(2)           {:.6e}  ok={}",
        r.angle_bound,
        r.angle_ok()
    );
    println!(
        "delta*sqrt(1-delta^2/4) {:.6e}  ok={}",
        r.angle_bound_corrected,
        r.corrected_angle_ok()
    );
    Ok(())
}
