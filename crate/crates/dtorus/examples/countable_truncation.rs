//! Truncation ramp for the countable (l2) catalog system: sample the
//! torus at increasing truncation dimension and watch the shared
//! components stay put.
//!
//!     cargo run --example countable_truncation

use dtorus::flow::Tolerances;
use dtorus::green::QuadratureScheme;
use dtorus::torus::l2_ramp;

fn main() {
    let rows = l2_ramp(
        &[3, 5, 10],
        0.0,
        QuadratureScheme::default(),
        Tolerances::default(),
    )
    .unwrap();

    for row in &rows {
        println!("N = {}", row.n_trunc);
        for (i, u) in row.u.iter().enumerate() {
            println!("  u_{} = {u:.12}", i + 1);
        }
        match row.max_change_shared {
            Some(c) => println!("  change on shared components vs previous N: {c:.3e}"),
            None => println!("  (first truncation)"),
        }
    }
    println!("closed form at phi = 0: u_i = -1/(i+2) for i <= 2, -1/i for i >= 3");
}
