//! Sample the invariant torus of the 2-d catalog system on a phase grid
//! and compare against its closed form.
//!
//!     cargo run --example torus_2d

use std::collections::HashMap;

use dtorus::flow::Tolerances;
use dtorus::green::QuadratureScheme;
use dtorus::system::catalog;
use dtorus::torus::{sample_torus, uniform_grid, GlueSpec};

fn main() {
    let entry = catalog("paper-2d", &HashMap::new()).unwrap();
    let grid = uniform_grid(-3.0, 3.0, 13);
    let sample = sample_torus(
        &entry.system,
        entry.known_projectors.as_ref().unwrap(),
        &grid,
        &GlueSpec::Auto,
        QuadratureScheme::default(),
        Tolerances::default(),
    )
    .unwrap();

    println!("glue assignment: {:?}", sample.assignment);
    println!("{:>8} {:>14} {:>14} {:>10}", "phi", "u1", "u2", "error");
    for p in &sample.points {
        let ch = p.phi[0].cosh();
        let exact = [-1.0 / (3.0 * ch * ch), -1.0 / (2.0 * ch.powi(3))];
        let err = (p.u[0] - exact[0]).abs().max((p.u[1] - exact[1]).abs());
        println!(
            "{:>8.3} {:>14.10} {:>14.10} {:>10.2e}",
            p.phi[0], p.u[0], p.u[1], err
        );
    }
    println!("sampled {} points in {:?}", sample.points.len(), sample.elapsed);
}
