//! Evaluate the solvability conditions for both bounded-solution
//! variants, then break them on purpose: replacing f1 by a constant
//! leaves a sech integral as the obstruction, which comes out as pi.
//!
//!     cargo run --example solvability_check

use std::collections::HashMap;

use nalgebra::DVector;

use dtorus::critical::{critical_data, DEFAULT_RTOL};
use dtorus::flow::{FundamentalMatrixOracle, Span, Tolerances};
use dtorus::green::{GreenEvaluator, QuadratureScheme, Variant, DEFAULT_TOL_SOLV};
use dtorus::system::catalog;
use dtorus::Expression;

fn report(entry: &dtorus::CatalogEntry, label: &str) {
    let base = DVector::from_vec(vec![0.0]);
    let quad = QuadratureScheme::default();
    let oracle = FundamentalMatrixOracle::new(
        &entry.system,
        &base,
        Span::symmetric(quad.horizon),
        Tolerances::default(),
        1.0,
    )
    .unwrap();
    let (cp, cm) = entry.known_projectors.as_ref().unwrap().eval(&[0.0]);
    let cd = critical_data(&cp, &cm, DEFAULT_RTOL).unwrap();
    let ev = GreenEvaluator::new(&entry.system, cp, cm, &cd, &oracle, quad).unwrap();
    println!("{label}:");
    for v in [Variant::One, Variant::Two] {
        let rep = ev.solvability(v, DEFAULT_TOL_SOLV).unwrap();
        println!(
            "  variant {v}: residual norm {:.3e} (tail bound {:.1e}) -> {}",
            rep.residual_norm,
            rep.tail_bound,
            if rep.solvable { "solvable" } else { "NOT solvable" }
        );
    }
}

fn main() {
    let entry = catalog("paper-2d", &HashMap::new()).unwrap();
    report(&entry, "catalog f");

    let mut broken = entry.clone();
    broken.system.f[0] = Expression::parse("1").unwrap();
    report(&broken, "f1 = 1");
    println!("  (the variant-one residual is the sech integral, i.e. pi)");
}
