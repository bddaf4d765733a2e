//! Evaluate the generalized Green operator along the time axis and
//! check that the result solves the inhomogeneous equation
//! `dx/dt = P(phi_t) x + f(phi_t)`.
//!
//!     cargo run --example green_operator

use std::collections::HashMap;

use nalgebra::DVector;

use dtorus::critical::{critical_data, DEFAULT_RTOL};
use dtorus::flow::{FundamentalMatrixOracle, Span, Tolerances};
use dtorus::green::{GreenEvaluator, QuadratureScheme, Variant};
use dtorus::system::catalog;

fn main() {
    let entry = catalog("paper-2d", &HashMap::new()).unwrap();
    let base = DVector::from_vec(vec![0.5]);
    let quad = QuadratureScheme::default();
    let oracle = FundamentalMatrixOracle::new(
        &entry.system,
        &base,
        Span::symmetric(quad.horizon),
        Tolerances::default(),
        1.0,
    )
    .unwrap();
    let (cp, cm) = entry.known_projectors.as_ref().unwrap().eval(&[0.5]);
    let cd = critical_data(&cp, &cm, DEFAULT_RTOL).unwrap();
    let ev = GreenEvaluator::new(&entry.system, cp, cm, &cd, &oracle, quad).unwrap();

    let h = 1e-5;
    println!("{:>6} {:>14} {:>14} {:>12}", "t", "G1", "G2", "ode resid");
    for k in 0..9 {
        let t = -2.0 + 0.5 * k as f64;
        let g = ev.green(t, Variant::One).unwrap();
        let fwd = ev.green(t + h, Variant::One).unwrap();
        let bwd = ev.green(t - h, Variant::One).unwrap();
        let deriv = (fwd - bwd) / (2.0 * h);
        let phi_t = oracle.phi_at(t).unwrap();
        let rhs = entry.system.eval_p(phi_t.as_slice()) * &g
            + entry.system.eval_f(phi_t.as_slice());
        println!(
            "{t:>6.2} {:>14.10} {:>14.10} {:>12.2e}",
            g[0],
            g[1],
            (deriv - rhs).amax()
        );
    }
    println!("truncation tail bound: {:.2e}", ev.tail_bound());
}
