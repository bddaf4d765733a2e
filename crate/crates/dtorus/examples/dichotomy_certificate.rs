//! Fit dichotomy certificates (K, alpha) on both semi-axes, once with
//! the known projectors and once with projectors estimated from the
//! singular vectors of the matriciant.
//!
//!     cargo run --example dichotomy_certificate

use std::collections::HashMap;

use nalgebra::DVector;

use dtorus::dichotomy::{estimate_projectors, verify_dichotomy, ProjectorField, Side};
use dtorus::flow::{FundamentalMatrixOracle, Span, Tolerances};
use dtorus::system::catalog;

fn main() {
    let entry = catalog("paper-2d", &HashMap::new()).unwrap();
    let base = DVector::from_vec(vec![0.0]);
    let oracle = FundamentalMatrixOracle::new(
        &entry.system,
        &base,
        Span::symmetric(20.0),
        Tolerances::default(),
        1.0,
    )
    .unwrap();

    let (cp_known, cm_known) = entry.known_projectors.as_ref().unwrap().eval(&[0.0]);
    let (cp_est, cm_est) = estimate_projectors(&oracle, 15.0).unwrap();
    println!("known C+ =\n{}", cp_known);
    println!("estimated C+ =\n{}", cp_est.base());
    println!("known C- =\n{}", cm_known);
    println!("estimated C- =\n{}", cm_est.base());

    for (label, field) in [
        ("C+ known", ProjectorField::new(Side::Plus, cp_known, false).unwrap()),
        ("C+ estimated", cp_est),
        ("C- known", ProjectorField::new(Side::Minus, cm_known, false).unwrap()),
        ("C- estimated", cm_est),
    ] {
        let cert = verify_dichotomy(&field, &oracle, 10.0, 0.5).unwrap();
        println!(
            "{label:>14}: K = {:.4}, alpha = {:.4} over {} pairs (window {})",
            cert.k, cert.alpha, cert.pairs, cert.window
        );
    }
}
