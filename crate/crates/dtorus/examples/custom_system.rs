//! Define a system in a JSON config file, load it, estimate the
//! dichotomy projectors spectrally, and sample its torus.
//!
//!     cargo run --example custom_system
//!
//! The system below is the 2-d catalog system written out by hand, with
//! the projectors omitted so the spectral estimator has to find them.

use nalgebra::DVector;

use dtorus::dichotomy::estimate_projectors;
use dtorus::flow::{FundamentalMatrixOracle, Span, Tolerances};
use dtorus::green::QuadratureScheme;
use dtorus::system::{load_config, ProjectorPair};
use dtorus::torus::{sample_torus, uniform_grid, GlueSpec};

const CONFIG: &str = r#"{
  "m": 1,
  "n": 2,
  "a": ["1"],
  "P": [["tanh(phi)", "0"],
        ["0", "-tanh(phi)"]],
  "f": ["sinh(phi)/cosh(phi)^3",
        "sinh(phi)/cosh(phi)^4"]
}"#;

fn main() {
    let dir = std::env::temp_dir().join("dtorus-custom-system");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("system.json");
    std::fs::write(&path, CONFIG).unwrap();

    let entry = load_config(&path).unwrap();
    println!("loaded `{}`: m = {}, n = {}", entry.name, entry.system.m, entry.system.n);

    let oracle = FundamentalMatrixOracle::new(
        &entry.system,
        &DVector::from_vec(vec![0.0]),
        Span::symmetric(20.0),
        Tolerances::default(),
        1.0,
    )
    .unwrap();
    let (cp, cm) = estimate_projectors(&oracle, 15.0).unwrap();
    println!("estimated C+ =\n{}", cp.base());
    println!("estimated C- =\n{}", cm.base());

    // round the estimated projectors into an expression pair the
    // sampler can evaluate at any base point (they are constant here)
    let as_pair = ProjectorPair::constant(cp.base(), cm.base());
    let sample = sample_torus(
        &entry.system,
        &as_pair,
        &uniform_grid(-2.0, 2.0, 9),
        &GlueSpec::Auto,
        QuadratureScheme::default(),
        Tolerances::default(),
    )
    .unwrap();
    println!("{:>8} {:>14} {:>14}", "phi", "u1", "u2");
    for p in &sample.points {
        println!("{:>8.3} {:>14.10} {:>14.10}", p.phi[0], p.u[0], p.u[1]);
    }
}
