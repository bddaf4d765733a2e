//! Sampling the invariant torus `u(phi) = (G_0(f))(phi)` over a phase
//! grid, dynamic verification of invariance, and truncation ramps for
//! the countable catalog system.
//!
//! The "glued" torus is produced componentwise: each state component
//! takes its value from whichever variant's solvability condition that
//! component satisfies. The assignment is user-supplied, or derived
//! automatically for diagonal systems (variant two where the diagonal
//! entry of C+ is 1, variant one where it is 0).

use std::collections::HashMap;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::critical::{critical_data, CriticalError, DEFAULT_RTOL};
use crate::dichotomy::DichotomyError;
use crate::flow::{FlowError, FundamentalMatrixOracle, Span, Tolerances};
use crate::green::{
    GreenError, GreenEvaluator, QuadratureScheme, SolvabilityReport, Variant, DEFAULT_TOL_SOLV,
};
use crate::system::{CatalogEntry, ProjectorPair, SystemDefinition};

/// How to combine the two bounded-solution families per component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlueSpec {
    /// One variant for every component.
    Single(Variant),
    /// Derive the per-component assignment from diagonal structure.
    Auto,
    /// Explicit per-component assignment.
    PerComponent(Vec<Variant>),
}

impl std::str::FromStr for GlueSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(GlueSpec::Auto),
            "one" | "1" => Ok(GlueSpec::Single(Variant::One)),
            "two" | "2" => Ok(GlueSpec::Single(Variant::Two)),
            list => list
                .split(',')
                .map(|p| p.parse::<Variant>())
                .collect::<Result<Vec<_>, _>>()
                .map(GlueSpec::PerComponent),
        }
    }
}

/// One grid point of the sampled torus.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TorusPoint {
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    /// Residual norm of the solvability condition, per variant actually
    /// used at this point (same order as `TorusSample::variants_used`).
    pub residual_norm: f64,
    pub tail_bound: f64,
    pub solvable: bool,
}

/// The sampled torus with its per-point diagnostics. Every point
/// carries a residual and tail bound; points failing solvability are
/// flagged, never dropped.
#[derive(Debug, Clone)]
pub struct TorusSample {
    pub points: Vec<TorusPoint>,
    /// Resolved per-component variant assignment.
    pub assignment: Vec<Variant>,
    pub quad: QuadratureScheme,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum TorusError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Dichotomy(#[from] DichotomyError),
    #[error("glue `auto` requires a diagonal P and diagonal projectors; pass an explicit per-component list")]
    AutoGlueNotDiagonal,
    #[error("glue assignment has {got} entries but the system has {expected} components")]
    GlueLength { expected: usize, got: usize },
    #[error("system has no known projectors and estimation was not requested")]
    NoProjectors,
    #[error("{failed} of {total} grid points failed: first error: {first}")]
    PointFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

/// Resolve a glue spec against the system.
pub fn resolve_assignment(
    sys: &SystemDefinition,
    c_plus_at_probe: &DMatrix<f64>,
    glue: &GlueSpec,
) -> Result<Vec<Variant>, TorusError> {
    match glue {
        GlueSpec::Single(v) => Ok(vec![*v; sys.n]),
        GlueSpec::PerComponent(list) => {
            if list.len() != sys.n {
                return Err(TorusError::GlueLength {
                    expected: sys.n,
                    got: list.len(),
                });
            }
            Ok(list.clone())
        }
        GlueSpec::Auto => {
            let diag_proj = (0..sys.n).all(|i| {
                (0..sys.n).all(|j| i == j || c_plus_at_probe[(i, j)].abs() <= 1e-10)
            });
            if !sys.p_is_diagonal() || !diag_proj {
                return Err(TorusError::AutoGlueNotDiagonal);
            }
            Ok((0..sys.n)
                .map(|i| {
                    if c_plus_at_probe[(i, i)] > 0.5 {
                        Variant::Two
                    } else {
                        Variant::One
                    }
                })
                .collect())
        }
    }
}

/// Uniform grid `lo..=hi` with `count` points (1-D phase spaces).
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.5
            } else {
                i as f64 / (count - 1) as f64
            };
            DVector::from_vec(vec![lo + (hi - lo) * t])
        })
        .collect()
}

fn point_pipeline(
    sys: &SystemDefinition,
    projectors: &ProjectorPair,
    phi: &DVector<f64>,
    assignment: &[Variant],
    quad: QuadratureScheme,
    tol: Tolerances,
    rtol: f64,
) -> Result<TorusPoint, TorusError> {
    let oracle =
        FundamentalMatrixOracle::new(sys, phi, Span::symmetric(quad.horizon), tol, 0.0)?;
    let (cp, cm) = projectors.eval(phi.as_slice());
    let cd = critical_data(&cp, &cm, rtol)?;
    let ev = GreenEvaluator::new(sys, cp, cm, &cd, &oracle, quad)?;

    let mut variants: Vec<Variant> = Vec::new();
    for v in assignment {
        if !variants.contains(v) {
            variants.push(*v);
        }
    }
    let mut per_variant: HashMap<&Variant, (DVector<f64>, SolvabilityReport)> = HashMap::new();
    for v in &variants {
        let u = ev.green(0.0, *v)?;
        let rep = ev.solvability(*v, DEFAULT_TOL_SOLV)?;
        per_variant.insert(v, (u, rep));
    }
    // selection, not recomputation: each component comes straight from
    // its variant's evaluation
    let u: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, v)| per_variant[v].0[i])
        .collect();
    let residual_norm = variants
        .iter()
        .map(|v| per_variant[v].1.residual_norm)
        .fold(0.0, f64::max);
    let tail_bound = variants
        .iter()
        .map(|v| per_variant[v].1.tail_bound)
        .fold(0.0, f64::max);
    let solvable = variants.iter().all(|v| per_variant[v].1.solvable);
    Ok(TorusPoint {
        phi: phi.iter().copied().collect(),
        u,
        residual_norm,
        tail_bound,
        solvable,
    })
}

/// Sample `u(phi)` on a grid. Per-point pipelines run in parallel and
/// are merged back in grid order.
pub fn sample_torus(
    sys: &SystemDefinition,
    projectors: &ProjectorPair,
    grid: &[DVector<f64>],
    glue: &GlueSpec,
    quad: QuadratureScheme,
    tol: Tolerances,
) -> Result<TorusSample, TorusError> {
    let start = Instant::now();
    let probe = grid.first().cloned().unwrap_or_else(|| DVector::zeros(sys.m));
    let (cp_probe, _) = projectors.eval(probe.as_slice());
    let assignment = resolve_assignment(sys, &cp_probe, glue)?;

    let results: Vec<Result<TorusPoint, TorusError>> = grid
        .par_iter()
        .map(|phi| point_pipeline(sys, projectors, phi, &assignment, quad, tol, DEFAULT_RTOL))
        .collect();

    let total = results.len();
    let mut points = Vec::with_capacity(total);
    let mut failed = 0usize;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                failed += 1;
                if first_err.is_none() {
                    first_err = Some(e.to_string());
                }
            }
        }
    }
    if failed > 0 {
        return Err(TorusError::PointFailures {
            failed,
            total,
            first: first_err.unwrap(),
        });
    }
    Ok(TorusSample {
        points,
        assignment,
        quad,
        elapsed: start.elapsed(),
    })
}

/// Integrate the coupled system from `(phi, u(phi))` over `[0, t_star]`
/// for every grid point and compare the final state against the torus
/// recomputed at the flowed base point. Returns the max defect.
pub fn verify_invariance(
    sys: &SystemDefinition,
    projectors: &ProjectorPair,
    sample: &TorusSample,
    t_star: f64,
    tol: Tolerances,
) -> Result<f64, TorusError> {
    let quad = sample.quad;
    let defects: Vec<Result<f64, TorusError>> = sample
        .points
        .par_iter()
        .map(|point| {
            let m = sys.m;
            let n = sys.n;
            let mut y0 = point.phi.clone();
            y0.extend_from_slice(&point.u);
            // coupled system (phi, x) integrated as one flow on R^(m+n)
            let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
                let phi = &y[..m];
                for (d, a) in dy.iter_mut().zip(&sys.a) {
                    *d = a.eval_unchecked(phi);
                }
                let p = sys.eval_p(phi);
                let f = sys.eval_f(phi);
                for i in 0..n {
                    let mut acc = f[i];
                    for j in 0..n {
                        acc += p[(i, j)] * y[m + j];
                    }
                    dy[m + i] = acc;
                }
            };
            let dense = crate::flow::integrate_dense(&rhs, &y0, Span::new(0.0, t_star), tol)?;
            let end = dense.eval(t_star)?;
            let phi_end = DVector::from_fn(m, |i, _| end[i]);
            let x_end = DVector::from_fn(n, |i, _| end[m + i]);

            let recomputed = point_pipeline(
                sys,
                projectors,
                &phi_end,
                &sample.assignment,
                quad,
                tol,
                DEFAULT_RTOL,
            )?;
            let u_end = DVector::from_vec(recomputed.u);
            Ok((x_end - u_end).amax())
        })
        .collect();
    let mut max_defect = 0.0f64;
    for d in defects {
        max_defect = max_defect.max(d?);
    }
    Ok(max_defect)
}

/// One row of a truncation ramp.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RampRow {
    #[serde(rename = "N")]
    pub n_trunc: usize,
    pub u: Vec<f64>,
    /// Max absolute change on the components shared with the previous
    /// (smaller) truncation; `None` for the first row.
    pub max_change_shared: Option<f64>,
}

/// Galerkin truncation ramp for the countable catalog system: sample
/// `u(phi)` at each truncation dimension and report the change on
/// shared components. For the diagonal catalog system the components
/// decouple exactly, so the table demonstrates N-independence.
pub fn l2_ramp(
    ns: &[usize],
    phi: f64,
    quad: QuadratureScheme,
    tol: Tolerances,
) -> Result<Vec<RampRow>, TorusError> {
    let mut rows: Vec<RampRow> = Vec::new();
    for &n_trunc in ns {
        let entry = l2_entry(n_trunc);
        let sample = sample_torus(
            &entry.system,
            entry.known_projectors.as_ref().unwrap(),
            &[DVector::from_vec(vec![phi])],
            &GlueSpec::Auto,
            quad,
            tol,
        )?;
        let u = sample.points[0].u.clone();
        let max_change_shared = rows.last().map(|prev| {
            prev.u
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        rows.push(RampRow {
            n_trunc,
            u,
            max_change_shared,
        });
    }
    Ok(rows)
}

fn l2_entry(n_trunc: usize) -> CatalogEntry {
    let params: HashMap<String, String> =
        [("N".to_string(), n_trunc.to_string())].into_iter().collect();
    crate::system::catalog("paper-l2", &params).expect("catalog paper-l2")
}
