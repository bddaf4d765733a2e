//! System definitions: the triple `(a, P, f)` of Eq.-style data that
//! drives everything else, a JSON config loader, and the built-in
//! catalog of worked examples.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::expr::Expression;

/// Whether the phase variables live on angles mod 2π or on the real
/// line. The catalog examples use `tanh`/`cosh` coefficients, which are
/// not 2π-periodic, so they default to `Line`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Periodic,
    Line,
}

/// The linear inhomogeneous skew-product system
/// `dphi/dt = a(phi)`, `dx/dt = P(phi) x + f(phi)`.
#[derive(Debug, Clone)]
pub struct SystemDefinition {
    /// Phase dimension `m >= 1`.
    pub m: usize,
    /// State dimension `n >= 1`.
    pub n: usize,
    /// Angular velocity field, `m` expressions.
    pub a: Vec<Expression>,
    /// `n x n` coefficient matrix, row major.
    pub p: Vec<Vec<Expression>>,
    /// Inhomogeneity, `n` expressions.
    pub f: Vec<Expression>,
    pub phase_mode: PhaseMode,
}

/// A pair of projector fields given as expression matrices over phi.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub c_plus: Vec<Vec<Expression>>,
    pub c_minus: Vec<Vec<Expression>>,
}

impl ProjectorPair {
    pub fn eval(&self, phi: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        (eval_matrix(&self.c_plus, phi), eval_matrix(&self.c_minus, phi))
    }

    /// A phase-independent pair from numeric matrices (e.g. projectors
    /// estimated at a single base point).
    pub fn constant(c_plus: &DMatrix<f64>, c_minus: &DMatrix<f64>) -> ProjectorPair {
        let lift = |m: &DMatrix<f64>| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| Expression::constant(m[(i, j)])).collect())
                .collect()
        };
        ProjectorPair {
            c_plus: lift(c_plus),
            c_minus: lift(c_minus),
        }
    }
}

/// A named system together with whatever closed-form data is known
/// about it (projectors, the invariant torus).
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub system: SystemDefinition,
    pub known_projectors: Option<ProjectorPair>,
    pub known_torus: Option<Vec<Expression>>,
}

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("in field {field}: {source}")]
    BadExpression {
        field: String,
        source: crate::expr::ParseError,
    },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("expression in {field} references phi{used} but m = {m}")]
    PhaseOutOfRange {
        field: String,
        used: usize,
        m: usize,
    },
    #[error("unknown catalog system `{0}` (available: paper-2d, paper-l2)")]
    UnknownCatalog(String),
    #[error("catalog parameter error: {0}")]
    BadCatalogParam(String),
}

fn eval_matrix(rows: &[Vec<Expression>], phi: &[f64]) -> DMatrix<f64> {
    let n = rows.len();
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    DMatrix::from_fn(n, cols, |i, j| rows[i][j].eval_unchecked(phi))
}

impl SystemDefinition {
    pub fn eval_a(&self, phi: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.m, |i, _| self.a[i].eval_unchecked(phi))
    }

    pub fn eval_p(&self, phi: &[f64]) -> DMatrix<f64> {
        eval_matrix(&self.p, phi)
    }

    pub fn eval_f(&self, phi: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.f[i].eval_unchecked(phi))
    }

    /// True when `P(phi)` is diagonal for every phi, detected by
    /// checking that every off-diagonal entry is the literal constant 0.
    pub fn p_is_diagonal(&self) -> bool {
        self.p.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, e)| i == j || e.is_const(0.0))
        })
    }

    fn validate(&self) -> Result<(), SystemError> {
        if self.a.len() != self.m {
            return Err(SystemError::DimensionMismatch {
                what: "a".into(),
                expected: self.m,
                got: self.a.len(),
            });
        }
        if self.f.len() != self.n {
            return Err(SystemError::DimensionMismatch {
                what: "f".into(),
                expected: self.n,
                got: self.f.len(),
            });
        }
        if self.p.len() != self.n {
            return Err(SystemError::DimensionMismatch {
                what: "P (rows)".into(),
                expected: self.n,
                got: self.p.len(),
            });
        }
        for (i, row) in self.p.iter().enumerate() {
            if row.len() != self.n {
                return Err(SystemError::DimensionMismatch {
                    what: format!("P row {i}"),
                    expected: self.n,
                    got: row.len(),
                });
            }
        }
        let check = |field: String, e: &Expression| -> Result<(), SystemError> {
            if e.phase_dim() > self.m {
                Err(SystemError::PhaseOutOfRange {
                    field,
                    used: e.phase_dim(),
                    m: self.m,
                })
            } else {
                Ok(())
            }
        };
        for (i, e) in self.a.iter().enumerate() {
            check(format!("a[{i}]"), e)?;
        }
        for (i, e) in self.f.iter().enumerate() {
            check(format!("f[{i}]"), e)?;
        }
        for (i, row) in self.p.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                check(format!("P[{i}][{j}]"), e)?;
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    m: usize,
    n: usize,
    a: Vec<String>,
    #[serde(rename = "P")]
    p: Vec<Vec<String>>,
    f: Vec<String>,
    #[serde(default = "default_phase_mode")]
    phase_mode: PhaseMode,
    #[serde(default)]
    projectors: Option<RawProjectors>,
}

#[derive(Deserialize)]
struct RawProjectors {
    c_plus: Vec<Vec<String>>,
    c_minus: Vec<Vec<String>>,
}

fn default_phase_mode() -> PhaseMode {
    PhaseMode::Line
}

fn parse_vec(field: &str, src: &[String]) -> Result<Vec<Expression>, SystemError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| {
            Expression::parse(s).map_err(|source| SystemError::BadExpression {
                field: format!("{field}[{i}]"),
                source,
            })
        })
        .collect()
}

fn parse_matrix(field: &str, src: &[Vec<String>]) -> Result<Vec<Vec<Expression>>, SystemError> {
    src.iter()
        .enumerate()
        .map(|(i, row)| parse_vec(&format!("{field}[{i}]"), row))
        .collect()
}

/// Load a system from a JSON config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<CatalogEntry, SystemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SystemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawConfig =
        serde_json::from_str(&text).map_err(|e| SystemError::Format(e.to_string()))?;
    let system = SystemDefinition {
        m: raw.m,
        n: raw.n,
        a: parse_vec("a", &raw.a)?,
        p: parse_matrix("P", &raw.p)?,
        f: parse_vec("f", &raw.f)?,
        phase_mode: raw.phase_mode,
    };
    system.validate()?;
    let known_projectors = match raw.projectors {
        Some(p) => {
            let pair = ProjectorPair {
                c_plus: parse_matrix("projectors.c_plus", &p.c_plus)?,
                c_minus: parse_matrix("projectors.c_minus", &p.c_minus)?,
            };
            for (name, m) in [("c_plus", &pair.c_plus), ("c_minus", &pair.c_minus)] {
                if m.len() != system.n || m.iter().any(|r| r.len() != system.n) {
                    return Err(SystemError::DimensionMismatch {
                        what: format!("projectors.{name}"),
                        expected: system.n,
                        got: m.len(),
                    });
                }
            }
            Some(pair)
        }
        None => None,
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into());
    Ok(CatalogEntry {
        name,
        system,
        known_projectors,
        known_torus: None,
    })
}

fn exprs(src: &[&str]) -> Vec<Expression> {
    src.iter().map(|s| Expression::parse(s).unwrap()).collect()
}

fn diag_exprs(entries: &[&str]) -> Vec<Vec<Expression>> {
    let n = entries.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Expression::parse(entries[i]).unwrap()
                    } else {
                        Expression::constant(0.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Built-in examples.
///
/// * `paper-2d`: the two-dimensional `tanh` system with the known
///   projectors `C+ = diag(0,1)`, `C- = diag(1,0)` and the closed-form
///   glued torus `(-1/(3 ch^2 phi), -1/(2 ch^3 phi))`.
/// * `paper-l2`: the `N`-dimensional diagonal truncation of the
///   countable system, `P = diag(th, th, -th, ..., -th)`,
///   `f_i = sh(phi)/ch^(i+2)(phi)`; requires parameter `N >= 3`.
pub fn catalog(name: &str, params: &HashMap<String, String>) -> Result<CatalogEntry, SystemError> {
    match name {
        "paper-2d" => {
            let system = SystemDefinition {
                m: 1,
                n: 2,
                a: exprs(&["1"]),
                p: diag_exprs(&["tanh(phi)", "-tanh(phi)"]),
                f: exprs(&["sinh(phi)/cosh(phi)^3", "sinh(phi)/cosh(phi)^4"]),
                phase_mode: PhaseMode::Line,
            };
            Ok(CatalogEntry {
                name: name.into(),
                system,
                known_projectors: Some(ProjectorPair {
                    c_plus: diag_exprs(&["0", "1"]),
                    c_minus: diag_exprs(&["1", "0"]),
                }),
                known_torus: Some(exprs(&[
                    "-1/(3*cosh(phi)^2)",
                    "-1/(2*cosh(phi)^3)",
                ])),
            })
        }
        "paper-l2" => {
            let n_trunc: usize = params
                .get("N")
                .ok_or_else(|| {
                    SystemError::BadCatalogParam("paper-l2 requires N (truncation dimension)".into())
                })?
                .parse()
                .map_err(|_| SystemError::BadCatalogParam("N must be an integer".into()))?;
            if n_trunc < 3 {
                return Err(SystemError::BadCatalogParam(format!(
                    "paper-l2 requires N >= 3, got {n_trunc}"
                )));
            }
            Ok(paper_l2(n_trunc))
        }
        other => Err(SystemError::UnknownCatalog(other.into())),
    }
}

fn paper_l2(n: usize) -> CatalogEntry {
    // components 1 and 2 carry +tanh, the rest -tanh (1-based as in the
    // countable system; i here is 0-based)
    let p_entries: Vec<String> = (0..n)
        .map(|i| {
            if i < 2 {
                "tanh(phi)".to_string()
            } else {
                "-tanh(phi)".to_string()
            }
        })
        .collect();
    let f_entries: Vec<String> = (0..n)
        .map(|i| format!("sinh(phi)/cosh(phi)^{}", i + 3))
        .collect();
    let cplus: Vec<String> = (0..n)
        .map(|i| if i < 2 { "0" } else { "1" }.to_string())
        .collect();
    let cminus: Vec<String> = (0..n)
        .map(|i| if i < 2 { "1" } else { "0" }.to_string())
        .collect();
    // glued torus: -1/((i+2) ch^(i+1)) for i <= 2, -1/(i ch^(i+1)) for
    // i >= 3 (1-based i), by direct antiderivative
    let torus: Vec<String> = (1..=n)
        .map(|i| {
            let coeff = if i <= 2 { i + 2 } else { i };
            format!("-1/({coeff}*cosh(phi)^{})", i + 1)
        })
        .collect();
    fn as_str(v: &[String]) -> Vec<&str> {
        v.iter().map(|s| s.as_str()).collect()
    }
    CatalogEntry {
        name: format!("paper-l2:{n}"),
        system: SystemDefinition {
            m: 1,
            n,
            a: exprs(&["1"]),
            p: diag_exprs(&as_str(&p_entries)),
            f: exprs(&as_str(&f_entries)),
            phase_mode: PhaseMode::Line,
        },
        known_projectors: Some(ProjectorPair {
            c_plus: diag_exprs(&as_str(&cplus)),
            c_minus: diag_exprs(&as_str(&cminus)),
        }),
        known_torus: Some(exprs(&as_str(&torus))),
    }
}
