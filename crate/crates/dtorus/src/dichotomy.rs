//! Semi-axis dichotomy projectors: transport along the flow,
//! numerical verification of the exponential estimates, and a
//! best-effort spectral estimator for systems where no closed-form
//! projectors are known.
//!
//! All norms here are the operator infinity norm (maximum absolute row
//! sum), so certificates from different runs are comparable.

use nalgebra::{DMatrix, DVector};

use crate::flow::{FlowError, FundamentalMatrixOracle};

/// Which semi-axis a projector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// A dichotomy projector at a base point, transported along the flow
/// by similarity with the matriciant.
#[derive(Debug, Clone)]
pub struct ProjectorField {
    pub side: Side,
    base: DMatrix<f64>,
    /// True when the projector came from the spectral estimator rather
    /// than from exact (catalog or config) data.
    pub estimated: bool,
}

/// Fitted exponential-decay certificate for one projector.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DichotomyCertificate {
    pub side: Side,
    /// Window length: the grid lives in [0, T] (plus) or [-T, 0] (minus).
    #[serde(rename = "T")]
    pub window: f64,
    /// Fitted decay rate, from least squares on log-norm vs |t - tau|.
    pub alpha: f64,
    /// Max ratio of observed norm to the fitted exponential, clamped >= 1.
    #[serde(rename = "K")]
    pub k: f64,
    /// Max relative excess of the observed norms over the regression
    /// line `K_fit e^(-alpha |t-tau|)`.
    #[serde(rename = "maxViolation")]
    pub max_violation: f64,
    /// Number of (t, tau) pairs that entered the fit.
    pub pairs: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum DichotomyError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("projector is not idempotent at the base point (defect {defect:.3e})")]
    NotIdempotent { defect: f64 },
    #[error("non-finite norm at (t, tau) = ({t}, {tau}); projector mismatched to system?")]
    NonFiniteNorm { t: f64, tau: f64 },
    #[error("no decay detected (fitted rate {alpha:.3e} <= 0); projector mismatched to system?")]
    NoDecay { alpha: f64 },
    #[error(
        "ambiguous spectral gap: singular values {above:.3e} and {below:.3e} straddle 1 \
         with ratio {ratio:.2} < 10; refusing to split subspaces"
    )]
    AmbiguousGap { above: f64, below: f64, ratio: f64 },
    #[error("too few usable (t, tau) pairs for the fit ({0})")]
    TooFewPairs(usize),
}

/// Operator infinity norm (max absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl ProjectorField {
    pub fn new(side: Side, base: DMatrix<f64>, estimated: bool) -> Result<Self, DichotomyError> {
        // loose enough to accept projectors transported numerically
        // along the flow, tight enough to reject genuine non-idempotents
        let defect = inf_norm(&(&base * &base - &base));
        if defect > 1e-8 {
            return Err(DichotomyError::NotIdempotent { defect });
        }
        Ok(ProjectorField {
            side,
            base,
            estimated,
        })
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    /// Transport rule: `C(phi_tau(phi)) = Omega_0^tau C(phi) Omega_tau^0`.
    pub fn transport(
        &self,
        oracle: &FundamentalMatrixOracle,
        tau: f64,
    ) -> Result<DMatrix<f64>, FlowError> {
        Ok(oracle.omega_0t(tau)? * &self.base * oracle.omega_t0(tau)?)
    }
}

/// Sample the two dichotomy inequalities on a (t, tau) grid and fit the
/// decay constants.
///
/// For `side == Plus` the grid is `t, tau in [0, T]`, testing
/// `||Omega_0^t C Omega_tau^0||` for `t >= tau` and
/// `||Omega_0^t (I - C) Omega_tau^0||` for `tau >= t`; the minus side
/// mirrors this on `[-T, 0]`. Only pairs with `|t - tau| >= 1` enter
/// the least-squares fit, to keep transients near the diagonal out.
pub fn verify_dichotomy(
    field: &ProjectorField,
    oracle: &FundamentalMatrixOracle,
    window: f64,
    grid_step: f64,
) -> Result<DichotomyCertificate, DichotomyError> {
    assert!(window > 0.0 && grid_step > 0.0);
    let n = oracle.n();
    let eye = DMatrix::<f64>::identity(n, n);
    let c = field.base();
    let ic = &eye - c;

    let times: Vec<f64> = {
        let steps = (window / grid_step).round() as usize;
        (0..=steps)
            .map(|i| {
                let t = i as f64 * grid_step;
                match field.side {
                    Side::Plus => t,
                    Side::Minus => -t,
                }
            })
            .collect()
    };

    // (|t - tau|, log norm) samples for the joint fit
    let mut samples = Vec::new();
    for &t in &times {
        let w_t = oracle.omega_0t(t)?;
        for &tau in &times {
            let w_tau = oracle.omega_t0(tau)?;
            let (mat, sep) = if t >= tau {
                (&w_t * c * &w_tau, t - tau)
            } else {
                (&w_t * &ic * &w_tau, tau - t)
            };
            let norm = inf_norm(&mat);
            if !norm.is_finite() {
                return Err(DichotomyError::NonFiniteNorm { t, tau });
            }
            if norm > 1e-300 && sep >= 1.0 {
                samples.push((sep, norm.ln()));
            }
        }
    }
    if samples.len() < 2 {
        return Err(DichotomyError::TooFewPairs(samples.len()));
    }

    // least squares: ln norm ~ ln K_fit - alpha * sep
    let n_s = samples.len() as f64;
    let sx: f64 = samples.iter().map(|(x, _)| x).sum();
    let sy: f64 = samples.iter().map(|(_, y)| y).sum();
    let sxx: f64 = samples.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = samples.iter().map(|(x, y)| x * y).sum();
    let slope = (n_s * sxy - sx * sy) / (n_s * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n_s;
    let alpha = -slope;
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(DichotomyError::NoDecay { alpha });
    }
    let k_fit = intercept.exp();

    let mut k = 1.0f64;
    let mut max_violation = 0.0f64;
    for &(sep, ln_norm) in &samples {
        let norm = ln_norm.exp();
        k = k.max(norm * (alpha * sep).exp());
        let bound = k_fit * (-alpha * sep).exp();
        max_violation = max_violation.max((norm / bound - 1.0).max(0.0));
    }

    Ok(DichotomyCertificate {
        side: field.side,
        window,
        alpha,
        k,
        max_violation,
        pairs: samples.len(),
    })
}

/// Best-effort spectral estimate of the dichotomy projectors.
///
/// The forward-decaying subspace is spanned by the right singular
/// vectors of `Omega_0^T(phi)` with singular value below 1, and the
/// backward-growing subspace (the range of `C-`) by the right singular
/// vectors of `Omega_0^(-T)(phi)` with singular value above 1. This is
/// a heuristic, valid for systems with well-separated exponents; the
/// returned fields are flagged `estimated`. A split whose bracketing
/// singular values differ by less than a factor 10 is refused.
pub fn estimate_projectors(
    oracle: &FundamentalMatrixOracle,
    horizon: f64,
) -> Result<(ProjectorField, ProjectorField), DichotomyError> {
    let c_plus = decaying_subspace_projector(&oracle.omega_0t(horizon)?, true)?;
    let c_minus = decaying_subspace_projector(&oracle.omega_0t(-horizon)?, false)?;
    Ok((
        ProjectorField::new(Side::Plus, c_plus, true)?,
        ProjectorField::new(Side::Minus, c_minus, true)?,
    ))
}

/// Orthogonal projector onto the span of right singular vectors with
/// singular value < 1 (`keep_small`) or > 1 (`!keep_small`).
fn decaying_subspace_projector(
    omega: &DMatrix<f64>,
    keep_small: bool,
) -> Result<DMatrix<f64>, DichotomyError> {
    let n = omega.nrows();
    let (_, sigma, v) = crate::critical::jacobi_svd(omega); // descending
    let split = sigma.iter().position(|&s| s < 1.0).unwrap_or(n);
    if split > 0 && split < n {
        let above = sigma[split - 1];
        let below = sigma[split];
        let ratio = above / below;
        if ratio < 10.0 {
            return Err(DichotomyError::AmbiguousGap { above, below, ratio });
        }
    }
    let range = if keep_small { split..n } else { 0..split };
    let mut proj = DMatrix::<f64>::zeros(n, n);
    for i in range {
        let col = v.column(i);
        proj += col * col.transpose();
    }
    Ok(proj)
}

/// Convenience: evaluate a catalog/config projector pair at a base
/// point, falling back to the spectral estimator when no exact pair is
/// available.
pub fn resolve_projectors(
    known: Option<&crate::system::ProjectorPair>,
    oracle: &FundamentalMatrixOracle,
    phi: &DVector<f64>,
    estimate_horizon: f64,
) -> Result<(ProjectorField, ProjectorField), DichotomyError> {
    match known {
        Some(pair) => {
            let (cp, cm) = pair.eval(phi.as_slice());
            Ok((
                ProjectorField::new(Side::Plus, cp, false)?,
                ProjectorField::new(Side::Minus, cm, false)?,
            ))
        }
        None => estimate_projectors(oracle, estimate_horizon),
    }
}
