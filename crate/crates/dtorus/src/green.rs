//! Solvability conditions, the constants xi, and the generalized Green
//! operator.
//!
//! The improper integrals over the whole axis are truncated at a
//! horizon `T` and evaluated by composite Gauss-Legendre quadrature on
//! fixed-width panels. Every reported result carries an explicit
//! exponential tail bound `K e^(-alpha T) / alpha * sup|f|` derived
//! from the dichotomy constants, so truncation is honest.
//!
//! Integrands use the base-point-projector form exactly as printed in
//! the Green-operator formulas (`C Omega_tau^0(phi)` with projectors at
//! the base phi); the transported-projector form is exercised only by
//! cross-check tests.

use nalgebra::{DMatrix, DVector};

use crate::critical::CriticalData;
use crate::dichotomy::inf_norm;
use crate::flow::{FlowError, FundamentalMatrixOracle};
use crate::system::SystemDefinition;

/// Which of the two bounded-solution families is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    One,
    Two,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::One => write!(f, "one"),
            Variant::Two => write!(f, "two"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" | "1" => Ok(Variant::One),
            "two" | "2" => Ok(Variant::Two),
            other => Err(format!("unknown variant `{other}` (expected one|two)")),
        }
    }
}

/// Truncated-quadrature parameters plus the constants for the tail
/// bound.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct QuadratureScheme {
    /// Truncation horizon T > 0; integrals run over [-T, T].
    pub horizon: f64,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Panel width.
    pub panel_width: f64,
    /// Dichotomy constant K used in the tail bound.
    pub tail_k: f64,
    /// Dichotomy rate alpha used in the tail bound.
    pub tail_alpha: f64,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            horizon: 40.0,
            order: 7,
            panel_width: 0.25,
            tail_k: 1.0,
            tail_alpha: 1.0,
        }
    }
}

/// Default solvability tolerance: above quadrature noise at default
/// settings, below any genuine obstruction.
pub const DEFAULT_TOL_SOLV: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum GreenError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("quadrature produced a non-finite value near tau = {tau}")]
    NonFinite { tau: f64 },
    #[error(
        "oracle span [{span_min}, {span_max}] does not cover the quadrature range [{need_min}, {need_max}]"
    )]
    SpanInsufficient {
        span_min: f64,
        span_max: f64,
        need_min: f64,
        need_max: f64,
    },
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_n(x) and P_n'(x) via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

impl QuadratureScheme {
    /// Composite Gauss-Legendre integral of a vector-valued integrand.
    pub fn integrate<F>(&self, a: f64, b: f64, dim: usize, mut f: F) -> Result<DVector<f64>, GreenError>
    where
        F: FnMut(f64) -> Result<DVector<f64>, GreenError>,
    {
        if a == b {
            return Ok(DVector::zeros(dim));
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let panels = (((hi - lo) / self.panel_width).ceil() as usize).max(1);
        let width = (hi - lo) / panels as f64;
        let (nodes, weights) = gauss_legendre(self.order);
        let mut acc = DVector::zeros(dim);
        for p in 0..panels {
            let p_lo = lo + p as f64 * width;
            let mid = p_lo + 0.5 * width;
            let half = 0.5 * width;
            for (x, w) in nodes.iter().zip(&weights) {
                let tau = mid + half * x;
                let v = f(tau)?;
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(GreenError::NonFinite { tau });
                }
                acc += v * (w * half);
            }
        }
        Ok(acc * sign)
    }

    /// Exponential tail bound for truncating at the horizon.
    pub fn tail_bound(&self, f_sup: f64) -> f64 {
        self.tail_k * (-self.tail_alpha * self.horizon).exp() / self.tail_alpha * f_sup
    }
}

/// Result of evaluating the solvability condition at one base point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolvabilityReport {
    pub variant: Variant,
    /// Primary residual: the full-axis single-integral form
    /// (`P_ND* \int C- Omega f` for variant one, the `I - C-`
    /// counterpart for variant two).
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norms of the equivalent forms: the complementary
    /// full-axis integral and the mixed two-semi-axis form.
    pub cross_check_norms: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tail_bound: f64,
    pub tol_solv: f64,
    pub solvable: bool,
}

/// Degeneracy-condition norms `||C+ P_ND||` and `||(I - C-) P_ND||`
/// (the form in the main theorem), plus the complementary pair that
/// variant two suggests. All four are reported; the Green operator only
/// warns when the first pair is violated.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DegeneracyCheck {
    pub c_plus_pnd: f64,
    pub i_minus_c_minus_pnd: f64,
    pub i_minus_c_plus_pnd: f64,
    pub c_minus_pnd: f64,
}

impl DegeneracyCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.c_plus_pnd <= tol && self.i_minus_c_minus_pnd <= tol
    }
}

/// Evaluator of the solvability conditions and the Green operator at
/// one base point. Pure given the immutable oracle; evaluations at
/// distinct `(phi, t)` are independent.
pub struct GreenEvaluator<'a> {
    sys: &'a SystemDefinition,
    c_plus: DMatrix<f64>,
    c_minus: DMatrix<f64>,
    cd: &'a CriticalData,
    oracle: &'a FundamentalMatrixOracle,
    pub quad: QuadratureScheme,
    eye: DMatrix<f64>,
}

impl<'a> GreenEvaluator<'a> {
    pub fn new(
        sys: &'a SystemDefinition,
        c_plus: DMatrix<f64>,
        c_minus: DMatrix<f64>,
        cd: &'a CriticalData,
        oracle: &'a FundamentalMatrixOracle,
        quad: QuadratureScheme,
    ) -> Result<Self, GreenError> {
        let span = oracle.span();
        if span.t_min > -quad.horizon + 1e-9 || span.t_max < quad.horizon - 1e-9 {
            return Err(GreenError::SpanInsufficient {
                span_min: span.t_min,
                span_max: span.t_max,
                need_min: -quad.horizon,
                need_max: quad.horizon,
            });
        }
        let n = sys.n;
        Ok(GreenEvaluator {
            sys,
            c_plus,
            c_minus,
            cd,
            oracle,
            quad,
            eye: DMatrix::identity(n, n),
        })
    }

    /// `Omega_tau^0(phi) f(phi_tau(phi))`, the common integrand.
    fn integrand(&self, tau: f64) -> Result<DVector<f64>, GreenError> {
        let phi_tau = self.oracle.phi_at(tau)?;
        let f = self.sys.eval_f(phi_tau.as_slice());
        Ok(self.oracle.omega_t0(tau)? * f)
    }

    fn integral(&self, a: f64, b: f64) -> Result<DVector<f64>, GreenError> {
        self.quad.integrate(a, b, self.sys.n, |tau| self.integrand(tau))
    }

    /// Sup-norm estimate of f along the trajectory, for the tail bound.
    fn f_sup(&self) -> f64 {
        let t_max = self.quad.horizon;
        let samples = 201;
        let mut sup = 0.0f64;
        for i in 0..samples {
            let tau = -t_max + 2.0 * t_max * i as f64 / (samples - 1) as f64;
            if let Ok(phi_tau) = self.oracle.phi_at(tau) {
                sup = sup.max(self.sys.eval_f(phi_tau.as_slice()).amax());
            }
        }
        sup
    }

    /// The bracket `{ ... }` appearing in the xi formulas and the Green
    /// operator: two truncated semi-axis integrals with the variant's
    /// projector placement.
    pub fn bracket(&self, variant: Variant) -> Result<DVector<f64>, GreenError> {
        let t_h = self.quad.horizon;
        let i_neg = self.integral(-t_h, 0.0)?;
        let i_pos = self.integral(0.0, t_h)?;
        Ok(match variant {
            Variant::One => &self.c_minus * i_neg + (&self.eye - &self.c_plus) * i_pos,
            Variant::Two => (&self.eye - &self.c_minus) * i_neg + &self.c_plus * i_pos,
        })
    }

    /// Evaluate the solvability condition for the given variant.
    pub fn solvability(&self, variant: Variant, tol_solv: f64) -> Result<SolvabilityReport, GreenError> {
        let t_h = self.quad.horizon;
        let full = self.integral(-t_h, t_h)?;
        let p = &self.cd.p_ndstar;
        // full-axis single-integral forms
        let (primary, secondary) = match variant {
            Variant::One => (
                p * &self.c_minus * &full,
                p * (&self.eye - &self.c_plus) * &full,
            ),
            Variant::Two => (
                p * (&self.eye - &self.c_minus) * &full,
                p * &self.c_plus * &full,
            ),
        };
        // mixed two-semi-axis form
        let mixed = p * self.bracket(variant)?;
        let tail = self.quad.tail_bound(self.f_sup());
        let residual_norm = primary.amax();
        Ok(SolvabilityReport {
            variant,
            residual: primary.iter().copied().collect(),
            residual_norm,
            cross_check_norms: vec![secondary.amax(), mixed.amax()],
            horizon: t_h,
            tail_bound: tail,
            tol_solv,
            solvable: residual_norm <= tol_solv + tail,
        })
    }

    /// The constant `xi = D+ { bracket } + P_ND c`.
    pub fn xi(&self, variant: Variant, c: &DVector<f64>) -> Result<DVector<f64>, GreenError> {
        Ok(&self.cd.d_plus * self.bracket(variant)? + &self.cd.p_nd * c)
    }

    /// Degeneracy-condition norms (see [`DegeneracyCheck`]).
    pub fn degeneracy_check(&self) -> DegeneracyCheck {
        let pnd = &self.cd.p_nd;
        DegeneracyCheck {
            c_plus_pnd: inf_norm(&(&self.c_plus * pnd)),
            i_minus_c_minus_pnd: inf_norm(&((&self.eye - &self.c_minus) * pnd)),
            i_minus_c_plus_pnd: inf_norm(&((&self.eye - &self.c_plus) * pnd)),
            c_minus_pnd: inf_norm(&(&self.c_minus * pnd)),
        }
    }

    /// The generalized Green operator `(G_t(f))(phi)`.
    ///
    /// Both branches agree at t = 0; the t >= 0 branch is used there.
    pub fn green(&self, t: f64, variant: Variant) -> Result<DVector<f64>, GreenError> {
        let t_h = self.quad.horizon;
        let b = self.bracket(variant)?;
        let dp = &self.cd.d_plus;
        let v = if t >= 0.0 {
            let head = self.integral(0.0, t)?;
            let tail = self.integral(t, t_h)?;
            match variant {
                Variant::One => {
                    &self.c_plus * head - (&self.eye - &self.c_plus) * tail
                        + &self.c_plus * dp * b
                }
                Variant::Two => {
                    (&self.eye - &self.c_plus) * head - &self.c_plus * tail
                        + &self.c_plus * dp * b
                }
            }
        } else {
            let head = self.integral(-t_h, t)?;
            let tail = self.integral(t, 0.0)?;
            match variant {
                Variant::One => {
                    &self.c_minus * head - (&self.eye - &self.c_minus) * tail
                        + (&self.c_plus * dp - &self.eye) * b
                }
                Variant::Two => {
                    (&self.eye - &self.c_minus) * head - &self.c_minus * tail
                        + ((&self.eye - &self.c_plus) * dp - &self.eye) * b
                }
            }
        };
        Ok(self.oracle.omega_0t(t)? * v)
    }

    /// Bounded solution with free constant: the Green evaluation plus
    /// the `C+ P_ND c` (t >= 0) or `(I - C-) P_ND c` (t < 0) term.
    /// When the degeneracy condition holds the free term vanishes and
    /// this reduces to [`Self::green`].
    pub fn bounded_solution(
        &self,
        t: f64,
        variant: Variant,
        c: &DVector<f64>,
    ) -> Result<DVector<f64>, GreenError> {
        let free = if t >= 0.0 {
            &self.c_plus * &self.cd.p_nd * c
        } else {
            (&self.eye - &self.c_minus) * &self.cd.p_nd * c
        };
        Ok(self.green(t, variant)? + self.oracle.omega_0t(t)? * free)
    }

    /// Tail bound for this evaluator's quadrature.
    pub fn tail_bound(&self) -> f64 {
        self.quad.tail_bound(self.f_sup())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{critical_data, DEFAULT_RTOL};
    use crate::flow::{Span, Tolerances};
    use crate::system::catalog;
    use std::collections::HashMap;

    #[test]
    fn gauss_legendre_exactness() {
        // order-g rule integrates polynomials up to degree 2g-1 exactly
        let (nodes, weights) = gauss_legendre(7);
        assert_eq!(nodes.len(), 7);
        let s: f64 = weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^12 over [-1, 1] = 2/13
        let v: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x.powi(12))
            .sum();
        assert!((v - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn composite_quadrature_sech() {
        // the obstruction is the integral of sech over the line, i.e. pi
        let quad = QuadratureScheme::default();
        let v = quad
            .integrate(-40.0, 40.0, 1, |t| {
                Ok(DVector::from_vec(vec![1.0 / t.cosh()]))
            })
            .unwrap();
        assert!((v[0] - std::f64::consts::PI).abs() < 1e-12);
    }

    struct Setup {
        entry: crate::system::CatalogEntry,
        oracle: FundamentalMatrixOracle,
        cd: CriticalData,
    }

    fn setup_2d(phi: f64, horizon: f64) -> Setup {
        let entry = catalog("paper-2d", &HashMap::new()).unwrap();
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &DVector::from_vec(vec![phi]),
            Span::symmetric(horizon),
            Tolerances::default(),
            1.0,
        )
        .unwrap();
        let (cp, cm) = entry.known_projectors.as_ref().unwrap().eval(&[phi]);
        let cd = critical_data(&cp, &cm, DEFAULT_RTOL).unwrap();
        Setup { entry, oracle, cd }
    }

    fn evaluator<'a>(s: &'a Setup, phi: f64, quad: QuadratureScheme) -> GreenEvaluator<'a> {
        let (cp, cm) = s.entry.known_projectors.as_ref().unwrap().eval(&[phi]);
        GreenEvaluator::new(&s.entry.system, cp, cm, &s.cd, &s.oracle, quad).unwrap()
    }

    #[test]
    fn solvability_paper_2d() {
        let quad = QuadratureScheme {
            horizon: 30.0,
            ..Default::default()
        };
        let s = setup_2d(0.0, 30.0);
        let ev = evaluator(&s, 0.0, quad);
        for variant in [Variant::One, Variant::Two] {
            let rep = ev.solvability(variant, DEFAULT_TOL_SOLV).unwrap();
            assert!(
                rep.residual_norm <= 1e-8 + rep.tail_bound,
                "{variant}: {}",
                rep.residual_norm
            );
            assert!(rep.solvable);
            for n in &rep.cross_check_norms {
                assert!((n - rep.residual_norm).abs() <= 1e-6 + rep.tail_bound);
            }
        }
    }

    #[test]
    fn solvability_zero_f() {
        let mut s = setup_2d(0.0, 30.0);
        // f = 0 makes every residual exactly zero
        s.entry.system.f = vec![
            crate::expr::Expression::parse("0").unwrap(),
            crate::expr::Expression::parse("0").unwrap(),
        ];
        let quad = QuadratureScheme {
            horizon: 30.0,
            ..Default::default()
        };
        let ev = evaluator(&s, 0.0, quad);
        let rep = ev.solvability(Variant::One, DEFAULT_TOL_SOLV).unwrap();
        assert_eq!(rep.residual_norm, 0.0);
        // and the Green evaluation is the zero vector for any t
        for t in [-2.0, 0.0, 1.5] {
            assert_eq!(ev.green(t, Variant::One).unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn solvability_obstruction_is_pi() {
        let mut s = setup_2d(0.0, 40.0);
        // f1 = 1: variant-one residual component 1 is the sech integral
        s.entry.system.f[0] = crate::expr::Expression::parse("1").unwrap();
        let ev = evaluator(&s, 0.0, QuadratureScheme::default());
        let rep = ev.solvability(Variant::One, DEFAULT_TOL_SOLV).unwrap();
        assert!((rep.residual[0] - std::f64::consts::PI).abs() <= 1e-4);
        assert!(!rep.solvable);
    }

    #[test]
    fn xi_paper_2d() {
        let s = setup_2d(0.0, 40.0);
        let ev = evaluator(&s, 0.0, QuadratureScheme::default());
        // D+ = 0 forces the integral term to vanish
        let xi = ev.xi(Variant::One, &DVector::zeros(2)).unwrap();
        assert!(xi.amax() <= 1e-12);
        // P_ND = I passes c through
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let xi = ev.xi(Variant::One, &e1).unwrap();
        assert!((xi - e1).amax() <= 1e-12);
    }

    #[test]
    fn xi_with_nonzero_d() {
        // synthetic n = 2 system with D = diag(1, 0): the first
        // component of xi equals the first component of the bracket
        let s = setup_2d(0.0, 40.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let cd = crate::critical::pinv(&d, DEFAULT_RTOL).unwrap();
        let (cp, cm) = s.entry.known_projectors.as_ref().unwrap().eval(&[0.0]);
        let ev = GreenEvaluator::new(
            &s.entry.system,
            cp,
            cm,
            &cd,
            &s.oracle,
            QuadratureScheme::default(),
        )
        .unwrap();
        let b = ev.bracket(Variant::One).unwrap();
        let xi = ev.xi(Variant::One, &DVector::zeros(2)).unwrap();
        assert!((xi[0] - b[0]).abs() <= 1e-12);
        assert!(xi[1].abs() <= 1e-12);
    }

    #[test]
    fn green_reproduces_torus_components() {
        let s = setup_2d(0.0, 40.0);
        let ev = evaluator(&s, 0.0, QuadratureScheme::default());
        // variant one, phi = 0, t = 0: first component -1/3
        let u = ev.green(0.0, Variant::One).unwrap();
        assert!((u[0] + 1.0 / 3.0).abs() <= 1e-6, "u = {u}");
        assert!(u[1].abs() <= 1e-6);
        // variant two, phi = 0, t = 0: second component -1/2
        let u = ev.green(0.0, Variant::Two).unwrap();
        assert!((u[1] + 0.5).abs() <= 1e-6, "u = {u}");
    }

    #[test]
    fn green_variant_two_at_phi_one() {
        let s = setup_2d(1.0, 40.0);
        let ev = evaluator(&s, 1.0, QuadratureScheme::default());
        let u = ev.green(0.0, Variant::Two).unwrap();
        // -1/(2 cosh(1)^3) = -0.1360830834560731
        assert!((u[1] + 0.1360830834560731).abs() <= 1e-6, "u = {u}");
    }

    #[test]
    fn branch_continuity_at_zero() {
        let s = setup_2d(0.3, 40.0);
        let ev = evaluator(&s, 0.3, QuadratureScheme::default());
        for variant in [Variant::One, Variant::Two] {
            let left = ev.green(-1e-9, variant).unwrap();
            let right = ev.green(1e-9, variant).unwrap();
            assert!((left - right).amax() <= 1e-6);
        }
    }

    #[test]
    fn bounded_solution_free_term() {
        let s = setup_2d(0.0, 40.0);
        let ev = evaluator(&s, 0.0, QuadratureScheme::default());
        // c = 0 equals green pointwise
        for t in [-1.0, 0.0, 2.0] {
            let a = ev.bounded_solution(t, Variant::One, &DVector::zeros(2)).unwrap();
            let b = ev.green(t, Variant::One).unwrap();
            assert!((a - b).amax() <= 1e-10);
        }
        // with P_ND = 0 (D invertible) the output is independent of c
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let cd = crate::critical::pinv(&d, DEFAULT_RTOL).unwrap();
        let (cp, cm) = s.entry.known_projectors.as_ref().unwrap().eval(&[0.0]);
        let ev2 = GreenEvaluator::new(
            &s.entry.system,
            cp,
            cm,
            &cd,
            &s.oracle,
            QuadratureScheme::default(),
        )
        .unwrap();
        let a = ev2
            .bounded_solution(0.5, Variant::One, &DVector::from_vec(vec![3.0, -4.0]))
            .unwrap();
        let b = ev2.bounded_solution(0.5, Variant::One, &DVector::zeros(2)).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn degeneracy_check_paper_2d() {
        let s = setup_2d(0.0, 40.0);
        let ev = evaluator(&s, 0.0, QuadratureScheme::default());
        let chk = ev.degeneracy_check();
        // D = 0 makes P_ND = I, so C+ P_ND = C+ and (I - C-) P_ND =
        // I - C- are both nonzero: the degeneracy condition fails and
        // bounded solutions exist for every slice, which is exactly why
        // the glued construction applies here.
        assert!((chk.c_plus_pnd - 1.0).abs() < 1e-12);
        assert!((chk.i_minus_c_minus_pnd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn span_insufficient_is_an_error() {
        let s = setup_2d(0.0, 5.0);
        let (cp, cm) = s.entry.known_projectors.as_ref().unwrap().eval(&[0.0]);
        let r = GreenEvaluator::new(
            &s.entry.system,
            cp,
            cm,
            &s.cd,
            &s.oracle,
            QuadratureScheme::default(),
        );
        assert!(matches!(r, Err(GreenError::SpanInsufficient { .. })));
    }

    #[test]
    fn truncation_convergence() {
        // doubling T changes the output by far less than the T = 20 tail bound
        let s = setup_2d(0.0, 40.0);
        let ev20 = evaluator(
            &s,
            0.0,
            QuadratureScheme {
                horizon: 20.0,
                ..Default::default()
            },
        );
        let ev40 = evaluator(&s, 0.0, QuadratureScheme::default());
        let u20 = ev20.green(0.0, Variant::One).unwrap();
        let u40 = ev40.green(0.0, Variant::One).unwrap();
        let tail20 = ev20.tail_bound();
        assert!((u20 - u40).amax() <= 10.0 * tail20);
        assert!(tail20 > 0.0);
    }
}
