//! Angular flow and fundamental matrix of the variational equation.
//!
//! Everything downstream needs two time-dependent objects per base
//! point phi: the angular trajectory `phi_t(phi)` and the matriciant
//! `Omega_tau_t(phi)` of `dx/dt = P(phi_t(phi)) x`. Both are produced
//! by an embedded Dormand-Prince 5(4) pair with its order-4 free
//! interpolant, so quadrature can ask for values at arbitrary times
//! without re-integration.
//!
//! `Omega_tau^0` is obtained from the adjoint equation
//! `dZ/dtau = -Z P(phi_tau(phi))`, never by inverting `Omega_0^tau`:
//! in dichotomous systems the matriciant is exponentially
//! ill-conditioned and inversion destroys accuracy.

use nalgebra::{DMatrix, DVector};

use crate::system::SystemDefinition;

/// Absolute and relative integration tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        // leaves headroom under the 1e-6 verification gates
        Tolerances {
            abs: 1e-10,
            rel: 1e-10,
        }
    }
}

/// Closed time interval containing 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Span {
    pub t_min: f64,
    pub t_max: f64,
}

impl Span {
    pub fn new(t0: f64, t1: f64) -> Span {
        Span {
            t_min: t0.min(t1).min(0.0),
            t_max: t0.max(t1).max(0.0),
        }
    }

    pub fn symmetric(t: f64) -> Span {
        Span::new(-t.abs(), t.abs())
    }

    fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * (1.0 + t.abs());
        t >= self.t_min - slack && t <= self.t_max + slack
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("integration produced a non-finite state at t = {t}")]
    Blowup { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("time {t} is outside the integrated span [{}, {}]", span.t_min, span.t_max)]
    OutOfSpan { t: f64, span: Span },
    #[error("tolerances must be positive")]
    BadTolerance,
}

// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// b - bhat (error estimator weights)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// weights of the order-4 interpolant
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const MAX_STEPS: usize = 5_000_000;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    // rcont1..rcont5, each of state dimension
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + th1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
    }
}

/// Dense-output solution on a span containing 0, integrated from the
/// initial state at t = 0 in both directions.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    y0: Vec<f64>,
    forward: Vec<Segment>,
    backward: Vec<Segment>,
    span: Span,
}

impl DenseSolution {
    pub fn span(&self) -> Span {
        self.span
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), FlowError> {
        if t == 0.0 || (self.forward.is_empty() && self.backward.is_empty()) {
            out.copy_from_slice(&self.y0);
            return Ok(());
        }
        if !self.span.contains(t) {
            return Err(FlowError::OutOfSpan { t, span: self.span });
        }
        let segs = if t > 0.0 { &self.forward } else { &self.backward };
        if segs.is_empty() {
            out.copy_from_slice(&self.y0);
            return Ok(());
        }
        // segments ordered by |t0|; locate the one containing t
        let idx = segs.partition_point(|s| (s.t0 + s.h).abs() < t.abs());
        let seg = segs.get(idx).unwrap_or_else(|| segs.last().unwrap());
        seg.eval_into(t, out);
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, FlowError> {
        let mut out = vec![0.0; self.y0.len()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

fn rms_error(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerances) -> f64 {
    let n = err.len() as f64;
    let mut sum = 0.0;
    for i in 0..err.len() {
        let sk = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sk;
        sum += e * e;
    }
    (sum / n).sqrt()
}

/// Integrate from `(0, y0)` to `t_end` with dense output.
fn integrate_one_direction<F>(
    rhs: &F,
    y0: &[f64],
    t_end: f64,
    tol: Tolerances,
) -> Result<Vec<Segment>, FlowError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let dir = t_end.signum();
    if t_end == 0.0 {
        return Ok(Vec::new());
    }
    let mut segments = Vec::new();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    rhs(t, &y, &mut k[0]);

    // crude initial step from the first derivative magnitude
    let mut h = {
        let d0 = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        let d1 = k[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let h0 = if d1 > 1e-10 { 0.01 * d0 / d1 } else { 1e-3 };
        dir * h0.min(t_end.abs()).min(0.1)
    };

    let mut ytmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    for _ in 0..MAX_STEPS {
        if (t - t_end) * dir >= 0.0 || (t_end - t).abs() < 1e-14 * (1.0 + t.abs()) {
            return Ok(segments);
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(FlowError::StepUnderflow { t });
        }

        // stages 2..7 (k[0] is FSAL from the previous step)
        for s in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s + 1);
            let _ = head;
            rhs(t + C[s] * h, &ytmp, &mut tail[0]);
        }
        // 5th-order solution is stage 7's argument (a7j == bj)
        y1.copy_from_slice(&ytmp);
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += E[j] * kj[i];
            }
            err[i] = h * acc;
        }
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::Blowup { t: t + h });
        }
        let errn = rms_error(&err, &y, &y1, tol);
        if errn <= 1.0 {
            // accept: build interpolation coefficients
            let ydiff: Vec<f64> = (0..dim).map(|i| y1[i] - y[i]).collect();
            let rcont3: Vec<f64> = (0..dim).map(|i| h * k[0][i] - ydiff[i]).collect();
            let rcont4: Vec<f64> = (0..dim)
                .map(|i| ydiff[i] - h * k[6][i] - rcont3[i])
                .collect();
            let rcont5: Vec<f64> = (0..dim)
                .map(|i| {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc += D[j] * kj[i];
                    }
                    h * acc
                })
                .collect();
            segments.push(Segment {
                t0: t,
                h,
                rcont: [y.clone(), ydiff, rcont3, rcont4, rcont5],
            });
            t += h;
            y.copy_from_slice(&y1);
            k.swap(0, 6); // FSAL
            let fac = if errn > 0.0 {
                (0.9 * errn.powf(-0.2)).clamp(0.2, 10.0)
            } else {
                10.0
            };
            h *= fac;
        } else {
            h *= (0.9 * errn.powf(-0.2)).max(0.1);
        }
    }
    Err(FlowError::StepUnderflow { t })
}

pub(crate) fn integrate_dense<F>(
    rhs: &F,
    y0: &[f64],
    span: Span,
    tol: Tolerances,
) -> Result<DenseSolution, FlowError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if tol.abs <= 0.0 || tol.rel <= 0.0 {
        return Err(FlowError::BadTolerance);
    }
    let forward = integrate_one_direction(rhs, y0, span.t_max, tol)?;
    let backward = integrate_one_direction(rhs, y0, span.t_min, tol)?;
    Ok(DenseSolution {
        y0: y0.to_vec(),
        forward,
        backward,
        span,
    })
}

/// Dense-output trajectory of the angular flow `phi_t(phi)`.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    base: DVector<f64>,
    dense: DenseSolution,
    pub tol: Tolerances,
}

impl FlowTrajectory {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn span(&self) -> Span {
        self.dense.span()
    }

    /// `phi_t(phi)`; exact base point at t = 0.
    pub fn phi_at(&self, t: f64) -> Result<DVector<f64>, FlowError> {
        Ok(DVector::from_vec(self.dense.eval(t)?))
    }

    fn phi_into(&self, t: f64, out: &mut [f64]) -> Result<(), FlowError> {
        self.dense.eval_into(t, out)
    }
}

/// Integrate the angular flow over `span`.
pub fn flow(
    sys: &SystemDefinition,
    phi: &DVector<f64>,
    span: Span,
    tol: Tolerances,
) -> Result<FlowTrajectory, FlowError> {
    let m = sys.m;
    let a = sys.a.clone();
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        for i in 0..m {
            dy[i] = a[i].eval_unchecked(y);
        }
    };
    let dense = integrate_dense(&rhs, phi.as_slice(), span, tol)?;
    Ok(FlowTrajectory {
        base: phi.clone(),
        dense,
        tol,
    })
}

/// Evaluator of the matriciant `Omega_tau^t(phi)` with dense output in
/// both time arguments. Immutable after construction; concurrent reads
/// are fine.
#[derive(Debug, Clone)]
pub struct FundamentalMatrixOracle {
    n: usize,
    trajectory: FlowTrajectory,
    /// `Omega_0^t(phi)` as a function of t.
    forward: DenseSolution,
    /// `Omega_t^0(phi)` from the adjoint equation, as a function of t.
    backward: DenseSolution,
    /// `(t, Omega_0^t)` cached every `ckpt_dt` for cheap consistency probes.
    checkpoints: Vec<(f64, DMatrix<f64>)>,
}

impl FundamentalMatrixOracle {
    /// Build the oracle for the variational equation along the flow of
    /// `phi`, valid on `span`. `ckpt_dt` controls checkpoint spacing
    /// (1.0 is the default used by the library front ends).
    pub fn new(
        sys: &SystemDefinition,
        phi: &DVector<f64>,
        span: Span,
        tol: Tolerances,
        ckpt_dt: f64,
    ) -> Result<FundamentalMatrixOracle, FlowError> {
        let trajectory = flow(sys, phi, span, tol)?;
        Self::along(sys, trajectory, ckpt_dt)
    }

    /// Build from an existing trajectory (shares its span).
    pub fn along(
        sys: &SystemDefinition,
        trajectory: FlowTrajectory,
        ckpt_dt: f64,
    ) -> Result<FundamentalMatrixOracle, FlowError> {
        let n = sys.n;
        let span = trajectory.span();
        let tol = trajectory.tol;
        let eye: Vec<f64> = DMatrix::<f64>::identity(n, n).as_slice().to_vec();

        let p_exprs = sys.p.clone();
        let traj = trajectory.clone();
        let m = sys.m;
        // dY/dt = P(phi_t) Y, column-major state
        let fwd_rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
            let mut phi_t = vec![0.0; m];
            if traj.phi_into(t, &mut phi_t).is_err() {
                dy.fill(f64::NAN);
                return;
            }
            let p = eval_p(&p_exprs, &phi_t, n);
            for col in 0..n {
                for row in 0..n {
                    let mut acc = 0.0;
                    for kk in 0..n {
                        acc += p[(row, kk)] * y[col * n + kk];
                    }
                    dy[col * n + row] = acc;
                }
            }
        };
        let forward = integrate_dense(&fwd_rhs, &eye, span, tol)?;

        let p_exprs = sys.p.clone();
        let traj = trajectory.clone();
        // dZ/dtau = -Z P(phi_tau), column-major state
        let bwd_rhs = move |t: f64, z: &[f64], dz: &mut [f64]| {
            let mut phi_t = vec![0.0; m];
            if traj.phi_into(t, &mut phi_t).is_err() {
                dz.fill(f64::NAN);
                return;
            }
            let p = eval_p(&p_exprs, &phi_t, n);
            for col in 0..n {
                for row in 0..n {
                    let mut acc = 0.0;
                    for kk in 0..n {
                        acc += z[kk * n + row] * p[(kk, col)];
                    }
                    dz[col * n + row] = -acc;
                }
            }
        };
        let backward = integrate_dense(&bwd_rhs, &eye, span, tol)?;

        let mut checkpoints = Vec::new();
        if ckpt_dt > 0.0 {
            let mut t = (span.t_min / ckpt_dt).ceil() * ckpt_dt;
            while t <= span.t_max + 1e-12 {
                let y = forward.eval(t)?;
                checkpoints.push((t, DMatrix::from_column_slice(n, n, &y)));
                t += ckpt_dt;
            }
        }

        Ok(FundamentalMatrixOracle {
            n,
            trajectory,
            forward,
            backward,
            checkpoints,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn span(&self) -> Span {
        self.trajectory.span()
    }

    pub fn trajectory(&self) -> &FlowTrajectory {
        &self.trajectory
    }

    pub fn checkpoints(&self) -> &[(f64, DMatrix<f64>)] {
        &self.checkpoints
    }

    /// `Omega_0^t(phi)`.
    pub fn omega_0t(&self, t: f64) -> Result<DMatrix<f64>, FlowError> {
        let y = self.forward.eval(t)?;
        Ok(DMatrix::from_column_slice(self.n, self.n, &y))
    }

    /// `Omega_t^0(phi)` via the adjoint solution (no matrix inversion).
    pub fn omega_t0(&self, t: f64) -> Result<DMatrix<f64>, FlowError> {
        let z = self.backward.eval(t)?;
        Ok(DMatrix::from_column_slice(self.n, self.n, &z))
    }

    /// `Omega_tau^t(phi) = Omega_0^t(phi) Omega_tau^0(phi)`.
    pub fn omega(&self, t: f64, tau: f64) -> Result<DMatrix<f64>, FlowError> {
        Ok(self.omega_0t(t)? * self.omega_t0(tau)?)
    }

    /// `f(phi_tau(phi))` for the system the oracle was built from.
    pub fn phi_at(&self, t: f64) -> Result<DVector<f64>, FlowError> {
        self.trajectory.phi_at(t)
    }
}

fn eval_p(p: &[Vec<crate::expr::Expression>], phi: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| p[i][j].eval_unchecked(phi))
}

/// Maximum defect of the cocycle identity
/// `Omega_tau^t Omega_s^tau = Omega_s^t` and the shift identity
/// `Omega_tau^t(phi_s(phi)) = Omega_{tau+s}^{t+s}(phi)` over the given
/// `(t, tau, s)` triples. The base oracle span must cover all shifted
/// times; an oracle at the shifted base point is built per sample.
pub fn cocycle_check(
    sys: &SystemDefinition,
    oracle: &FundamentalMatrixOracle,
    samples: &[(f64, f64, f64)],
    tol: Tolerances,
) -> Result<f64, FlowError> {
    let mut worst = 0.0f64;
    for &(t, tau, s) in samples {
        let lhs = oracle.omega(t, tau)? * oracle.omega(tau, s)?;
        let rhs = oracle.omega(t, s)?;
        worst = worst.max((lhs - &rhs).amax());

        let phi_s = oracle.phi_at(s)?;
        let shifted = FundamentalMatrixOracle::new(
            sys,
            &phi_s,
            Span::new(t.min(tau), t.max(tau)),
            tol,
            0.0,
        )?;
        let lhs2 = shifted.omega(t, tau)?;
        let rhs2 = oracle.omega(t + s, tau + s)?;
        worst = worst.max((lhs2 - rhs2).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::catalog;
    use std::collections::HashMap;

    fn paper_2d() -> crate::system::CatalogEntry {
        catalog("paper-2d", &HashMap::new()).unwrap()
    }

    #[test]
    fn affine_flow_is_exact() {
        let entry = paper_2d();
        let traj = flow(
            &entry.system,
            &DVector::from_vec(vec![0.5]),
            Span::new(0.0, 2.0),
            Tolerances::default(),
        )
        .unwrap();
        // a = 1: phi_t = 0.5 + t
        assert!((traj.phi_at(2.0).unwrap()[0] - 2.5).abs() < 1e-12);
        assert_eq!(traj.phi_at(0.0).unwrap()[0], 0.5);
    }

    #[test]
    fn constant_flow_is_fixed_point() {
        let sys = crate::system::SystemDefinition {
            m: 1,
            n: 1,
            a: vec![crate::expr::Expression::parse("0").unwrap()],
            p: vec![vec![crate::expr::Expression::parse("0").unwrap()]],
            f: vec![crate::expr::Expression::parse("0").unwrap()],
            phase_mode: crate::system::PhaseMode::Line,
        };
        let traj = flow(
            &sys,
            &DVector::from_vec(vec![1.3]),
            Span::new(-2.0, 2.0),
            Tolerances::default(),
        )
        .unwrap();
        for t in [-2.0, -0.7, 0.0, 1.1, 2.0] {
            assert!((traj.phi_at(t).unwrap()[0] - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_flow() {
        // a = phi: phi_t = e^t phi
        let sys = crate::system::SystemDefinition {
            m: 1,
            n: 1,
            a: vec![crate::expr::Expression::parse("phi").unwrap()],
            p: vec![vec![crate::expr::Expression::parse("0").unwrap()]],
            f: vec![crate::expr::Expression::parse("0").unwrap()],
            phase_mode: crate::system::PhaseMode::Line,
        };
        let traj = flow(
            &sys,
            &DVector::from_vec(vec![1.0]),
            Span::new(0.0, 1.0),
            Tolerances::default(),
        )
        .unwrap();
        assert!((traj.phi_at(1.0).unwrap()[0] - std::f64::consts::E).abs() < 1e-8);
    }

    #[test]
    fn group_property() {
        let entry = paper_2d();
        let phi0 = DVector::from_vec(vec![0.3]);
        let traj = flow(&entry.system, &phi0, Span::new(-4.0, 4.0), Tolerances::default()).unwrap();
        for (s, tau) in [(0.5, 1.0), (-1.0, 2.0), (1.5, -2.0)] {
            let phi_s = traj.phi_at(s).unwrap();
            let traj2 =
                flow(&entry.system, &phi_s, Span::new(-2.5, 2.5), Tolerances::default()).unwrap();
            let a = traj2.phi_at(tau).unwrap();
            let b = traj.phi_at(tau + s).unwrap();
            assert!((a - b).amax() <= 1e-8);
        }
    }

    /// Closed-form matriciant of paper-2d: diag(ch(phi+t)/ch(phi), ch(phi)/ch(phi+t)).
    fn omega_closed(phi: f64, t: f64, tau: f64) -> DMatrix<f64> {
        let d1 = (phi + t).cosh() / (phi + tau).cosh();
        DMatrix::from_diagonal(&DVector::from_vec(vec![d1, 1.0 / d1]))
    }

    #[test]
    fn omega_matches_closed_form() {
        let entry = paper_2d();
        let phi0 = DVector::from_vec(vec![0.0]);
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &phi0,
            Span::new(-3.0, 3.0),
            Tolerances::default(),
            1.0,
        )
        .unwrap();
        // diag(cosh(1), 1/cosh(1))
        let w = oracle.omega(1.0, 0.0).unwrap();
        assert!((w[(0, 0)] - 1.0f64.cosh()).abs() < 1e-7);
        assert!((w[(1, 1)] - 1.0 / 1.0f64.cosh()).abs() < 1e-7);
        assert!(w[(0, 1)].abs() < 1e-9 && w[(1, 0)].abs() < 1e-9);
        // t = tau gives the identity
        let w = oracle.omega(1.7, 1.7).unwrap();
        assert!((w - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        // cocycle vs closed form
        let lhs = oracle.omega(2.0, 1.0).unwrap() * oracle.omega(1.0, 0.0).unwrap();
        let rhs = oracle.omega(2.0, 0.0).unwrap();
        assert!((&lhs - &rhs).amax() < 1e-7);
        assert!((lhs - omega_closed(0.0, 2.0, 0.0)).amax() < 1e-7);
    }

    #[test]
    fn forward_backward_consistency() {
        let entry = paper_2d();
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &DVector::from_vec(vec![0.4]),
            Span::new(-5.0, 5.0),
            Tolerances::default(),
            1.0,
        )
        .unwrap();
        for t in [-5.0, -2.3, -0.5, 0.9, 3.3, 5.0] {
            let prod = oracle.omega_0t(t).unwrap() * oracle.omega_t0(t).unwrap();
            assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-6, "t = {t}");
        }
    }

    #[test]
    fn checkpoints_are_consistent() {
        let entry = paper_2d();
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &DVector::from_vec(vec![0.0]),
            Span::new(-2.0, 2.0),
            Tolerances::default(),
            1.0,
        )
        .unwrap();
        assert!(!oracle.checkpoints().is_empty());
        for (t, m) in oracle.checkpoints() {
            // Omega_t^t = Omega_0^t * Omega_t^0 applied at checkpoints
            let prod = m * oracle.omega_t0(*t).unwrap();
            assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-8);
        }
    }

    #[test]
    fn cocycle_check_trivial_and_constant_p() {
        let entry = paper_2d();
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &DVector::from_vec(vec![0.0]),
            Span::new(-1.0, 1.0),
            Tolerances::default(),
            0.0,
        )
        .unwrap();
        let d = cocycle_check(&entry.system, &oracle, &[(0.0, 0.0, 0.0)], Tolerances::default())
            .unwrap();
        assert!(d <= 1e-12);

        // autonomous diag(-1, 2): Omega_tau^t = exp((t - tau) P)
        let sys = crate::system::SystemDefinition {
            m: 1,
            n: 2,
            a: vec![crate::expr::Expression::parse("1").unwrap()],
            p: vec![
                vec![
                    crate::expr::Expression::parse("-1").unwrap(),
                    crate::expr::Expression::parse("0").unwrap(),
                ],
                vec![
                    crate::expr::Expression::parse("0").unwrap(),
                    crate::expr::Expression::parse("2").unwrap(),
                ],
            ],
            f: vec![
                crate::expr::Expression::parse("0").unwrap(),
                crate::expr::Expression::parse("0").unwrap(),
            ],
            phase_mode: crate::system::PhaseMode::Line,
        };
        let oracle = FundamentalMatrixOracle::new(
            &sys,
            &DVector::from_vec(vec![0.0]),
            Span::new(-2.0, 2.0),
            Tolerances::default(),
            0.0,
        )
        .unwrap();
        for (t, tau) in [(1.5, -0.5), (-1.0, 2.0), (0.3, 0.9)] {
            let w = oracle.omega(t, tau).unwrap();
            let exact = DMatrix::from_diagonal(&DVector::from_vec(vec![
                (-(t - tau)).exp(),
                (2.0 * (t - tau)).exp(),
            ]));
            assert!((w - exact).amax() <= 1e-7, "t={t} tau={tau}");
        }
    }

    #[test]
    fn out_of_span_is_an_error() {
        let entry = paper_2d();
        let traj = flow(
            &entry.system,
            &DVector::from_vec(vec![0.0]),
            Span::new(0.0, 1.0),
            Tolerances::default(),
        )
        .unwrap();
        assert!(matches!(traj.phi_at(5.0), Err(FlowError::OutOfSpan { .. })));
    }

    #[test]
    fn blowup_reports_time() {
        // dphi/dt = phi^2 from 1 blows up at t = 1
        let sys = crate::system::SystemDefinition {
            m: 1,
            n: 1,
            a: vec![crate::expr::Expression::parse("phi^2").unwrap()],
            p: vec![vec![crate::expr::Expression::parse("0").unwrap()]],
            f: vec![crate::expr::Expression::parse("0").unwrap()],
            phase_mode: crate::system::PhaseMode::Line,
        };
        let r = flow(
            &sys,
            &DVector::from_vec(vec![1.0]),
            Span::new(0.0, 2.0),
            Tolerances::default(),
        );
        assert!(matches!(
            r,
            Err(FlowError::Blowup { .. }) | Err(FlowError::StepUnderflow { .. })
        ));
    }
}
