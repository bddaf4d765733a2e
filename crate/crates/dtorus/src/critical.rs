//! The mismatch matrix `D(phi) = C+(phi) - (I - C-(phi))`, its
//! Moore-Penrose pseudoinverse, and the orthoprojectors onto kernel and
//! cokernel. The kernel/cokernel of D govern existence and multiplicity
//! of bounded solutions, so rank decisions are surfaced explicitly:
//! singular values below `rtol * sigma_max` are treated as zero and the
//! tolerance is carried in every report.

use nalgebra::{DMatrix, DVector};

use crate::flow::{FlowError, FundamentalMatrixOracle};

/// Default relative rank tolerance.
pub const DEFAULT_RTOL: f64 = 1e-10;

/// D, its (generalized) inverse and the kernel/cokernel projectors.
///
/// At a base point `d_plus` is the Moore-Penrose pseudoinverse and the
/// projectors are orthogonal (`moore_penrose == true`). Transporting by
/// a non-orthogonal matriciant preserves the generalized-inverse
/// identities but not symmetry, so transported data carries
/// `moore_penrose == false`.
#[derive(Debug, Clone)]
pub struct CriticalData {
    pub d: DMatrix<f64>,
    pub d_plus: DMatrix<f64>,
    /// Projector onto ker D: `I - D+ D`.
    pub p_nd: DMatrix<f64>,
    /// Projector onto ker D*: `I - D D+`.
    pub p_ndstar: DMatrix<f64>,
    pub rank: usize,
    /// Singular values of `d`, descending.
    pub singular_values: DVector<f64>,
    pub rtol: f64,
    /// Whether `d_plus` is the Moore-Penrose pseudoinverse (true at
    /// base points) or merely a generalized inverse (after transport).
    pub moore_penrose: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CriticalError {
    #[error("shape mismatch: C+ is {0}x{1}, C- is {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("SVD failed: input contains non-finite entries")]
    NonFinite,
    #[error("rank tolerance must lie in (0, 1), got {0}")]
    BadRtol(f64),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// `D = C+ - (I - C-)`.
pub fn build_d(c_plus: &DMatrix<f64>, c_minus: &DMatrix<f64>) -> Result<DMatrix<f64>, CriticalError> {
    if c_plus.shape() != c_minus.shape() || c_plus.nrows() != c_plus.ncols() {
        return Err(CriticalError::ShapeMismatch(
            c_plus.nrows(),
            c_plus.ncols(),
            c_minus.nrows(),
            c_minus.ncols(),
        ));
    }
    let n = c_plus.nrows();
    Ok(c_plus - (DMatrix::<f64>::identity(n, n) - c_minus))
}

/// One-sided Jacobi SVD: `a = U diag(sigma) V^T` with sigma descending.
///
/// Small and dense only, but accurate on exactly the inputs that matter
/// here (differences of idempotents, products of matriciants), where
/// bidiagonalization-based routines can lose whole singular values.
/// Columns of `U` belonging to zero singular values are zero.
pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    app += w[(i, p)] * w[(i, p)];
                    aqq += w[(i, q)] * w[(i, q)];
                    apq += w[(i, p)] * w[(i, q)];
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut v_sorted = DMatrix::<f64>::zeros(n, n);
    let mut sigma = DVector::<f64>::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        v_sorted.set_column(k, &v.column(j));
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
    }
    (u, sigma, v_sorted)
}

/// SVD-based pseudoinverse with relative rank tolerance.
pub fn pinv(d: &DMatrix<f64>, rtol: f64) -> Result<CriticalData, CriticalError> {
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(CriticalError::BadRtol(rtol));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(CriticalError::NonFinite);
    }
    let (u, sigma, v) = jacobi_svd(d);
    let cutoff = rtol * sigma.max();
    let mut sigma_inv = sigma.clone();
    let mut rank = 0;
    for i in 0..sigma.len() {
        if sigma[i] > cutoff {
            sigma_inv[i] = 1.0 / sigma[i];
            rank += 1;
        } else {
            sigma_inv[i] = 0.0;
        }
    }
    let d_plus = v * DMatrix::from_diagonal(&sigma_inv) * u.transpose();
    let p_nd = DMatrix::<f64>::identity(d.ncols(), d.ncols()) - &d_plus * d;
    let p_ndstar = DMatrix::<f64>::identity(d.nrows(), d.nrows()) - d * &d_plus;
    Ok(CriticalData {
        d: d.clone(),
        d_plus,
        p_nd,
        p_ndstar,
        rank,
        singular_values: sigma.clone(),
        rtol,
        moore_penrose: true,
    })
}

/// Critical data at a base point, from the two projectors.
pub fn critical_data(
    c_plus: &DMatrix<f64>,
    c_minus: &DMatrix<f64>,
    rtol: f64,
) -> Result<CriticalData, CriticalError> {
    pinv(&build_d(c_plus, c_minus)?, rtol)
}

/// Transport the critical data along the flow:
/// `D(phi_t) = Omega_0^t D Omega_t^0` and the same conjugation for the
/// inverse and both projectors. The transported inverse satisfies the
/// generalized-inverse identities but is generally not Moore-Penrose.
pub fn transport_critical(
    cd: &CriticalData,
    oracle: &FundamentalMatrixOracle,
    t: f64,
) -> Result<CriticalData, CriticalError> {
    let fwd = oracle.omega_0t(t)?;
    let bwd = oracle.omega_t0(t)?;
    let conj = |m: &DMatrix<f64>| &fwd * m * &bwd;
    let d = conj(&cd.d);
    let sv = jacobi_svd(&d).1;
    Ok(CriticalData {
        d_plus: conj(&cd.d_plus),
        p_nd: conj(&cd.p_nd),
        p_ndstar: conj(&cd.p_ndstar),
        d,
        rank: cd.rank,
        singular_values: sv,
        rtol: cd.rtol,
        moore_penrose: t == 0.0 && cd.moore_penrose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::inf_norm;
    use crate::flow::{Span, Tolerances};
    use crate::system::catalog;
    use std::collections::HashMap;

    fn diag(vals: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vals.to_vec()))
    }

    #[test]
    fn build_d_examples() {
        // paper-2d projectors give D = 0
        let d = build_d(&diag(&[0.0, 1.0]), &diag(&[1.0, 0.0])).unwrap();
        assert_eq!(d.amax(), 0.0);
        // C+ = C- = I gives D = I
        let d = build_d(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(d, DMatrix::identity(2, 2));
        // C+ = C- = diag(1, 0) gives D = diag(1, -1)
        let d = build_d(&diag(&[1.0, 0.0]), &diag(&[1.0, 0.0])).unwrap();
        assert_eq!(d, diag(&[1.0, -1.0]));
        // shape mismatch
        assert!(matches!(
            build_d(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 3)),
            Err(CriticalError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn pinv_zero_matrix() {
        let cd = pinv(&DMatrix::zeros(2, 2), DEFAULT_RTOL).unwrap();
        assert_eq!(cd.rank, 0);
        assert_eq!(cd.d_plus.amax(), 0.0);
        assert_eq!(cd.p_nd, DMatrix::identity(2, 2));
        assert_eq!(cd.p_ndstar, DMatrix::identity(2, 2));
    }

    #[test]
    fn pinv_diagonal() {
        let cd = pinv(&diag(&[2.0, 0.0]), DEFAULT_RTOL).unwrap();
        assert_eq!(cd.rank, 1);
        assert!((cd.d_plus[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(cd.d_plus[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn penrose_conditions_random_rank2() {
        // random 3x3 of rank 2: all four Penrose conditions
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
            let d = a * b;
            let cd = pinv(&d, DEFAULT_RTOL).unwrap();
            assert_eq!(cd.rank, 2);
            let dp = &cd.d_plus;
            assert!(inf_norm(&(&d * dp * &d - &d)) <= 1e-10);
            assert!(inf_norm(&(dp * &d * dp - dp)) <= 1e-10);
            assert!(inf_norm(&((&d * dp).transpose() - &d * dp)) <= 1e-10);
            assert!(inf_norm(&((dp * &d).transpose() - dp * &d)) <= 1e-10);
        }
    }

    #[test]
    fn projectors_symmetric_idempotent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let cd = pinv(&d, DEFAULT_RTOL).unwrap();
        for p in [&cd.p_nd, &cd.p_ndstar] {
            assert!(inf_norm(&(p * p - p)) <= 1e-10);
            assert!(inf_norm(&(p.transpose() - p)) <= 1e-10);
        }
    }

    #[test]
    fn transport_preserves_generalized_identities() {
        let entry = catalog("paper-2d", &HashMap::new()).unwrap();
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            &DVector::from_vec(vec![0.0]),
            Span::symmetric(3.0),
            Tolerances::default(),
            0.0,
        )
        .unwrap();
        // synthetic non-zero D
        let cd = pinv(&diag(&[1.0, 0.0]), DEFAULT_RTOL).unwrap();
        for t in [-2.0, -0.5, 1.0, 3.0] {
            let tc = transport_critical(&cd, &oracle, t).unwrap();
            assert!(inf_norm(&(&tc.d * &tc.d_plus * &tc.d - &tc.d)) <= 1e-6);
            assert!(inf_norm(&(&tc.d_plus * &tc.d * &tc.d_plus - &tc.d_plus)) <= 1e-6);
            // transported P_ND equals I - D+ D computed from transported parts
            let eye = DMatrix::<f64>::identity(2, 2);
            assert!(inf_norm(&(&tc.p_nd - (&eye - &tc.d_plus * &tc.d))) <= 1e-6);
            assert!(!tc.moore_penrose || t == 0.0);
        }
        // diagonal D commutes with the diagonal matriciant
        let tc = transport_critical(&cd, &oracle, 1.0).unwrap();
        assert!((&tc.d - diag(&[1.0, 0.0])).amax() <= 1e-7);
        // t = 0 is unchanged
        let tc = transport_critical(&cd, &oracle, 0.0).unwrap();
        assert!((&tc.d - &cd.d).amax() <= 1e-12);
        assert!(tc.moore_penrose);
        // D = 0 stays zero and its projectors stay I
        let cd0 = pinv(&DMatrix::zeros(2, 2), DEFAULT_RTOL).unwrap();
        let tc0 = transport_critical(&cd0, &oracle, 2.0).unwrap();
        assert_eq!(tc0.d.amax(), 0.0);
        assert!((&tc0.p_nd - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-6);
    }

    #[test]
    fn base_point_identities() {
        // P_ND* C+ = P_ND* (I - C-) and [C+ - (I - C-)] D+ = I - P_ND*
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 3;
            // idempotents V diag(0/1) V^-1 with well-conditioned V
            let mut v = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
                + DMatrix::<f64>::identity(n, n) * 2.0;
            while v.clone().try_inverse().is_none() {
                v = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
                    + DMatrix::<f64>::identity(n, n) * 2.0;
            }
            let vinv = v.clone().try_inverse().unwrap();
            let mk = |mask: [f64; 3]| &v * diag(&mask) * &vinv;
            let c_plus = mk([rng.gen_range(0..2) as f64, rng.gen_range(0..2) as f64, 1.0]);
            let c_minus = mk([rng.gen_range(0..2) as f64, 0.0, rng.gen_range(0..2) as f64]);
            let cd = critical_data(&c_plus, &c_minus, DEFAULT_RTOL).unwrap();
            let eye = DMatrix::<f64>::identity(n, n);
            let lhs = &cd.p_ndstar * &c_plus;
            let rhs = &cd.p_ndstar * (&eye - &c_minus);
            assert!(inf_norm(&(lhs - rhs)) <= 1e-8);
            let lhs = &cd.d * &cd.d_plus;
            let rhs = &eye - &cd.p_ndstar;
            assert!(inf_norm(&(lhs - rhs)) <= 1e-10);
        }
    }
}
