//! Discrete/continuous Lyapunov solvers and the zero-input-penalty Riccati
//! equation.
//!
//! Conventions:
//! - `dlyap(F, M)` returns `P` with `F^T P F - P + M = 0`.
//! - `stationary_covariance(A, S)` returns `P` with `A P A^T - P + S = 0`.
//! - `clyap(H, S)` returns `Xi` with `H Xi + Xi H = S` for symmetric
//!   positive definite `H`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kron::kron;

pub const DLYAP_RESIDUAL_TOL: f64 = 1e-10;
pub const CLYAP_RESIDUAL_TOL: f64 = 1e-10;
pub const DARE_FIXED_POINT_TOL: f64 = 1e-12;
pub const DARE_MAX_ITERS: usize = 10_000;
pub const DARE_MIN_SINGULAR_B: f64 = 1e-8;

/// Solution of `F^T P F - P + M = 0` together with its Frobenius residual.
#[derive(Debug, Clone)]
pub struct DlyapSolution {
    pub p: DMatrix<f64>,
    pub residual: f64,
}

/// Positive definite solution of the zero-R discrete algebraic Riccati
/// equation, its gain, and the closed loop it induces.
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub closed_loop: DMatrix<f64>,
}

/// Maximum eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "spectral radius needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("non-finite entries in eigenproblem".into()));
    }
    let eigs = a.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Operator 2-norm via singular values.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values()[0]
}

/// Smallest singular value.
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    sv[sv.len() - 1]
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Dense-vectorization solve of `F^T P F - P + M = 0` for stable `F`.
pub fn dlyap(f: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DlyapSolution> {
    let n = f.nrows();
    if f.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "dlyap needs square F and M of equal size, got {}x{} and {}x{}",
            f.nrows(),
            f.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let rho = spectral_radius(f)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    // vec(F^T P F) = (F^T (x) F^T) vec(P)  =>  (I - F^T (x) F^T) vec(P) = vec(M)
    let ft = f.transpose();
    let sys = DMatrix::identity(n * n, n * n) - kron(&ft, &ft);
    let rhs = DVector::from_column_slice(m.as_slice());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular discrete Lyapunov system".into()))?;
    let p = symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice()));
    let residual = (f.transpose() * &p * f - &p + m).norm();
    let tol = DLYAP_RESIDUAL_TOL * m.norm().max(1.0);
    if residual > tol.max(1e-6 * p.norm()) {
        return Err(Error::Numerical(format!(
            "dlyap residual {residual:e} above tolerance"
        )));
    }
    Ok(DlyapSolution { p, residual })
}

/// Smith-doubling fast path for `dlyap`; validated against the direct solve.
///
/// Uses P = sum_k (F^k)^T M F^k and the doubling recurrence
/// `P <- P + G^T P G`, `G <- G^2`.
pub fn dlyap_smith(f: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DlyapSolution> {
    let rho = spectral_radius(f)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let mut p = symmetrize(m);
    let mut g = f.clone();
    for _ in 0..128 {
        let gt_p_g = g.transpose() * &p * &g;
        if gt_p_g.norm() <= 1e-16 * p.norm().max(1.0) {
            break;
        }
        p += gt_p_g;
        g = &g * &g;
    }
    let p = symmetrize(&p);
    let residual = (f.transpose() * &p * f - &p + m).norm();
    Ok(DlyapSolution { p, residual })
}

/// Stationary covariance of `x_{t+1} = A x_t + noise`, noise covariance `S`:
/// solves `A P A^T - P + S = 0`. Equals `dlyap(A^T, S)`.
pub fn stationary_covariance(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(dlyap(&a.transpose(), s)?.p)
}

/// Continuous Lyapunov equation `H Xi + Xi H = S` for symmetric `H` with all
/// eigenvalues strictly positive, solved in the eigenbasis of `H`.
pub fn clyap(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::Dimension(format!(
            "clyap needs square H and S of equal size, got {}x{} and {}x{}",
            h.nrows(),
            h.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let eig = symmetrize(h).symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::Spectrum(format!(
            "clyap needs positive definite H, min eigenvalue {min_eig:e}"
        )));
    }
    let v = &eig.eigenvectors;
    let s_tilde = v.transpose() * symmetrize(s) * v;
    let mut xi_tilde = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            xi_tilde[(i, j)] = s_tilde[(i, j)] / (eig.eigenvalues[i] + eig.eigenvalues[j]);
        }
    }
    let xi = symmetrize(&(v * xi_tilde * v.transpose()));
    let residual = (h * &xi + &xi * h - s).norm();
    if residual > CLYAP_RESIDUAL_TOL * s.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "clyap residual {residual:e} above tolerance"
        )));
    }
    Ok(xi)
}

/// Fixed-point Riccati recursion for `P = A^T P A - A^T P B (B^T P B)^{-1} B^T P A + Q`
/// with `Q` positive definite, starting at `P_0 = Q`.
///
/// Returns the gain `K = -(B^T P B)^{-1} B^T P A` and verifies `P >= Q` and
/// that the closed loop `A + B K` is stable.
pub fn dare_zero_r(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DareSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "dare_zero_r dims: A {}x{}, B {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if min_singular_value(b) < DARE_MIN_SINGULAR_B {
        return Err(Error::Rank(format!(
            "B is rank deficient: sigma_min {} < {DARE_MIN_SINGULAR_B}",
            min_singular_value(b)
        )));
    }

    let mut p = symmetrize(q);
    let mut last_delta = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERS {
        let pb = &p * b;
        let btpb = b.transpose() * &pb;
        let chol = btpb.clone().cholesky().ok_or_else(|| {
            Error::Rank("B^T P B singular during Riccati recursion".to_string())
        })?;
        let btpa = pb.transpose() * a;
        let gain_core = chol.solve(&btpa); // (B^T P B)^{-1} B^T P A
        let next = symmetrize(&(a.transpose() * &p * a - btpa.transpose() * &gain_core + q));
        last_delta = (&next - &p).norm();
        p = next;
        if last_delta <= DARE_FIXED_POINT_TOL {
            break;
        }
    }
    if last_delta > DARE_FIXED_POINT_TOL {
        return Err(Error::IterationLimit {
            iters: DARE_MAX_ITERS,
            residual: last_delta,
        });
    }

    let pb = &p * b;
    let btpb = b.transpose() * &pb;
    let chol = btpb
        .cholesky()
        .ok_or_else(|| Error::Rank("B^T P B singular at the fixed point".to_string()))?;
    let k = -chol.solve(&(pb.transpose() * a));
    let closed_loop = a + b * &k;

    let min_gap = (&p - q).symmetric_eigen().eigenvalues.min();
    if min_gap < -1e-8 * q.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "Riccati fixed point violates P >= Q by {min_gap:e}"
        )));
    }
    let rho_cl = spectral_radius(&closed_loop)?;
    if rho_cl >= 1.0 + 1e-10 {
        return Err(Error::Numerical(format!(
            "Riccati closed loop not stable: rho {rho_cl}"
        )));
    }
    Ok(DareSolution { p, k, closed_loop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamTag};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let half = randn(n, n, rng);
        &half * half.transpose()
    }

    fn random_stable(n: usize, target_rho: f64, rng: &mut impl Rng) -> DMatrix<f64> {
        let raw = randn(n, n, rng);
        let rho = spectral_radius(&raw).unwrap();
        raw * (target_rho / rho)
    }

    #[test]
    fn spectral_radius_cases() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.9]));
        assert_abs_diff_eq!(spectral_radius(&a).unwrap(), 0.9, epsilon = 1e-12);

        let nilpotent = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&nilpotent).unwrap(), 0.0, epsilon = 1e-12);

        let theta: f64 = 0.73;
        let rot = 0.7 * DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        assert_abs_diff_eq!(spectral_radius(&rot).unwrap(), 0.7, epsilon = 1e-9);
    }

    #[test]
    fn dlyap_scalar_geometric_series() {
        let f = DMatrix::from_element(1, 1, 0.5);
        let m = DMatrix::from_element(1, 1, 1.0);
        let sol = dlyap(&f, &m).unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dlyap_zero_f_returns_m() {
        let mut rng = stream_rng(21, 0, StreamTag::Oracle);
        let q = random_psd(4, &mut rng);
        let sol = dlyap(&DMatrix::zeros(4, 4), &q).unwrap();
        assert!((sol.p - q).norm() <= 1e-12);
    }

    #[test]
    fn dlyap_matches_truncated_series() {
        let mut rng = stream_rng(22, 0, StreamTag::Oracle);
        let f = random_stable(6, 0.8, &mut rng);
        let m = random_psd(6, &mut rng);
        let sol = dlyap(&f, &m).unwrap();

        let mut series = DMatrix::zeros(6, 6);
        let mut fk = DMatrix::identity(6, 6);
        for _ in 0..=200 {
            series += fk.transpose() * &m * &fk;
            fk = &fk * &f;
        }
        assert!(
            (&sol.p - &series).norm() <= 1e-8 * series.norm(),
            "direct vs series mismatch {}",
            (&sol.p - series).norm()
        );
    }

    #[test]
    fn dlyap_rejects_unstable() {
        let f = DMatrix::from_element(1, 1, 1.0);
        let m = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(dlyap(&f, &m), Err(Error::Unstable { .. })));
    }

    #[test]
    fn dlyap_smith_agrees_with_direct() {
        let mut rng = stream_rng(23, 0, StreamTag::Oracle);
        for n in [2usize, 5, 8] {
            let f = random_stable(n, 0.85, &mut rng);
            let m = random_psd(n, &mut rng);
            let direct = dlyap(&f, &m).unwrap().p;
            let smith = dlyap_smith(&f, &m).unwrap().p;
            assert!((direct.clone() - &smith).norm() <= 1e-9 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn dlyap_monotone_in_m() {
        let mut rng = stream_rng(24, 0, StreamTag::Oracle);
        for _ in 0..20 {
            let f = random_stable(4, 0.7, &mut rng);
            let m1 = random_psd(4, &mut rng);
            let extra = random_psd(4, &mut rng);
            let m2 = &m1 + &extra;
            let p1 = dlyap(&f, &m1).unwrap().p;
            let p2 = dlyap(&f, &m2).unwrap().p;
            let gap = (&p2 - &p1).symmetric_eigen().eigenvalues.min();
            assert!(gap >= -1e-9, "monotonicity violated: {gap}");
        }
    }

    #[test]
    fn dlyap_positive_semidefinite() {
        let mut rng = stream_rng(25, 0, StreamTag::Oracle);
        for _ in 0..20 {
            let f = random_stable(5, 0.9, &mut rng);
            let m = random_psd(5, &mut rng);
            let p = dlyap(&f, &m).unwrap().p;
            assert!(p.symmetric_eigen().eigenvalues.min() >= -1e-10);
        }
    }

    #[test]
    fn clyap_cases() {
        let xi = clyap(&DMatrix::identity(3, 3), &(2.0 * DMatrix::identity(3, 3))).unwrap();
        assert!((xi - DMatrix::identity(3, 3)).norm() <= 1e-12);

        let h = DMatrix::from_element(1, 1, 4.0);
        let s = DMatrix::from_element(1, 1, 3.0);
        assert_abs_diff_eq!(clyap(&h, &s).unwrap()[(0, 0)], 3.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn clyap_residual_on_random_spd() {
        let mut rng = stream_rng(26, 0, StreamTag::Oracle);
        let h = random_psd(5, &mut rng) + 0.5 * DMatrix::identity(5, 5);
        let g = randn(5, 1, &mut rng);
        let s = &g * g.transpose();
        let xi = clyap(&h, &s).unwrap();
        assert!((&h * &xi + &xi * &h - &s).norm() <= 1e-10 * s.norm().max(1.0));
        assert!(xi.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn clyap_rejects_indefinite() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.2]));
        let s = DMatrix::identity(2, 2);
        assert!(matches!(clyap(&h, &s), Err(Error::Spectrum(_))));
    }

    #[test]
    fn dare_zero_a_gives_q() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let sol = dare_zero_r(&DMatrix::zeros(3, 3), &b, &DMatrix::identity(3, 3)).unwrap();
        assert!((sol.p.clone() - DMatrix::identity(3, 3)).norm() <= 1e-12);
        assert!(sol.k.norm() <= 1e-12);
    }

    #[test]
    fn dare_contractive_norm_bound() {
        // Lemma bound ||P|| <= ||Q|| / (1 - ||A||^2) for contractive A.
        let mut rng = stream_rng(27, 0, StreamTag::Oracle);
        let raw = randn(4, 4, &mut rng);
        let a = raw.clone() * (0.6 / operator_norm(&raw));
        let b = DMatrix::identity(4, 4);
        let q = DMatrix::identity(4, 4);
        let sol = dare_zero_r(&a, &b, &q).unwrap();
        let res = (a.transpose() * &sol.p * &a
            - a.transpose() * &sol.p * &b
                * (b.transpose() * &sol.p * &b).try_inverse().unwrap()
                * b.transpose()
                * &sol.p
                * &a
            + &q
            - &sol.p)
            .norm();
        assert!(res <= 1e-8, "DARE residual {res}");
        assert!(operator_norm(&sol.p) <= 1.0 / (1.0 - 0.36) + 1e-8);
    }

    #[test]
    fn dare_rejects_rank_deficient_b() {
        let a = DMatrix::zeros(3, 3);
        let b = DMatrix::zeros(3, 2);
        assert!(matches!(
            dare_zero_r(&a, &b, &DMatrix::identity(3, 3)),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn stationary_covariance_scalar_and_zero() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let s = DMatrix::from_element(1, 1, 1.0);
        assert_abs_diff_eq!(
            stationary_covariance(&a, &s).unwrap()[(0, 0)],
            4.0 / 3.0,
            epsilon = 1e-12
        );

        let mut rng = stream_rng(28, 0, StreamTag::Oracle);
        let s = random_psd(3, &mut rng);
        let p = stationary_covariance(&DMatrix::zeros(3, 3), &s).unwrap();
        assert!((p - s).norm() <= 1e-12);
    }

    #[test]
    fn dlyap_matches_kron_oracle() {
        // Same linear system assembled independently entry by entry.
        let mut rng = stream_rng(29, 0, StreamTag::Oracle);
        for n in [2usize, 4, 8] {
            let f = random_stable(n, 0.8, &mut rng);
            let m = random_psd(n, &mut rng);
            let p = dlyap(&f, &m).unwrap().p;

            let mut sys = DMatrix::zeros(n * n, n * n);
            for c in 0..n {
                for r in 0..n {
                    let row = c * n + r;
                    for cc in 0..n {
                        for rr in 0..n {
                            let col = cc * n + rr;
                            // (F^T P F)_{r,c} = sum_{rr,cc} F_{rr,r} P_{rr,cc} F_{cc,c}
                            sys[(row, col)] -= f[(rr, r)] * f[(cc, c)];
                        }
                    }
                    sys[(row, row)] += 1.0;
                }
            }
            let rhs = DVector::from_column_slice(m.as_slice());
            let sol = sys.lu().solve(&rhs).unwrap();
            let p_oracle = DMatrix::from_column_slice(n, n, sol.as_slice());
            assert!((&p - &p_oracle).norm() <= 1e-9 * p_oracle.norm().max(1.0));
        }
    }
}
