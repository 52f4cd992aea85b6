//! Dense complex helpers over faer shared by the solvers.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, MatRef, Scale, Side};

use crate::tensor::Mat3;

pub type CMat = Mat<c64>;

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

/// Maximum absolute row sum.
pub fn norm_inf(m: MatRef<'_, c64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn adjoint(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

/// ‖M − M⁺‖_F / (2‖M‖_F).
pub fn hermitian_skew(m: MatRef<'_, c64>) -> f64 {
    let scale = frobenius(m).max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm_l2() / (2.0 * scale)
}

/// Inverse of a Hermitian positive-definite matrix; on failure returns the
/// index of the first non-positive pivot.
pub fn hpd_inverse(m: MatRef<'_, c64>) -> std::result::Result<CMat, usize> {
    match m.llt(Side::Lower) {
        Ok(f) => Ok(f.inverse()),
        Err(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => Err(index),
    }
}

/// Solves M X = rhs by partially pivoted LU. Returns `None` if the result is
/// not finite or the relative residual exceeds `tol`.
pub fn lu_solve(m: MatRef<'_, c64>, rhs: MatRef<'_, c64>, tol: f64) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(Mat::zeros(0, rhs.ncols()));
    }
    let x = m.partial_piv_lu().solve(rhs);
    if !is_finite(x.as_ref()) {
        return None;
    }
    let resid = (m * &x - rhs).norm_l2();
    let scale = m.norm_l2() * x.norm_l2() + rhs.norm_l2();
    (resid <= tol * scale.max(f64::MIN_POSITIVE)).then_some(x)
}

pub fn is_finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Minimum-norm least-squares solution via the SVD, discarding singular
/// values below `rcond · σ_max`.
pub fn pinv_solve(m: MatRef<'_, c64>, rhs: MatRef<'_, c64>, rcond: f64) -> CMat {
    pinv_solve_with(m, rhs, |s, smax, _| s > rcond * smax)
}

/// As [`pinv_solve`] but treating the `drop` smallest singular values as zero.
pub fn pinv_solve_rank_deficient(m: MatRef<'_, c64>, rhs: MatRef<'_, c64>, drop: usize) -> CMat {
    let keep = m.nrows().min(m.ncols()).saturating_sub(drop);
    pinv_solve_with(m, rhs, |_, _, i| i < keep)
}

fn pinv_solve_with(m: MatRef<'_, c64>, rhs: MatRef<'_, c64>, keep: impl Fn(f64, f64, usize) -> bool) -> CMat {
    let svd = m.svd().expect("SVD converged");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let smax = (0..s.dim()).map(|i| s[i].re).fold(0.0, f64::max);
    let mut utb = u.adjoint() * rhs;
    // faer orders singular values non-increasingly.
    for i in 0..s.dim() {
        let si = s[i].re;
        let w = if si > 0.0 && keep(si, smax, i) { 1.0 / si } else { 0.0 };
        for j in 0..utb.ncols() {
            utb[(i, j)] *= w;
        }
    }
    v.get(.., ..s.dim()) * utb.get(..s.dim(), ..)
}

fn norm_one(m: MatRef<'_, c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Padé degrees with the 1-norm bound below which each reaches unit
/// roundoff (Higham 2005).
const PADE: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

fn real(x: f64) -> Scale<c64> {
    Scale(c64::new(x, 0.0))
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3 to 13.
pub fn expm(a: MatRef<'_, c64>) -> CMat {
    let n = a.nrows();
    let norm = norm_one(a);
    let a2 = a * a;
    let (u, v, squarings) = if let Some(&(m, _)) = PADE.iter().find(|(_, theta)| norm <= *theta) {
        let b = pade_coefficients(m);
        let mut u = identity(n) * real(b[1]);
        let mut v = identity(n) * real(b[0]);
        let mut p = identity(n);
        for k in 1..=m / 2 {
            p = &p * &a2;
            u += &p * real(b[2 * k + 1]);
            v += &p * real(b[2 * k]);
        }
        (a * &u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let f = 0.5f64.powi(s);
        let a = a * real(f);
        let a2 = &a2 * real(f * f);
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = pade_coefficients(13);
        let id = identity(n);
        let u_hi = &a6 * (&a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]));
        let u = &a * (u_hi + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + &id * real(b[1]));
        let v_hi = &a6 * (&a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]));
        let v = v_hi + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + &id * real(b[0]);
        (u, v, s)
    };
    let mut r = (&v - &u).partial_piv_lu().solve(&v + &u);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

pub fn to_mat3(m: MatRef<'_, c64>) -> Mat3 {
    Mat3::from_fn(|i, j| m[(i, j)])
}

pub fn from_mat3(m: &Mat3) -> CMat {
    Mat::from_fn(3, 3, |i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Mat::from_fn(n, n, |_, _| c64::new(next(), next()))
    }

    #[test]
    fn expm_of_commuting_sum() {
        let d = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(i as f64, 0.5)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let e = expm(d.as_ref());
        for i in 0..3 {
            let want = c64::new(i as f64, 0.5).exp();
            assert!((e[(i, i)] - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn expm_of_rotation_generator_across_pade_degrees() {
        for theta in [1e-3, 0.2, 0.9, 2.0, 5.0, 40.0] {
            let a = Mat::from_fn(2, 2, |i, j| c64::new([[0.0, theta], [-theta, 0.0]][i][j], 0.0));
            let e = expm(a.as_ref());
            let want = [[theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (e[(i, j)] - c64::new(want[i][j], 0.0)).norm() < 1e-13 * theta.max(1.0),
                        "θ = {theta}"
                    );
                }
            }
        }
    }

    #[test]
    fn expm_inverse() {
        let a = sample(6, 3) * Scale(c64::new(4.0, 0.0));
        let prod = expm(a.as_ref()) * expm((-&a).as_ref());
        assert!((prod - identity(6)).norm_l2() < 1e-11);
    }

    #[test]
    fn hpd_inverse_and_pivot() {
        let a = sample(5, 7);
        let h = &a * a.adjoint() + identity(5);
        let inv = hpd_inverse(h.as_ref()).unwrap();
        assert!((&h * &inv - identity(5)).norm_l2() < 1e-12);
        let mut bad = identity(4);
        bad[(2, 2)] = c64::new(-1.0, 0.0);
        assert_eq!(hpd_inverse(bad.as_ref()).unwrap_err(), 2);
    }

    #[test]
    fn pinv_matches_lu_on_regular_and_drops_nullspace() {
        let a = sample(5, 11);
        let b = sample(5, 12);
        let x1 = pinv_solve(a.as_ref(), b.as_ref(), 1e-14);
        let x2 = lu_solve(a.as_ref(), b.as_ref(), 1e-12).unwrap();
        assert!((x1 - x2).norm_l2() < 1e-10);

        let mut p = identity(3);
        p[(2, 2)] = c64::new(0.0, 0.0);
        let rhs = Mat::from_fn(3, 1, |i, _| c64::new(1.0 + i as f64, 0.0));
        let x = pinv_solve(p.as_ref(), rhs.as_ref(), 1e-12);
        assert!(x[(2, 0)].norm() == 0.0 && (x[(1, 0)] - c64::new(2.0, 0.0)).norm() < 1e-15);
        p[(2, 2)] = c64::new(1e-13, 0.0);
        let y = pinv_solve_rank_deficient(p.as_ref(), rhs.as_ref(), 1);
        assert!((&x - &y).norm_l2() < 1e-15);
    }

    #[test]
    fn skew_and_inf_norm() {
        let a = sample(4, 5);
        let h = &a + a.adjoint();
        assert!(hermitian_skew(h.as_ref()) < 1e-16);
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i * 2 + j) as f64, 0.0));
        assert_eq!(norm_inf(m.as_ref()), 5.0);
    }
}
