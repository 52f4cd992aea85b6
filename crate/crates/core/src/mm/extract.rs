use faer::{c64, Mat, Scale};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, lu_solve, pinv_solve_rank_deficient, to_mat3, CMat};
use crate::tensor::Mat3;

/// Tolerance on ‖TW‖ and ‖W̃⁺T‖ relative to ‖T‖.
pub const PRUNING_TOL: f64 = 1e-6;
/// Skew part of C_ll^eff accepted and discarded.
pub const HERMITIAN_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Extraction {
    /// C_ll^eff, Hermitian.
    pub c: Mat3,
    /// Ŝ with its mean-displacement rows set to zero.
    pub s: CMat,
    pub pruning_residual: f64,
    pub skew: f64,
}

/// T = (1 − α)(I + (α − 1) R_α(1)).
pub fn t_matrix(r: &CMat, alpha: c64) -> CMat {
    let one = c64::new(1.0, 0.0);
    (identity(r.nrows()) + r * Scale(alpha - one)) * Scale(one - alpha)
}

/// Residuals ‖TW‖ and ‖W̃⁺T‖ relative to ‖T‖; both vanish in exact arithmetic.
pub fn pruning_residual(t: &CMat, center: usize) -> f64 {
    let h = t.nrows() / 2;
    let c = 3 * center;
    let tw = t.get(.., c..c + 3).norm_l2();
    let wt = t.get(h + c..h + c + 3, ..).norm_l2();
    tw.max(wt) / frobenius(t.as_ref()).max(f64::MIN_POSITIVE)
}

fn hermitize(c: Mat3) -> Result<(Mat3, f64)> {
    let skew = (c - c.adjoint()).norm() / (2.0 * c.norm().max(f64::MIN_POSITIVE));
    if skew > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            skew,
            tol: HERMITIAN_TOL,
        });
    }
    Ok(((c + c.adjoint()) * c64::new(0.5, 0.0), skew))
}

/// C_ll^eff = E⁺(T₂ − T₁T₃⁻¹T₄)⁻¹E from the pruned system T Ŝ = W.
///
/// The three displacement columns and three traction rows of the g = 0 block
/// are removed. With unknowns (Ŝ_u′, Ŝ_t) the displacement rows read
/// T₁Ŝ_u′ + T₂Ŝ_t = E and the remaining traction rows T₃Ŝ_u′ + T₄Ŝ_t = 0.
/// `steps` only labels the error when the pruning check fails.
pub fn extract_cll_eff(r: &CMat, alpha: c64, center: usize, steps: usize) -> Result<Extraction> {
    let t = t_matrix(r, alpha);
    let residual = pruning_residual(&t, center);
    if !(residual <= PRUNING_TOL) {
        return Err(Error::PruningResidual {
            residual,
            tol: PRUNING_TOL,
            steps,
        });
    }
    let h = t.nrows() / 2;
    let c = 3 * center;
    let keep_cols: Vec<usize> = (0..h).filter(|&i| i < c || i >= c + 3).collect();
    let keep_rows: Vec<usize> = (h..2 * h).filter(|&i| i < h + c || i >= h + c + 3).collect();
    let t1 = Mat::from_fn(h, h - 3, |i, j| t[(i, keep_cols[j])]);
    let t2 = t.get(..h, h..).to_owned();
    let t3 = Mat::from_fn(h - 3, h - 3, |i, j| t[(keep_rows[i], keep_cols[j])]);
    let t4 = Mat::from_fn(h - 3, h, |i, j| t[(keep_rows[i], h + j)]);

    let y = lu_solve(t3.as_ref(), t4.as_ref(), 1e-8).ok_or(Error::SingularSchur)?;
    let k = &t2 - &t1 * &y;
    let e = Mat::from_fn(h, 3, |i, j| {
        if i == c + j {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let s_t = lu_solve(k.as_ref(), e.as_ref(), 1e-8).ok_or(Error::SingularSchur)?;
    let s_u = -(&y * &s_t);

    let mut s = Mat::zeros(2 * h, 3);
    for (row, &col) in keep_cols.iter().enumerate() {
        for j in 0..3 {
            s[(col, j)] = s_u[(row, j)];
        }
    }
    for i in 0..h {
        for j in 0..3 {
            s[(h + i, j)] = s_t[(i, j)];
        }
    }
    let (c_eff, skew) = hermitize(to_mat3(s_t.get(c..c + 3, ..)))?;
    Ok(Extraction {
        c: c_eff,
        s,
        pruning_residual: residual,
        skew,
    })
}

/// Reference path: minimum-norm least-squares solution of the unpruned
/// system T Ŝ = W, whose three-dimensional null space is dropped, and
/// C_ll^eff = W̃⁺Ŝ.
pub fn extract_cll_eff_lstsq(r: &CMat, alpha: c64, center: usize) -> Mat3 {
    let t = t_matrix(r, alpha);
    let h = t.nrows() / 2;
    let c = 3 * center;
    let w = Mat::from_fn(2 * h, 3, |i, j| {
        if i == c + j {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let s = pinv_solve_rank_deficient(t.as_ref(), w.as_ref(), 3);
    to_mat3(s.get(h + c..h + c + 3, ..))
}
