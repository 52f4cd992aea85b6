use faer::{c64, Mat};

use super::resolvent::propagate;
use super::system::MmSystem;
use super::{principal_on, MmOptions};
use crate::cell::UnitCell;
use crate::error::{Error, Result};
use crate::linalg::to_mat3;
use crate::tensor::Mat3;

/// Above this value of N(2N + 1)² the forward propagation of Ŝ loses
/// accuracy through the growth of M0.
const CONDITIONING_WARNING: usize = 250;

/// C^e_jl by forward propagation of (V̂, N̂) = M0(x_l) Ŝ and quadrature of
///
/// ```text
/// C^e_jl = ⟨E⁺(A1^(j) V̂ + C̄_jl B⁻¹(N̂ − A1 V̂))⟩_l
/// ```
///
/// where A1^(j) = 2πi(Ĉ_jb(g − g′) g′_b) and ∂_l V̂ = B⁻¹(N̂ − A1 V̂) is
/// recovered from the traction. With j = l the integrand is E⁺N̂, constant
/// in x_l, and the result is C_ll^eff.
pub fn direct_offdiagonal(cell: &UnitCell, j: usize, l: usize, n: usize, opts: &MmOptions) -> Result<Mat3> {
    if j > 2 {
        return Err(Error::InvalidArgument(format!("axis index {j} out of range")));
    }
    let sys = MmSystem::new(cell, l, n)?;
    if n * (2 * n + 1) * (2 * n + 1) > CONDITIONING_WARNING {
        log::warn!("direct off-diagonal path at N = {n} may be inaccurate; prefer the rotated runs");
    }
    let run = principal_on(&sys, opts)?;
    if j == l {
        return Ok(run.c);
    }
    let h = sys.half_side();
    let c = 3 * sys.center();
    let mut acc = Mat::<c64>::zeros(3, 3);
    propagate(&sys, &run.s, run.steps, |seg, k, xi, parts| {
        let v = xi.get(..h, ..);
        let t = xi.get(h.., ..);
        let grad_l = &parts.b_inv * (t - &parts.a1 * v);
        let aj = sys.gradient_coupling(&parts.table, j);
        let cjl = sys.convolution(&parts.table, j, l);
        let f = aj.get(c..c + 3, ..) * v + cjl.get(c..c + 3, ..) * &grad_l;
        let w = match k {
            0 => 1.0,
            k if k == seg.steps => 1.0,
            k if k % 2 == 1 => 4.0,
            _ => 2.0,
        } * seg.h()
            / 3.0;
        acc += f * faer::Scale(c64::new(w, 0.0));
        Ok(())
    })?;
    Ok(to_mat3(acc.as_ref()) * c64::new(sys.scale(), 0.0))
}
