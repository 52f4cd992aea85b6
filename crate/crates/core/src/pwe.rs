//! Plane-wave expansion of the quasistatic cell problem.
//!
//! With the 3D Fourier coefficients Ĉ_jl(g) of the cell and the index set
//! g ∈ [−N, N]³ \ {0} in lexicographic order,
//!
//! ```text
//! q_l(g)      = Σ_j g_j Ĉ_jl(g)
//! C0(g, g′)   = Σ_{j,l} g_j g′_l Ĉ_jl(g − g′)
//! C^e_jl      = Ĉ_jl(0) − q_j⁺ C0⁻¹ q_l
//! ```
//!
//! C0 is Hermitian positive definite for positive-definite stiffness fields
//! and is factored once by Cholesky.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use rayon::prelude::*;

use crate::cell::UnitCell;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::tensor::{BlockCjl, Mat3};

/// 3·11³, the nominal 3(2N + 1)³ at N = 5.
pub const DEFAULT_SIZE_CAP: usize = 3993;

#[derive(Clone, Debug)]
pub struct PweSystem {
    n: usize,
    index_set: Vec<[i64; 3]>,
    c0: CMat,
    q: [CMat; 3],
    mean: BlockCjl,
}

pub fn system_side(n: usize) -> usize {
    let s = 2 * n + 1;
    3 * (s * s * s - 1)
}

fn index_set(n: usize) -> Vec<[i64; 3]> {
    let h = n as i64;
    let mut out = Vec::with_capacity(system_side(n) / 3);
    for a in -h..=h {
        for b in -h..=h {
            for c in -h..=h {
                if [a, b, c] != [0, 0, 0] {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Σ_{j,l} u_j v_l C_jl.
fn contract2(c: &BlockCjl, u: [i64; 3], v: [i64; 3]) -> Mat3 {
    let mut m = Mat3::zeros();
    for j in 0..3 {
        if u[j] == 0 {
            continue;
        }
        for l in 0..3 {
            if v[l] != 0 {
                m += c[(j, l)] * c64::new((u[j] * v[l]) as f64, 0.0);
            }
        }
    }
    m
}

impl PweSystem {
    /// Assembles the truncated system with the default size cap.
    pub fn assemble(cell: &UnitCell, n: usize) -> Result<Self> {
        Self::assemble_with_cap(cell, n, DEFAULT_SIZE_CAP)
    }

    pub fn assemble_with_cap(cell: &UnitCell, n: usize, cap: usize) -> Result<Self> {
        let side = system_side(n);
        if side > cap {
            return Err(Error::PweTooLarge { side, cap });
        }
        let table = cell.fourier3d_table(2 * n as i64)?;
        let mean = table.coeff([0, 0, 0]).clone();
        let index_set = index_set(n);
        let m = index_set.len();

        let rows: Vec<Vec<Mat3>> = index_set
            .par_iter()
            .map(|&g| {
                index_set
                    .iter()
                    .map(|&gp| contract2(table.coeff([g[0] - gp[0], g[1] - gp[1], g[2] - gp[2]]), g, gp))
                    .collect()
            })
            .collect();
        let c0 = Mat::from_fn(3 * m, 3 * m, |r, c| rows[r / 3][c / 3][(r % 3, c % 3)]);

        let q = std::array::from_fn(|l| {
            Mat::from_fn(3 * m, 3, |r, k| {
                let g = index_set[r / 3];
                (0..3)
                    .map(|j| table.coeff(g)[(j, l)][(r % 3, k)] * c64::new(g[j] as f64, 0.0))
                    .sum()
            })
        });
        Ok(Self {
            n,
            index_set,
            c0,
            q,
            mean,
        })
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn index_set(&self) -> &[[i64; 3]] {
        &self.index_set
    }

    pub fn side(&self) -> usize {
        self.c0.nrows()
    }

    pub fn c0(&self) -> &CMat {
        &self.c0
    }

    pub fn q(&self, l: usize) -> &CMat {
        &self.q[l]
    }

    /// Ĉ(0) = ⟨C⟩.
    pub fn mean(&self) -> &BlockCjl {
        &self.mean
    }

    /// All nine C^e_jl from a single Cholesky factorization of C0.
    pub fn solve(&self) -> Result<BlockCjl> {
        let side = self.side();
        if side == 0 {
            return Ok(self.mean.clone());
        }
        let llt = self.c0.llt(Side::Lower).map_err(|e| match e {
            faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => Error::SingularPwe {
                pivot: index,
                size: side,
            },
        })?;
        let rhs = Mat::from_fn(side, 9, |r, c| self.q[c / 3][(r, c % 3)]);
        let x = llt.solve(&rhs);
        let mut corr = [[Mat3::zeros(); 3]; 3];
        for (j, row) in corr.iter_mut().enumerate() {
            let qh = self.q[j].adjoint();
            for (l, block) in row.iter_mut().enumerate() {
                let p = qh * x.get(.., 3 * l..3 * l + 3);
                *block = Mat3::from_fn(|i, k| p[(i, k)]);
            }
        }
        Ok(BlockCjl::from_fn(|j, l| self.mean[(j, l)] - corr[j][l]))
    }
}

/// C^e_jl at truncation N.
pub fn effective_blocks(cell: &UnitCell, n: usize) -> Result<BlockCjl> {
    PweSystem::assemble(cell, n)?.solve()
}
