use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::cell::{transverse_axes, SliceTable, UnitCell};
use crate::error::{Error, Result};
use crate::linalg::{hpd_inverse, CMat};
use crate::tensor::{BlockCjl, Mat3};

/// The truncated Fourier-space system along axis `l` of a cubic cell.
///
/// Transverse wavevectors g = (g_a, g_b), a < b, run row-major over
/// [−N, N]²; g = 0 sits at block position N(2N + 1) + N. Stiffness is held
/// divided by [`MmSystem::scale`] so that every block is of order one.
#[derive(Clone, Debug)]
pub struct MmSystem {
    cell: UnitCell,
    scale: f64,
    l: usize,
    axes: (usize, usize),
    n: usize,
    index_set: Vec<[i64; 2]>,
    breakpoints: Vec<f64>,
    piecewise_constant: bool,
}

/// B, A1, A2 and Q0 at one abscissa, plus the slice coefficients they came from.
#[derive(Clone, Debug)]
pub struct Q0Parts {
    pub b: CMat,
    pub b_inv: CMat,
    pub a1: CMat,
    pub a2: CMat,
    pub q0: CMat,
    pub table: SliceTable,
}

impl MmSystem {
    pub fn new(cell: &UnitCell, l: usize, n: usize) -> Result<Self> {
        cell.require_cubic()?;
        if l > 2 {
            return Err(Error::InvalidArgument(format!("axis index {l} out of range")));
        }
        let scale = cell.reference_modulus();
        let h = n as i64;
        let index_set = (-h..=h).flat_map(|a| (-h..=h).map(move |b| [a, b])).collect();
        Ok(Self {
            cell: cell.with_scaled_stiffness(1.0 / scale),
            scale,
            l,
            axes: transverse_axes(l),
            n,
            index_set,
            breakpoints: cell.breakpoints(l),
            piecewise_constant: cell.slices_piecewise_constant(),
        })
    }

    pub fn axis(&self) -> usize {
        self.l
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn index_set(&self) -> &[[i64; 2]] {
        &self.index_set
    }

    /// Block position of g = 0.
    pub fn center(&self) -> usize {
        self.n * (2 * self.n + 1) + self.n
    }

    /// 3(2N + 1)², the side of B, A1 and A2.
    pub fn half_side(&self) -> usize {
        3 * self.index_set.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Q0 is constant between breakpoints.
    pub fn piecewise_constant(&self) -> bool {
        self.piecewise_constant
    }

    pub fn cell(&self) -> &UnitCell {
        &self.cell
    }

    fn table(&self, x: f64) -> Result<SliceTable> {
        self.cell.slice_table(self.l, x, 2 * self.n as i64)
    }

    fn block_matrix(&self, f: impl Fn([i64; 2], [i64; 2]) -> Mat3) -> CMat {
        let m = self.index_set.len();
        let blocks: Vec<Mat3> = (0..m * m)
            .map(|p| f(self.index_set[p / m], self.index_set[p % m]))
            .collect();
        Mat::from_fn(3 * m, 3 * m, |r, c| blocks[(r / 3) * m + c / 3][(r % 3, c % 3)])
    }

    /// Embeds a transverse wavevector into 3D.
    fn lift(&self, g: [i64; 2]) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.axes.0] = g[0] as f64;
        v[self.axes.1] = g[1] as f64;
        v
    }

    /// (Ĉ_jl(g − g′, x))_{g,g′}.
    pub fn convolution(&self, table: &SliceTable, j: usize, l: usize) -> CMat {
        self.block_matrix(|g, gp| table.coeff([g[0] - gp[0], g[1] - gp[1]])[(j, l)])
    }

    /// 2πi (Σ_b Ĉ_jb(g − g′, x) g′_b)_{g,g′}; with j = l this is A1.
    pub fn gradient_coupling(&self, table: &SliceTable, j: usize) -> CMat {
        let (a, b) = self.axes;
        self.block_matrix(|g, gp| {
            let c = table.coeff([g[0] - gp[0], g[1] - gp[1]]);
            let v = self.lift(gp);
            (c[(j, a)] * c64::new(v[a], 0.0) + c[(j, b)] * c64::new(v[b], 0.0)) * c64::new(0.0, 2.0 * PI)
        })
    }

    fn a2(&self, table: &SliceTable) -> CMat {
        let (a, b) = self.axes;
        self.block_matrix(|g, gp| {
            let c: &BlockCjl = table.coeff([g[0] - gp[0], g[1] - gp[1]]);
            let (u, v) = (self.lift(g), self.lift(gp));
            let mut m = Mat3::zeros();
            for s in [a, b] {
                for t in [a, b] {
                    if u[s] != 0.0 && v[t] != 0.0 {
                        m += c[(s, t)] * c64::new(u[s] * v[t], 0.0);
                    }
                }
            }
            m * c64::new(4.0 * PI * PI, 0.0)
        })
    }

    /// Assembles B, A1, A2 and
    ///
    /// ```text
    /// Q0 = [ −B⁻¹A1            B⁻¹    ]
    ///      [ A2 − A1⁺B⁻¹A1     A1⁺B⁻¹ ]
    /// ```
    pub fn parts(&self, x: f64) -> Result<Q0Parts> {
        let table = self.table(x)?;
        let b = self.convolution(&table, self.l, self.l);
        let a1 = self.gradient_coupling(&table, self.l);
        let a2 = self.a2(&table);
        let b_inv = hpd_inverse(b.as_ref()).map_err(|pivot| {
            Error::NotPositiveDefinite(format!(
                "section stiffness B at x_{} = {x:.6} has a non-positive pivot at {pivot}",
                self.l + 1
            ))
        })?;
        let x_mat = &b_inv * &a1;
        let z = &a2 - a1.adjoint() * &x_mat;
        let h = b.nrows();
        let xh = x_mat.adjoint().to_owned();
        let q0 = Mat::from_fn(2 * h, 2 * h, |r, c| match (r < h, c < h) {
            (true, true) => -x_mat[(r, c)],
            (true, false) => b_inv[(r, c - h)],
            (false, true) => z[(r - h, c)],
            (false, false) => xh[(r - h, c - h)],
        });
        Ok(Q0Parts {
            b,
            b_inv,
            a1,
            a2,
            q0,
            table,
        })
    }

    pub fn q0(&self, x: f64) -> Result<CMat> {
        Ok(self.parts(x)?.q0)
    }
}

/// Q0 of a cell along axis `l` at truncation N and coordinate x, in the
/// stiffness units of the cell.
pub fn assemble_q0(cell: &UnitCell, l: usize, n: usize, x: f64) -> Result<CMat> {
    let sys = MmSystem::new(cell, l, n)?;
    let q = sys.q0(x)?;
    let h = sys.half_side();
    let s = sys.scale();
    // Undo the non-dimensionalization: B⁻¹ ∝ 1/s, A2 − A1⁺B⁻¹A1 ∝ s.
    Ok(Mat::from_fn(2 * h, 2 * h, |r, c| match (r < h, c < h) {
        (true, false) => q[(r, c)] / s,
        (false, true) => q[(r, c)] * s,
        _ => q[(r, c)],
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::testing::{cube_cell, epoxy, steel};
    use crate::cell::{Material, Shape};
    use crate::linalg::hermitian_skew;
    use nalgebra::Matrix3;

    #[test]
    fn layout() {
        let cell = cube_cell(0.125);
        let sys = MmSystem::new(&cell, 0, 2).unwrap();
        assert_eq!(sys.half_side(), 75);
        assert_eq!(sys.index_set()[sys.center()], [0, 0]);
        assert_eq!(sys.index_set()[0], [-2, -2]);
        assert_eq!(sys.index_set()[1], [-2, -1]);
    }

    #[test]
    fn homogeneous_zero_truncation() {
        let cell = UnitCell::homogeneous(steel());
        let q = assemble_q0(&cell, 0, 0, 0.3).unwrap();
        let c11 = steel().stiffness.block(0, 0);
        let inv = c11.try_inverse().unwrap();
        for r in 0..6 {
            for c in 0..6 {
                let want = if r < 3 && c >= 3 {
                    inv[(r, c - 3)]
                } else {
                    c64::new(0.0, 0.0)
                };
                assert!((q[(r, c)] - want).norm() <= 1e-12 * inv.norm(), "({r}, {c})");
            }
        }
    }

    #[test]
    fn laminate_has_no_lateral_coupling() {
        // Layer normal to x1: slab of steel of width 1/2.
        let m = vec![epoxy(), steel()];
        let shape = Shape::Voxel {
            m: 2,
            phases: vec![0, 0, 0, 0, 1, 1, 1, 1],
        };
        let cell = UnitCell::new(m, shape, Matrix3::identity()).unwrap();
        let sys = MmSystem::new(&cell, 0, 1).unwrap();
        let p = sys.parts(0.7).unwrap();
        let m = sys.index_set().len();
        let tol = 1e-14 * (p.b.norm_l2() + p.a1.norm_l2() + p.a2.norm_l2());
        for gi in 0..m {
            for gj in 0..m {
                if gi == gj {
                    continue;
                }
                for i in 0..3 {
                    for k in 0..3 {
                        assert!(p.b[(3 * gi + i, 3 * gj + k)].norm() <= tol);
                        assert!(p.a1[(3 * gi + i, 3 * gj + k)].norm() <= tol);
                        assert!(p.a2[(3 * gi + i, 3 * gj + k)].norm() <= tol);
                    }
                }
            }
        }
    }

    #[test]
    fn section_operators_are_hermitian() {
        for cell in [cube_cell(0.3), crate::cell::testing::spheroid_cell(0.5)] {
            for l in 0..3 {
                let sys = MmSystem::new(&cell, l, 2).unwrap();
                let p = sys.parts(0.41).unwrap();
                assert!(hermitian_skew(p.a2.as_ref()) <= 1e-12);
                assert!(hermitian_skew(p.b.as_ref()) <= 1e-12);
            }
        }
    }

    #[test]
    fn q0_annihilates_the_mean_displacement() {
        let cell = crate::cell::testing::spheroid_cell(0.5);
        let sys = MmSystem::new(&cell, 1, 2).unwrap();
        let q = sys.q0(0.45).unwrap();
        let h = sys.half_side();
        let c = 3 * sys.center();
        let scale = q.norm_l2();
        for col in c..c + 3 {
            for r in 0..2 * h {
                assert!(q[(r, col)].norm() <= 1e-13 * scale);
            }
        }
        // W̃⁺ Q0 = 0: traction rows of the mean mode.
        for row in h + c..h + c + 3 {
            for col in 0..2 * h {
                assert!(q[(row, col)].norm() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn non_physical_section_is_rejected() {
        let stiffness = crate::tensor::StiffnessTensor::isotropic(1.0, 1.0).scaled(-1.0);
        let mat = Material {
            name: "neg".into(),
            density: 1.0,
            stiffness,
        };
        let cell = UnitCell::homogeneous(mat);
        let sys = MmSystem::new(&cell, 0, 0).unwrap();
        assert!(matches!(sys.parts(0.5), Err(Error::NotPositiveDefinite(_))));
    }
}
