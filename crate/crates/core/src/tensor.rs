//! Rank-4 elasticity tensors, their 3×3 block form, Christoffel contraction
//! and the D ↔ C^eff map used to recover all 21 moduli from six directions.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{Matrix3, Matrix6, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type Mat6 = Matrix6<C64>;
pub type Tensor4 = [[[[C64; 3]; 3]; 3]; 3];

const ZERO: C64 = C64::new(0.0, 0.0);
const SYMMETRY_TOL: f64 = 1e-10;

/// Voigt pairs in the order 11, 22, 33, 23, 13, 12 (zero based).
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => panic!("tensor index out of range: ({i}, {j})"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryClass {
    /// Major and both minor symmetries.
    FullElastic,
    /// Major symmetry only.
    Cosserat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessTensor {
    entries: Tensor4,
    class: SymmetryClass,
}

fn zeros4() -> Tensor4 {
    [[[[ZERO; 3]; 3]; 3]; 3]
}

fn tensor_norm(t: &Tensor4) -> f64 {
    let mut s = 0.0;
    for a in t.iter().flatten().flatten().flatten() {
        s += a.norm_sqr();
    }
    s.sqrt()
}

fn for_each_index(mut f: impl FnMut(usize, usize, usize, usize)) {
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    f(i, j, k, l);
                }
            }
        }
    }
}

impl StiffnessTensor {
    /// Validates major symmetry (and minor symmetry for the full-elastic
    /// class) to a relative tolerance of 1e-10.
    pub fn new(entries: Tensor4, class: SymmetryClass) -> Result<Self> {
        let t = Self { entries, class };
        let scale = tensor_norm(&t.entries).max(f64::MIN_POSITIVE);
        let major = t.major_defect();
        if major > SYMMETRY_TOL * scale {
            return Err(Error::Symmetry(format!("major symmetry defect {:.3e}", major / scale)));
        }
        if class == SymmetryClass::FullElastic {
            let minor = t.minor_defect();
            if minor > SYMMETRY_TOL * scale {
                return Err(Error::Symmetry(format!("minor symmetry defect {:.3e}", minor / scale)));
            }
        }
        Ok(t)
    }

    pub fn zeros(class: SymmetryClass) -> Self {
        Self {
            entries: zeros4(),
            class,
        }
    }

    /// c_ijkl = λ δ_ij δ_kl + μ (δ_ik δ_jl + δ_il δ_jk).
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        let mut e = zeros4();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for_each_index(|i, j, k, l| {
            e[i][j][k][l] = C64::from(lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k)));
        });
        Self {
            entries: e,
            class: SymmetryClass::FullElastic,
        }
    }

    /// Isotropic tensor from c11 = λ + 2μ and c66 = μ.
    pub fn from_c11_c66(c11: f64, c66: f64) -> Self {
        Self::isotropic(c11 - 2.0 * c66, c66)
    }

    /// Builds a full-elastic tensor from an unweighted Voigt matrix. The
    /// matrix must be Hermitian to 1e-10 relative; the result is hermitized.
    pub fn from_voigt(m: &Mat6) -> Result<Self> {
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let skew = (m - m.adjoint()).norm() / 2.0;
        if skew > SYMMETRY_TOL * scale {
            return Err(Error::Symmetry(format!(
                "Voigt matrix is not Hermitian (skew part {:.3e})",
                skew / scale
            )));
        }
        let h = (m + m.adjoint()) * C64::from(0.5);
        let mut e = zeros4();
        for_each_index(|i, j, k, l| {
            e[i][j][k][l] = h[(voigt_index(i, j), voigt_index(k, l))];
        });
        Ok(Self {
            entries: e,
            class: SymmetryClass::FullElastic,
        })
    }

    pub fn from_voigt_real(m: &[[f64; 6]; 6]) -> Result<Self> {
        Self::from_voigt(&Mat6::from_fn(|r, c| C64::from(m[r][c])))
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn entries(&self) -> &Tensor4 {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.entries[i][j][k][l]
    }

    pub fn norm(&self) -> f64 {
        tensor_norm(&self.entries)
    }

    /// max |c_ijkl − c*_klij|
    pub fn major_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let e = &self.entries;
        for_each_index(|i, j, k, l| {
            worst = worst.max((e[i][j][k][l] - e[k][l][i][j].conj()).norm());
        });
        worst
    }

    /// max over |c_ijkl − c_jikl| and |c_ijkl − c_ijlk|
    pub fn minor_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let e = &self.entries;
        for_each_index(|i, j, k, l| {
            worst = worst
                .max((e[i][j][k][l] - e[j][i][k][l]).norm())
                .max((e[i][j][k][l] - e[i][j][l][k]).norm());
        });
        worst
    }

    /// Unweighted 6×6 Voigt matrix; only defined for the full-elastic class.
    pub fn voigt(&self) -> Result<Mat6> {
        if self.class != SymmetryClass::FullElastic {
            return Err(Error::Symmetry(
                "Voigt view requires minor symmetries (Cosserat-class tensor given)".into(),
            ));
        }
        Ok(Mat6::from_fn(|r, c| {
            let (i, j) = VOIGT_PAIRS[r];
            let (k, l) = VOIGT_PAIRS[c];
            self.entries[i][j][k][l]
        }))
    }

    /// Positive definiteness of the strain-energy form (full-elastic class).
    pub fn is_positive_definite(&self) -> bool {
        match self.voigt() {
            Ok(v) => v.cholesky().is_some(),
            Err(_) => false,
        }
    }

    /// (c_ijkl) over i,k for fixed j, l (zero based).
    pub fn block(&self, j: usize, l: usize) -> Mat3 {
        Mat3::from_fn(|i, k| self.entries[i][j][k][l])
    }

    pub fn blocks(&self) -> BlockCjl {
        BlockCjl::from_fn(|j, l| self.block(j, l))
    }

    /// c̃_ijkl = b_jp b_lq c_ipkq. The result is Cosserat class.
    pub fn tilde_transform(&self, b: &Matrix3<f64>) -> Result<Self> {
        check_invertible(b)?;
        let c = &self.entries;
        let mut out = zeros4();
        for_each_index(|i, j, k, l| {
            let mut s = ZERO;
            for p in 0..3 {
                for q in 0..3 {
                    s += c[i][p][k][q] * (b[(j, p)] * b[(l, q)]);
                }
            }
            out[i][j][k][l] = s;
        });
        Ok(Self {
            entries: out,
            class: SymmetryClass::Cosserat,
        })
    }

    /// c̄_ijkl = b_im b_jp b_kn b_lq c_mpnq. The class is preserved.
    pub fn bar_transform(&self, b: &Matrix3<f64>) -> Result<Self> {
        check_invertible(b)?;
        let mut t = self.entries;
        for slot in 0..4 {
            t = contract_slot(&t, b, slot);
        }
        Ok(Self {
            entries: t,
            class: self.class,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut e = self.entries;
        for a in e.iter_mut().flatten().flatten().flatten() {
            *a *= s;
        }
        Self {
            entries: e,
            class: self.class,
        }
    }

    /// Entrywise combination; the class is the weaker of the two.
    pub fn combine(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        let mut e = zeros4();
        for_each_index(|i, j, k, l| {
            e[i][j][k][l] = f(self.entries[i][j][k][l], other.entries[i][j][k][l]);
        });
        let class = if self.class == SymmetryClass::FullElastic && other.class == SymmetryClass::FullElastic {
            SymmetryClass::FullElastic
        } else {
            SymmetryClass::Cosserat
        };
        Self { entries: e, class }
    }
}

/// Applies b to one slot of a rank-4 tensor: t'_{..i..} = b_im t_{..m..}.
fn contract_slot(t: &Tensor4, b: &Matrix3<f64>, slot: usize) -> Tensor4 {
    let mut out = zeros4();
    for_each_index(|i, j, k, l| {
        let idx = [i, j, k, l];
        let mut s = ZERO;
        for m in 0..3 {
            let mut src = idx;
            src[slot] = m;
            s += t[src[0]][src[1]][src[2]][src[3]] * b[(idx[slot], m)];
        }
        out[i][j][k][l] = s;
    });
    out
}

fn check_invertible(b: &Matrix3<f64>) -> Result<()> {
    let norm = b.norm();
    let det = b.determinant();
    if !(det.abs() >= 1e-12 * norm.powi(3)) || norm == 0.0 {
        return Err(Error::SingularLattice { det, norm });
    }
    Ok(())
}

/// B = A⁻¹ after the near-singularity test |det A| ≥ 1e-12 ‖A‖³.
pub fn lattice_inverse(a: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    check_invertible(a)?;
    a.try_inverse().ok_or(Error::SingularLattice {
        det: a.determinant(),
        norm: a.norm(),
    })
}

/// The integer lattices A₁, A₂, A₃ of the rotated runs. The two columns
/// transverse to e_n are π/4 rotations scaled by √2; the column along e_n
/// has unit length, so A_n/√2 is not orthogonal. `n` is 1, 2 or 3.
pub fn rotation_lattice(n: usize) -> Matrix3<f64> {
    match n {
        1 => Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 1.0, 1.0),
        2 => Matrix3::new(1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0),
        3 => Matrix3::new(1.0, -1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0),
        _ => panic!("rotation lattice index must be 1, 2 or 3, got {n}"),
    }
}

/// e₁, e₂, e₃, (e₂+e₃)/√2, (e₃+e₁)/√2, (e₁+e₂)/√2.
pub fn canonical_directions() -> [Vector3<f64>; 6] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        Vector3::x(),
        Vector3::y(),
        Vector3::z(),
        Vector3::new(0.0, h, h),
        Vector3::new(h, 0.0, h),
        Vector3::new(h, h, 0.0),
    ]
}

/// Nine 3×3 blocks C_jl indexed by (j, l).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCjl {
    pub blocks: [[Mat3; 3]; 3],
}

impl BlockCjl {
    pub fn zeros() -> Self {
        Self {
            blocks: [[Mat3::zeros(); 3]; 3],
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Mat3) -> Self {
        let mut blocks = [[Mat3::zeros(); 3]; 3];
        for (j, row) in blocks.iter_mut().enumerate() {
            for (l, b) in row.iter_mut().enumerate() {
                *b = f(j, l);
            }
        }
        Self { blocks }
    }

    pub fn to_tensor(&self, class: SymmetryClass) -> Result<StiffnessTensor> {
        let mut e = zeros4();
        for_each_index(|i, j, k, l| e[i][j][k][l] = self.blocks[j][l][(i, k)]);
        StiffnessTensor::new(e, class)
    }

    /// max_jl ‖C_jl − C_lj^+‖
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..3 {
            for l in 0..3 {
                worst = worst.max((self.blocks[j][l] - self.blocks[l][j].adjoint()).norm());
            }
        }
        worst
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn map(&self, f: impl Fn(&Mat3) -> Mat3) -> Self {
        Self::from_fn(|j, l| f(&self.blocks[j][l]))
    }

    /// B C_jl B^+ for every pair.
    pub fn congruence(&self, b: &Matrix3<f64>) -> Self {
        let bc = b.map(C64::from);
        self.map(|m| bc * m * bc.adjoint())
    }

    /// Σ_jl C_jl κ_j κ_l, without normalizing κ.
    pub fn contract(&self, kappa: &Vector3<f64>) -> Mat3 {
        let mut g = Mat3::zeros();
        for j in 0..3 {
            for l in 0..3 {
                g += self.blocks[j][l] * C64::from(kappa[j] * kappa[l]);
            }
        }
        g
    }
}

impl Index<(usize, usize)> for BlockCjl {
    type Output = Mat3;
    fn index(&self, (j, l): (usize, usize)) -> &Mat3 {
        &self.blocks[j][l]
    }
}

impl IndexMut<(usize, usize)> for BlockCjl {
    fn index_mut(&mut self, (j, l): (usize, usize)) -> &mut Mat3 {
        &mut self.blocks[j][l]
    }
}

impl Add for &BlockCjl {
    type Output = BlockCjl;
    fn add(self, rhs: &BlockCjl) -> BlockCjl {
        BlockCjl::from_fn(|j, l| self.blocks[j][l] + rhs.blocks[j][l])
    }
}

impl Sub for &BlockCjl {
    type Output = BlockCjl;
    fn sub(self, rhs: &BlockCjl) -> BlockCjl {
        BlockCjl::from_fn(|j, l| self.blocks[j][l] - rhs.blocks[j][l])
    }
}

impl Mul<C64> for &BlockCjl {
    type Output = BlockCjl;
    fn mul(self, s: C64) -> BlockCjl {
        self.map(|m| m * s)
    }
}

impl Mul<f64> for &BlockCjl {
    type Output = BlockCjl;
    fn mul(self, s: f64) -> BlockCjl {
        self * C64::from(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelMatrix {
    pub gamma: Mat3,
    pub direction: Vector3<f64>,
}

impl ChristoffelMatrix {
    /// Ascending real eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigenvalues(&self.gamma)
    }
}

/// Ascending eigenvalues of ½(M + M^+).
pub fn hermitian_eigenvalues(m: &Mat3) -> [f64; 3] {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let ev = h.symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Returns κ/|κ|. Off-unit input is an error in strict mode and a logged
/// warning otherwise.
pub fn unit_direction(kappa: &Vector3<f64>, strict: bool) -> Result<Vector3<f64>> {
    let n = kappa.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("direction {kappa:?} has no length")));
    }
    if (n - 1.0).abs() > 1e-12 {
        if strict {
            return Err(Error::NonUnitDirection(n));
        }
        log::warn!("direction with |κ| = {n} normalized");
    }
    Ok(kappa / n)
}

/// Γ(κ) = Σ_jl C_jl κ_j κ_l, hermitized.
pub fn christoffel(blocks: &BlockCjl, kappa: &Vector3<f64>, strict: bool) -> Result<ChristoffelMatrix> {
    let k = unit_direction(kappa, strict)?;
    let g = blocks.contract(&k);
    Ok(ChristoffelMatrix {
        gamma: (g + g.adjoint()) * C64::from(0.5),
        direction: k,
    })
}

/// d_ikjl = ½(c_ijkl + c_ilkj), stored through its Voigt pairs (ik), (jl).
#[derive(Clone, Debug, PartialEq)]
pub struct DTensor {
    voigt: Mat6,
}

impl DTensor {
    pub fn from_voigt(voigt: Mat6) -> Self {
        Self { voigt }
    }

    pub fn voigt(&self) -> &Mat6 {
        &self.voigt
    }

    pub fn get(&self, i: usize, k: usize, j: usize, l: usize) -> C64 {
        self.voigt[(voigt_index(i, k), voigt_index(j, l))]
    }

    /// D_jl = (d_ikjl) over i,k.
    pub fn blocks(&self) -> BlockCjl {
        BlockCjl::from_fn(|j, l| Mat3::from_fn(|i, k| self.get(i, k, j, l)))
    }

    pub fn from_ceff(c: &StiffnessTensor) -> Result<Self> {
        if c.class() != SymmetryClass::FullElastic {
            return Err(Error::Symmetry("D is defined for full-elastic tensors".into()));
        }
        let e = c.entries();
        Ok(Self {
            voigt: Mat6::from_fn(|r, s| {
                let (i, k) = VOIGT_PAIRS[r];
                let (j, l) = VOIGT_PAIRS[s];
                (e[i][j][k][l] + e[i][l][k][j]) * 0.5
            }),
        })
    }

    /// C^eff = 3D^s − 2D, written out entry by entry in Voigt form.
    pub fn to_ceff(&self) -> Result<StiffnessTensor> {
        let d = |r: usize, s: usize| self.voigt[(r - 1, s - 1)];
        let two = C64::from(2.0);
        let upper = [
            [
                d(1, 1),
                two * d(6, 6) - d(1, 2),
                two * d(5, 5) - d(1, 3),
                two * d(5, 6) - d(1, 4),
                d(1, 5),
                d(1, 6),
            ],
            [
                ZERO,
                d(2, 2),
                two * d(4, 4) - d(2, 3),
                d(2, 4),
                two * d(4, 6) - d(2, 5),
                d(2, 6),
            ],
            [ZERO, ZERO, d(3, 3), d(3, 4), d(3, 5), two * d(4, 5) - d(3, 6)],
            [ZERO, ZERO, ZERO, d(2, 3), d(3, 6), d(2, 5)],
            [ZERO, ZERO, ZERO, ZERO, d(1, 3), d(1, 4)],
            [ZERO, ZERO, ZERO, ZERO, ZERO, d(1, 2)],
        ];
        let m = Mat6::from_fn(|r, s| if r <= s { upper[r][s] } else { upper[s][r].conj() });
        StiffnessTensor::from_voigt(&m)
    }

    pub fn christoffel(&self, kappa: &Vector3<f64>, strict: bool) -> Result<ChristoffelMatrix> {
        christoffel(&self.blocks(), kappa, strict)
    }
}

/// D recovered from the Christoffel matrices at the six canonical directions.
#[derive(Clone, Debug)]
pub struct DRecovery {
    pub d: DTensor,
    /// ‖Dᵥ − Dᵥᵀ‖/‖Dᵥ‖ before symmetrization; zero for consistent input.
    pub asymmetry: f64,
}

/// Inverts Γ(κ^α) = Σ D_jl κ^α_j κ^α_l for the six canonical directions.
///
/// The Voigt form of D is G·K, where column α of G holds the Voigt components
/// of Γ^(α) and K combines them as D_23 = Γ⁴ − ½Γ² − ½Γ³ and so on. The two
/// transposed halves are averaged, which is exact when the Γ are consistent.
pub fn d_from_gammas(gammas: &[ChristoffelMatrix]) -> Result<DRecovery> {
    if gammas.len() != 6 {
        return Err(Error::InvalidArgument(format!(
            "expected 6 Christoffel matrices, got {}",
            gammas.len()
        )));
    }
    for (g, want) in gammas.iter().zip(canonical_directions()) {
        if (g.direction - want).norm() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "direction {:?} is not the canonical {:?}",
                g.direction, want
            )));
        }
    }
    let col = |a: usize| -> [C64; 6] {
        let m = &gammas[a].gamma;
        let mut v = [ZERO; 6];
        for (r, &(i, k)) in VOIGT_PAIRS.iter().enumerate() {
            v[r] = m[(i, k)];
        }
        v
    };
    let c: Vec<[C64; 6]> = (0..6).map(col).collect();
    let mut full = Mat6::zeros();
    for r in 0..6 {
        full[(r, 0)] = c[0][r];
        full[(r, 1)] = c[1][r];
        full[(r, 2)] = c[2][r];
        full[(r, 3)] = c[3][r] - (c[1][r] + c[2][r]) * 0.5;
        full[(r, 4)] = c[4][r] - (c[2][r] + c[0][r]) * 0.5;
        full[(r, 5)] = c[5][r] - (c[0][r] + c[1][r]) * 0.5;
    }
    let scale = full.norm().max(f64::MIN_POSITIVE);
    let asymmetry = (full - full.transpose()).norm() / scale;
    let sym = (full + full.transpose()) * C64::from(0.5);
    Ok(DRecovery {
        d: DTensor::from_voigt(sym),
        asymmetry,
    })
}

/// Six Christoffel matrices at the canonical directions.
pub fn canonical_gammas(blocks: &BlockCjl) -> Vec<ChristoffelMatrix> {
    canonical_directions()
        .iter()
        .map(|k| christoffel(blocks, k, true).expect("canonical directions are unit"))
        .collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use proptest::prelude::*;

    /// Random positive-definite Voigt matrix M Mᵀ + εI with entries O(1).
    pub fn pd_voigt() -> impl Strategy<Value = Mat6> {
        prop::collection::vec(-1.0f64..1.0, 36).prop_map(|v| {
            let m = Matrix6::from_iterator(v);
            let s = m * m.transpose() + Matrix6::identity() * 0.3;
            s.map(C64::from)
        })
    }

    pub fn full_elastic() -> impl Strategy<Value = StiffnessTensor> {
        pd_voigt().prop_map(|m| StiffnessTensor::from_voigt(&m).unwrap())
    }

    pub fn invertible_matrix() -> impl Strategy<Value = Matrix3<f64>> {
        prop::collection::vec(-2.0f64..2.0, 9)
            .prop_map(Matrix3::from_iterator)
            .prop_filter("well conditioned", |m| m.determinant().abs() > 0.2)
    }

    /// Rank-4 rotation c'_ijkl = r_im r_jn r_kp r_lq c_mnpq by explicit loops.
    pub fn rotate(c: &StiffnessTensor, r: &Matrix3<f64>) -> Tensor4 {
        let e = c.entries();
        let mut out = zeros4();
        for_each_index(|i, j, k, l| {
            let mut s = ZERO;
            for m in 0..3 {
                for n in 0..3 {
                    for p in 0..3 {
                        for q in 0..3 {
                            s += e[m][n][p][q] * (r[(i, m)] * r[(j, n)] * r[(k, p)] * r[(l, q)]);
                        }
                    }
                }
            }
            out[i][j][k][l] = s;
        });
        out
    }

    pub fn max_diff(a: &Tensor4, b: &Tensor4) -> f64 {
        let mut worst = 0.0f64;
        for_each_index(|i, j, k, l| worst = worst.max((a[i][j][k][l] - b[i][j][k][l]).norm()));
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> C64 {
        C64::from(x)
    }

    #[test]
    fn isotropic_voigt() {
        let v = StiffnessTensor::isotropic(1.0, 1.0).voigt().unwrap();
        for r in 0..6 {
            for s in 0..6 {
                let want = match (r, s) {
                    (r, s) if r == s && r < 3 => 3.0,
                    (r, s) if r == s => 1.0,
                    (r, s) if r < 3 && s < 3 => 1.0,
                    _ => 0.0,
                };
                assert_eq!(v[(r, s)], c(want), "({r}, {s})");
            }
        }
    }

    #[test]
    fn steel_c12() {
        let v = StiffnessTensor::from_c11_c66(170e9, 80e9).voigt().unwrap();
        assert!((v[(0, 1)].re - 10e9).abs() < 1e-3);
    }

    #[test]
    fn isotropic_blocks() {
        let t = StiffnessTensor::from_c11_c66(7.537e9, 1.482e9);
        let b = t.block(0, 0);
        let want = Mat3::from_diagonal(&Vector3::new(c(7.537e9), c(1.482e9), c(1.482e9)));
        assert!((b - want).norm() < 1e-3);
        let (lambda, mu) = (2.0, 0.7);
        let b = StiffnessTensor::isotropic(lambda, mu).block(0, 0);
        assert_eq!(
            b,
            Mat3::from_diagonal(&Vector3::new(c(lambda + 2.0 * mu), c(mu), c(mu)))
        );
    }

    #[test]
    fn cosserat_has_no_voigt_view() {
        let b = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let t = StiffnessTensor::isotropic(1.0, 1.0).tilde_transform(&b).unwrap();
        assert_eq!(t.class(), SymmetryClass::Cosserat);
        assert!(matches!(t.voigt(), Err(Error::Symmetry(_))));
    }

    #[test]
    fn tilde_breaks_minor_symmetry() {
        let b = Matrix3::new(1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0);
        let src = StiffnessTensor::isotropic(1.0, 1.0);
        let t = src.tilde_transform(&b).unwrap();
        // oracle: c̃_1212 = b_2p b_2q c_1p1q, c̃_2112 = b_1p b_2q c_2p1q
        let mut c1212 = ZERO;
        let mut c2112 = ZERO;
        for p in 0..3 {
            for q in 0..3 {
                c1212 += src.get(0, p, 0, q) * b[(1, p)] * b[(1, q)];
                c2112 += src.get(1, p, 0, q) * b[(0, p)] * b[(1, q)];
            }
        }
        assert_eq!(t.get(0, 1, 0, 1), c1212);
        assert_eq!(t.get(1, 0, 0, 1), c2112);
        assert!((c1212 - c2112).norm() > 0.1);
    }

    #[test]
    fn identity_transforms() {
        let t = StiffnessTensor::from_c11_c66(3.0, 1.0);
        let i = Matrix3::identity();
        assert_eq!(t.bar_transform(&i).unwrap().entries(), t.entries());
        assert_eq!(t.tilde_transform(&i).unwrap().entries(), t.entries());
    }

    #[test]
    fn singular_lattice_rejected() {
        let a = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(matches!(lattice_inverse(&a), Err(Error::SingularLattice { .. })));
        let t = StiffnessTensor::isotropic(1.0, 1.0);
        assert!(t.bar_transform(&a).is_err());
        assert!(t.tilde_transform(&a).is_err());
    }

    #[test]
    fn bar_with_orthogonal_matrix_is_rotation() {
        let v =
            Mat6::from_fn(|r, s| c(1.0 + (r * 7 + s * 7 + r * s) as f64 % 5.0) + if r == s { c(20.0) } else { ZERO });
        let t = StiffnessTensor::from_voigt(&(v + v.transpose())).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = Matrix3::new(h, -h, 0.0, h, h, 0.0, 0.0, 0.0, 1.0);
        let bar = t.bar_transform(&r).unwrap();
        assert!(max_diff(bar.entries(), &rotate(&t, &r)) < 1e-12 * t.norm());
    }

    #[test]
    fn bar_composes() {
        let t = StiffnessTensor::from_c11_c66(3.0, 1.0);
        let a = rotation_lattice(1);
        let b = rotation_lattice(3);
        let two_step = t.bar_transform(&a).unwrap().bar_transform(&b).unwrap();
        let one_step = t.bar_transform(&(b * a)).unwrap();
        assert!(max_diff(two_step.entries(), one_step.entries()) < 1e-12 * two_step.norm());
    }

    #[test]
    fn christoffel_isotropic_axis() {
        let t = StiffnessTensor::from_c11_c66(5.0, 2.0);
        let g = christoffel(&t.blocks(), &Vector3::x(), true).unwrap();
        assert_eq!(g.gamma, Mat3::from_diagonal(&Vector3::new(c(5.0), c(2.0), c(2.0))));
    }

    #[test]
    fn steel_speeds_from_christoffel() {
        let t = StiffnessTensor::from_c11_c66(170e9, 80e9);
        let g = christoffel(&t.blocks(), &Vector3::x(), true).unwrap();
        let ev = g.eigenvalues();
        let speeds: Vec<f64> = ev.iter().map(|l| (l / 7700.0).sqrt() / 1e3).collect();
        assert!((speeds[0] - 3.223).abs() < 1e-3);
        assert!((speeds[1] - 3.223).abs() < 1e-3);
        assert!((speeds[2] - 4.699).abs() < 1e-3);
    }

    #[test]
    fn non_unit_direction() {
        let b = StiffnessTensor::isotropic(1.0, 1.0).blocks();
        let k = Vector3::new(2.0, 0.0, 0.0);
        assert!(matches!(christoffel(&b, &k, true), Err(Error::NonUnitDirection(_))));
        let g = christoffel(&b, &k, false).unwrap();
        assert_eq!(g.direction, Vector3::x());
        assert!(christoffel(&b, &Vector3::zeros(), false).is_err());
    }

    #[test]
    fn d_from_gammas_direction_checks() {
        let b = StiffnessTensor::isotropic(1.0, 1.0).blocks();
        let mut gs = canonical_gammas(&b);
        gs.pop();
        assert!(d_from_gammas(&gs).is_err());
        let mut gs = canonical_gammas(&b);
        gs.swap(0, 1);
        assert!(d_from_gammas(&gs).is_err());
    }

    #[test]
    fn tableau_spot_entries() {
        let mut v = Mat6::zeros();
        v[(5, 5)] = c(3.0);
        v[(0, 1)] = c(1.0);
        v[(1, 0)] = c(1.0);
        let ceff = DTensor::from_voigt(v).to_ceff().unwrap().voigt().unwrap();
        assert_eq!(ceff[(0, 1)], c(5.0));
    }

    #[test]
    fn isotropic_d_roundtrip() {
        let t = StiffnessTensor::from_c11_c66(170e9, 80e9);
        let d = DTensor::from_ceff(&t).unwrap();
        assert!(max_diff(d.to_ceff().unwrap().entries(), t.entries()) < 1e-3);
        let rec = d_from_gammas(&canonical_gammas(&d.blocks())).unwrap();
        assert!((rec.d.voigt() - d.voigt()).norm() < 1e-3);
        // isotropic D: d_ikjl = ½(λδ_ij δ_kl + μδ_ik δ_jl + 2μ δ_il δ_jk ...) so d_11 = c11
        assert_eq!(d.voigt()[(0, 0)], c(170e9));
    }

    /// C = 3D^s − 2D, with D^s the average over all 24 index permutations.
    fn ceff_by_total_symmetrization(d: &DTensor) -> Tensor4 {
        let perms: Vec<[usize; 4]> = {
            let mut out = Vec::new();
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for e in 0..4 {
                            let p = [a, b, c, e];
                            let mut s = p.to_vec();
                            s.sort();
                            s.dedup();
                            if s.len() == 4 {
                                out.push(p);
                            }
                        }
                    }
                }
            }
            out
        };
        let mut out = zeros4();
        for_each_index(|i, j, k, l| {
            let idx = [i, j, k, l];
            let mut sym = ZERO;
            for p in &perms {
                sym += d.get(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
            }
            sym /= perms.len() as f64;
            // D stored by slots (i,k,j,l); as a rank-4 tensor in slot order
            // its (a,b,c,d) entry is d.get(a,b,c,d).
            out[i][j][k][l] = sym * 3.0 - d.get(i, j, k, l) * 2.0;
        });
        out
    }

    proptest! {
        #[test]
        fn voigt_roundtrip(t in full_elastic()) {
            let back = StiffnessTensor::from_voigt(&t.voigt().unwrap()).unwrap();
            prop_assert!(max_diff(back.entries(), t.entries()) == 0.0);
        }

        #[test]
        fn blocks_are_hermitian_family(t in full_elastic()) {
            let b = t.blocks();
            prop_assert!(b.hermitian_defect() < 1e-14);
        }

        #[test]
        fn transforms_keep_symmetry(t in full_elastic(), b in invertible_matrix()) {
            let tilde = t.tilde_transform(&b).unwrap();
            let bar = t.bar_transform(&b).unwrap();
            let scale = tilde.norm().max(bar.norm());
            prop_assert!(tilde.major_defect() < 1e-13 * scale);
            prop_assert!(bar.major_defect() < 1e-13 * scale);
            prop_assert!(bar.minor_defect() < 1e-13 * scale);
            // C̄_jl = B C̃_jl B^+
            let via = tilde.blocks().congruence(&b);
            let diff = (&via - &bar.blocks()).norm();
            prop_assert!(diff < 1e-12 * scale);
        }

        #[test]
        fn d_ceff_involution(t in full_elastic()) {
            let d = DTensor::from_ceff(&t).unwrap();
            let back = d.to_ceff().unwrap();
            prop_assert!(max_diff(back.entries(), t.entries()) < 1e-14 * t.norm());
        }

        #[test]
        fn tableau_matches_total_symmetrization(v in pd_voigt()) {
            let d = DTensor::from_voigt(v);
            let want = ceff_by_total_symmetrization(&d);
            let got = d.to_ceff().unwrap();
            prop_assert!(max_diff(got.entries(), &want) < 1e-13 * got.norm());
        }

        #[test]
        fn gammas_roundtrip_exact(v in pd_voigt()) {
            let d = DTensor::from_voigt(v);
            let rec = d_from_gammas(&canonical_gammas(&d.blocks())).unwrap();
            prop_assert!(rec.asymmetry < 1e-14);
            prop_assert!((rec.d.voigt() - d.voigt()).norm() < 1e-14 * v.norm());
        }

        #[test]
        fn christoffel_matches_d_contraction(t in full_elastic(), k in prop::collection::vec(-1.0f64..1.0, 3)) {
            let k = Vector3::new(k[0], k[1], k[2]);
            prop_assume!(k.norm() > 0.1);
            let k = k / k.norm();
            let from_c = christoffel(&t.blocks(), &k, true).unwrap();
            let from_d = DTensor::from_ceff(&t).unwrap().christoffel(&k, true).unwrap();
            prop_assert!((from_c.gamma - from_d.gamma).norm() < 1e-13 * t.norm());
            let neg = christoffel(&t.blocks(), &(-k), true).unwrap();
            prop_assert!((neg.gamma - from_c.gamma).norm() == 0.0);
            prop_assert!((from_c.gamma - from_c.gamma.adjoint()).norm() == 0.0);
            prop_assert!(from_c.eigenvalues()[0] > 0.0);
        }
    }
}
