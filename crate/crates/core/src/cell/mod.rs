//! Periodic microstructure: materials, inclusion geometry and lattice, plus
//! the 3D and per-slice Fourier coefficients of the stiffness field.

mod shapes;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::tensor::{lattice_inverse, BlockCjl, StiffnessTensor, SymmetryClass, C64};
use shapes::{remapped_breakpoints, remapped_slice, voxel_factor, Primitive};

pub use shapes::transverse_axes;

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub name: String,
    /// kg/m³
    pub density: f64,
    pub stiffness: StiffnessTensor,
}

impl Material {
    pub fn new(name: impl Into<String>, density: f64, stiffness: StiffnessTensor) -> Result<Self> {
        let name = name.into();
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "{name}: density {density} must be positive"
            )));
        }
        if stiffness.class() == SymmetryClass::FullElastic && !stiffness.is_positive_definite() {
            return Err(Error::NotPositiveDefinite(format!(
                "{name}: stiffness is not positive definite"
            )));
        }
        Ok(Self {
            name,
            density,
            stiffness,
        })
    }

    /// Isotropic material from c11 and c66 (Pa) and density (kg/m³).
    pub fn isotropic(name: impl Into<String>, c11: f64, c66: f64, density: f64) -> Result<Self> {
        Self::new(name, density, StiffnessTensor::from_c11_c66(c11, c66))
    }

    /// Bulk and shear moduli when the stiffness is isotropic.
    pub fn isotropic_moduli(&self) -> Option<(f64, f64)> {
        let v = self.stiffness.voigt().ok()?;
        let c11 = v[(0, 0)].re;
        let c66 = v[(5, 5)].re;
        let iso = StiffnessTensor::from_c11_c66(c11, c66).voigt().ok()?;
        if (v - iso).norm() > 1e-10 * v.norm() {
            return None;
        }
        Some((c11 - 4.0 / 3.0 * c66, c66))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Homogeneous,
    /// Centered cube of side s.
    Cube {
        side: f64,
    },
    /// Centered sphere of diameter d.
    Sphere {
        diameter: f64,
    },
    /// Centered spheroid with axis a along x₁ and unit axes along x₂, x₃.
    Spheroid {
        a: f64,
    },
    /// M³ voxels; `phases[(i·M + j)·M + k]` is the material index of voxel
    /// (i, j, k) along (x₁, x₂, x₃).
    Voxel {
        m: usize,
        phases: Vec<usize>,
    },
    /// {x : map·x mod 1 ∈ base}.
    Remapped {
        base: Box<Shape>,
        map: Matrix3<i64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    /// ρ̃(x) = ρ(Ax), c̃_ijkl = b_jp b_lq c_ipkq(Ax).
    Cosserat,
    /// ρ̄(x) = BB^+ρ(Ax), c̄_ijkl = b_im b_jp b_kn b_lq c_mpnq(Ax).
    AnisotropicDensity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitCell {
    materials: Vec<Material>,
    shape: Shape,
    lattice: Matrix3<f64>,
    density_factor: Matrix3<f64>,
}

enum Resolved<'a> {
    Homogeneous,
    Single(Primitive),
    Voxel { m: usize, phases: &'a [usize] },
}

fn primitive(shape: &Shape) -> Option<Primitive> {
    match *shape {
        Shape::Cube { side } if side > 0.0 => Some(Primitive::Box { width: [side; 3] }),
        Shape::Sphere { diameter } if diameter > 0.0 => Some(Primitive::Ellipsoid { diam: [diameter; 3] }),
        Shape::Spheroid { a } if a > 0.0 => Some(Primitive::Ellipsoid { diam: [a, 1.0, 1.0] }),
        Shape::Cube { .. } | Shape::Sphere { .. } | Shape::Spheroid { .. } => Some(Primitive::Empty),
        _ => None,
    }
}

fn int_to_f64(m: &Matrix3<i64>) -> Matrix3<f64> {
    m.map(|v| v as f64)
}

fn is_identity(a: &Matrix3<f64>) -> bool {
    (a - Matrix3::identity()).amax() == 0.0
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidCell(format!("{name} = {v} must lie in [0, 1]")));
    }
    Ok(())
}

impl Shape {
    fn validate(&self, n_materials: usize) -> Result<()> {
        match self {
            Shape::Homogeneous => {}
            Shape::Cube { side } => in_unit("cube side", *side)?,
            Shape::Sphere { diameter } => in_unit("sphere diameter", *diameter)?,
            Shape::Spheroid { a } => in_unit("spheroid axis a", *a)?,
            Shape::Voxel { m, phases } => {
                if *m == 0 || phases.len() != m * m * m {
                    return Err(Error::InvalidCell(format!(
                        "voxel grid needs M³ = {} entries, got {}",
                        m * m * m,
                        phases.len()
                    )));
                }
                if let Some(bad) = phases.iter().find(|&&p| p >= n_materials) {
                    return Err(Error::InvalidCell(format!("voxel phase {bad} has no material")));
                }
            }
            Shape::Remapped { base, map } => {
                base.validate(n_materials)?;
                lattice_inverse(&int_to_f64(map))?;
            }
        }
        let two_phase = !matches!(self.flattened().0, Shape::Homogeneous | Shape::Voxel { .. });
        if two_phase && n_materials != 2 {
            return Err(Error::InvalidCell(format!(
                "single-inclusion shapes need 2 materials, got {n_materials}"
            )));
        }
        Ok(())
    }

    /// Base shape and accumulated map (None for the identity).
    fn flattened(&self) -> (&Shape, Option<Matrix3<i64>>) {
        match self {
            Shape::Remapped { base, map } => {
                let (inner, inner_map) = base.flattened();
                // f(x) = inner(inner_map · map · x)
                let total = match inner_map {
                    Some(m) => m * map,
                    None => *map,
                };
                (inner, Some(total))
            }
            other => (other, None),
        }
    }

    fn is_homogeneous(&self) -> bool {
        matches!(self.flattened().0, Shape::Homogeneous)
    }
}

impl UnitCell {
    pub fn new(materials: Vec<Material>, shape: Shape, lattice: Matrix3<f64>) -> Result<Self> {
        if materials.is_empty() {
            return Err(Error::InvalidCell("no materials".into()));
        }
        shape.validate(materials.len())?;
        lattice_inverse(&lattice)?;
        if !shape.is_homogeneous() && !is_identity(&lattice) {
            let rounded = lattice.map(f64::round);
            if (lattice - rounded).amax() > 1e-9 {
                return Err(Error::InvalidCell(
                    "heterogeneous cells need an integer lattice matrix (shapes are described on the cubic lattice)"
                        .into(),
                ));
            }
        }
        let shape = match shape {
            Shape::Remapped { .. } => {
                let (base, map) = shape.flattened();
                Shape::Remapped {
                    base: Box::new(base.clone()),
                    map: map.unwrap(),
                }
            }
            s => s,
        };
        Ok(Self {
            materials,
            shape,
            lattice,
            density_factor: Matrix3::identity(),
        })
    }

    pub fn homogeneous(material: Material) -> Self {
        Self::new(vec![material], Shape::Homogeneous, Matrix3::identity()).expect("homogeneous cell is valid")
    }

    pub fn two_phase(matrix: Material, inclusion: Material, shape: Shape) -> Result<Self> {
        Self::new(vec![matrix, inclusion], shape, Matrix3::identity())
    }

    /// Same medium declared on a different lattice.
    pub fn with_lattice(&self, lattice: Matrix3<f64>) -> Result<Self> {
        let mut c = Self::new(self.materials.clone(), self.shape.clone(), lattice)?;
        c.density_factor = self.density_factor;
        Ok(c)
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn lattice(&self) -> &Matrix3<f64> {
        &self.lattice
    }

    pub fn is_cubic(&self) -> bool {
        is_identity(&self.lattice)
    }

    /// Multiplier of the scalar density (BB^+ after the anisotropic-density
    /// reduction, identity otherwise).
    pub fn density_factor(&self) -> &Matrix3<f64> {
        &self.density_factor
    }

    fn resolved(&self) -> (Resolved<'_>, Option<Matrix3<i64>>) {
        let (base, map) = self.shape.flattened();
        let r = match base {
            Shape::Homogeneous => Resolved::Homogeneous,
            Shape::Voxel { m, phases } => Resolved::Voxel { m: *m, phases },
            other => Resolved::Single(primitive(other).expect("primitive shape")),
        };
        (r, map)
    }

    /// Volume fraction of each material.
    pub fn volume_fractions(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.materials.len()];
        match self.resolved().0 {
            Resolved::Homogeneous => f[0] = 1.0,
            Resolved::Single(p) => {
                f[1] = p.volume();
                f[0] = 1.0 - f[1];
            }
            Resolved::Voxel { m, phases } => {
                let w = 1.0 / (m * m * m) as f64;
                for &p in phases {
                    f[p] += w;
                }
            }
        }
        f
    }

    /// ⟨ρ⟩ in kg/m³.
    pub fn mean_density(&self) -> f64 {
        self.volume_fractions()
            .iter()
            .zip(&self.materials)
            .map(|(f, m)| f * m.density)
            .sum()
    }

    /// ⟨ρ⟩ times the density factor.
    pub fn mean_density_tensor(&self) -> Matrix3<f64> {
        self.density_factor * self.mean_density()
    }

    /// Material index at a point of the unit cell (coordinates taken mod 1).
    pub fn phase_at(&self, x: &Vector3<f64>) -> usize {
        let (r, map) = self.resolved();
        let mut y = match map {
            Some(m) => int_to_f64(&m) * x,
            None => *x,
        };
        y.apply(|t| *t = t.rem_euclid(1.0));
        match r {
            Resolved::Homogeneous => 0,
            Resolved::Single(p) => usize::from(p.contains(&y)),
            Resolved::Voxel { m, phases } => {
                let idx = |t: f64| ((t * m as f64) as usize).min(m - 1);
                phases[(idx(y[0]) * m + idx(y[1])) * m + idx(y[2])]
            }
        }
    }

    pub(crate) fn require_cubic(&self) -> Result<()> {
        if !self.is_cubic() {
            return Err(Error::InvalidCell(
                "solvers need a cubic-lattice cell; reduce it with to_cubic_equivalent first".into(),
            ));
        }
        Ok(())
    }

    fn contrasts(&self) -> (BlockCjl, Vec<BlockCjl>) {
        let base = self.materials[0].stiffness.blocks();
        let contrasts = self.materials[1..]
            .iter()
            .map(|m| &m.stiffness.blocks() - &base)
            .collect();
        (base, contrasts)
    }

    /// χ̂_k(g) over the unit cube for each inclusion phase k ≥ 1.
    fn chi3(&self, g: [i64; 3]) -> Vec<C64> {
        let n = self.materials.len() - 1;
        let (r, map) = self.resolved();
        let g = match map {
            None => g,
            Some(a) => match pull_back(&a, g) {
                Some(g) => g,
                None => return vec![C64::new(0.0, 0.0); n],
            },
        };
        match r {
            Resolved::Homogeneous => vec![],
            Resolved::Single(p) => vec![p.ft3(g)],
            Resolved::Voxel { m, phases } => {
                let f: Vec<Vec<C64>> = (0..3)
                    .map(|i| (0..m).map(|v| voxel_factor(g[i], v, m)).collect())
                    .collect();
                let mut out = vec![C64::new(0.0, 0.0); n];
                for i in 0..m {
                    for j in 0..m {
                        let fij = f[0][i] * f[1][j];
                        for k in 0..m {
                            let p = phases[(i * m + j) * m + k];
                            if p > 0 {
                                out[p - 1] += fij * f[2][k];
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Ĉ_jl(g) = C₀ δ_g0 + Σ_k (C_k − C₀) χ̂_k(g).
    pub fn fourier3d(&self, g: [i64; 3]) -> Result<BlockCjl> {
        self.require_cubic()?;
        let (base, contrasts) = self.contrasts();
        Ok(combine(&base, &contrasts, &self.chi3(g), g == [0, 0, 0]))
    }

    /// All Ĉ(g) for g ∈ [−H, H]³.
    pub fn fourier3d_table(&self, big_h: i64) -> Result<FourierTable3> {
        self.require_cubic()?;
        let (base, contrasts) = self.contrasts();
        let side = 2 * big_h + 1;
        let mut coeffs = Vec::with_capacity((side * side * side) as usize);
        for g0 in -big_h..=big_h {
            for g1 in -big_h..=big_h {
                for g2 in -big_h..=big_h {
                    let g = [g0, g1, g2];
                    coeffs.push(combine(&base, &contrasts, &self.chi3(g), g == [0, 0, 0]));
                }
            }
        }
        Ok(FourierTable3 { big_h, coeffs })
    }

    /// χ̂_k(h, x_l) on the transverse plane, for h ∈ [−H, H]².
    fn chi2(&self, l: usize, x: f64, big_h: i64) -> Vec<Vec<C64>> {
        let side = (2 * big_h + 1) as usize;
        let n = self.materials.len() - 1;
        let (r, map) = self.resolved();
        match (r, map) {
            (Resolved::Homogeneous, _) => vec![],
            (Resolved::Single(p), None) => vec![p.ft2_slice(l, x, big_h)],
            (Resolved::Single(p), Some(a)) => vec![remapped_slice(&p, &int_to_f64(&a), l, x, big_h)],
            (Resolved::Voxel { m, phases }, None) => {
                let (a, b) = transverse_axes(l);
                let layer = ((x * m as f64) as usize).min(m - 1);
                let fa: Vec<Vec<C64>> = (-big_h..=big_h)
                    .map(|g| (0..m).map(|v| voxel_factor(g, v, m)).collect())
                    .collect();
                let mut out = vec![vec![C64::new(0.0, 0.0); side * side]; n];
                for va in 0..m {
                    for vb in 0..m {
                        let mut v = [0usize; 3];
                        v[l] = layer;
                        v[a] = va;
                        v[b] = vb;
                        let p = phases[(v[0] * m + v[1]) * m + v[2]];
                        if p == 0 {
                            continue;
                        }
                        for i in 0..side {
                            for j in 0..side {
                                out[p - 1][i * side + j] += fa[i][va] * fa[j][vb];
                            }
                        }
                    }
                }
                out
            }
            (Resolved::Voxel { .. }, Some(_)) => self.chi2_sampled(l, x, big_h),
        }
    }

    /// Trapezoid-rule slice transform on an M×M grid with M = 8(H + 1).
    fn chi2_sampled(&self, l: usize, x: f64, big_h: i64) -> Vec<Vec<C64>> {
        let side = (2 * big_h + 1) as usize;
        let n = self.materials.len() - 1;
        let m = 8 * (big_h as usize + 1);
        let (a, b) = transverse_axes(l);
        let mut out = vec![vec![C64::new(0.0, 0.0); side * side]; n];
        let w = 1.0 / (m * m) as f64;
        let twiddle: Vec<Vec<C64>> = (-big_h..=big_h)
            .map(|g| {
                (0..m)
                    .map(|i| C64::from_polar(w.sqrt(), -2.0 * PI * g as f64 * i as f64 / m as f64))
                    .collect()
            })
            .collect();
        for i in 0..m {
            for j in 0..m {
                let mut p = Vector3::zeros();
                p[l] = x;
                p[a] = i as f64 / m as f64;
                p[b] = j as f64 / m as f64;
                let ph = self.phase_at(&p);
                if ph == 0 {
                    continue;
                }
                for (ia, ta) in twiddle.iter().enumerate() {
                    for (ib, tb) in twiddle.iter().enumerate() {
                        out[ph - 1][ia * side + ib] += ta[i] * tb[j];
                    }
                }
            }
        }
        out
    }

    /// Ĉ_jl(g, x_l) for a single transverse wavevector.
    pub fn fourier2d_slice(&self, g: [i64; 2], x: f64, l: usize) -> Result<BlockCjl> {
        let big_h = g[0].abs().max(g[1].abs());
        let t = self.slice_table(l, x, big_h)?;
        Ok(t.coeff(g).clone())
    }

    /// Ĉ(h, x_l) for every h ∈ [−H, H]².
    pub fn slice_table(&self, l: usize, x: f64, big_h: i64) -> Result<SliceTable> {
        self.require_cubic()?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::CoordinateOutOfRange(x));
        }
        if l > 2 {
            return Err(Error::InvalidArgument(format!("axis index {l} out of range")));
        }
        let (base, contrasts) = self.contrasts();
        let chi = self.chi2(l, x, big_h);
        let side = (2 * big_h + 1) as usize;
        let center = big_h as usize * side + big_h as usize;
        let mut coeffs = Vec::with_capacity(side * side);
        for idx in 0..side * side {
            let c: Vec<C64> = chi.iter().map(|t| t[idx]).collect();
            coeffs.push(combine(&base, &contrasts, &c, idx == center));
        }
        Ok(SliceTable { big_h, coeffs })
    }

    /// Whether the slice coefficients along every axis are constant between
    /// breakpoints (box and voxel cells on their own lattice).
    pub fn slices_piecewise_constant(&self) -> bool {
        matches!(
            self.resolved(),
            (Resolved::Homogeneous, _)
                | (Resolved::Single(Primitive::Box { .. } | Primitive::Empty), None)
                | (Resolved::Voxel { .. }, None)
        )
    }

    /// Interior positions in (0, 1) where the slice coefficients along x_l
    /// jump or lose smoothness, sorted.
    pub fn breakpoints(&self, l: usize) -> Vec<f64> {
        let (r, map) = self.resolved();
        let mut raw = match (&r, map) {
            (Resolved::Homogeneous, _) => vec![],
            (Resolved::Single(p), None) => p.breakpoints(l),
            (Resolved::Single(p), Some(a)) => {
                let af = int_to_f64(&a);
                let inv = af.try_inverse().expect("validated");
                remapped_breakpoints(p, &af, &inv, l)
            }
            (Resolved::Voxel { m, .. }, None) => (1..*m).map(|v| v as f64 / *m as f64).collect(),
            (Resolved::Voxel { .. }, Some(_)) => vec![],
        };
        raw.retain(|&v| v > 1e-12 && v < 1.0 - 1e-12);
        raw.sort_by(|a, b| a.total_cmp(b));
        raw.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        raw
    }

    /// Reference modulus used to non-dimensionalize the solvers.
    pub(crate) fn reference_modulus(&self) -> f64 {
        self.materials
            .iter()
            .flat_map(|m| {
                m.stiffness
                    .entries()
                    .iter()
                    .flatten()
                    .flatten()
                    .flatten()
                    .map(|c| c.norm())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn with_scaled_stiffness(&self, s: f64) -> Self {
        let mut c = self.clone();
        for m in &mut c.materials {
            m.stiffness = m.stiffness.scaled(s);
        }
        c
    }

    /// The same problem on the cubic lattice: fields are evaluated at A·x and
    /// the stiffness is transformed per the chosen formulation.
    pub fn to_cubic_equivalent(&self, formulation: Formulation) -> Result<Self> {
        if self.is_cubic() {
            return Ok(self.clone());
        }
        let b = lattice_inverse(&self.lattice)?;
        let mut materials = Vec::with_capacity(self.materials.len());
        for m in &self.materials {
            let stiffness = match formulation {
                Formulation::Cosserat => m.stiffness.tilde_transform(&b)?,
                Formulation::AnisotropicDensity => m.stiffness.bar_transform(&b)?,
            };
            materials.push(Material {
                name: m.name.clone(),
                density: m.density,
                stiffness,
            });
        }
        let shape = if self.shape.is_homogeneous() {
            Shape::Homogeneous
        } else {
            let a = self.lattice.map(|v| v.round() as i64);
            let (base, map) = self.shape.flattened();
            let total = match map {
                Some(m) => m * a,
                None => a,
            };
            Shape::Remapped {
                base: Box::new(base.clone()),
                map: total,
            }
        };
        let density_factor = match formulation {
            Formulation::Cosserat => self.density_factor,
            Formulation::AnisotropicDensity => b * self.density_factor * b.transpose(),
        };
        Ok(Self {
            materials,
            shape,
            lattice: Matrix3::identity(),
            density_factor,
        })
    }
}

/// A^{−T} h when it is an integer vector.
fn pull_back(a: &Matrix3<i64>, h: [i64; 3]) -> Option<[i64; 3]> {
    let af = int_to_f64(a);
    let det = af.determinant().round() as i64;
    // adj(A)ᵀ h = det · A^{−T} h
    let cof = |r: usize, c: usize| -> i64 {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&i| i != c).collect();
        let m = a[(rows[0], cols[0])] * a[(rows[1], cols[1])] - a[(rows[0], cols[1])] * a[(rows[1], cols[0])];
        if (r + c) % 2 == 0 {
            m
        } else {
            -m
        }
    };
    let mut g = [0i64; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        // A^{−1} = adj/det with adj_ij = cof(j, i), so (A^{−T})_ij = cof(i, j)/det.
        let s: i64 = (0..3).map(|j| cof(i, j) * h[j]).sum();
        if s % det != 0 {
            return None;
        }
        *gi = s / det;
    }
    Some(g)
}

fn combine(base: &BlockCjl, contrasts: &[BlockCjl], chi: &[C64], at_zero: bool) -> BlockCjl {
    let mut out = if at_zero { base.clone() } else { BlockCjl::zeros() };
    for (dc, x) in contrasts.iter().zip(chi) {
        if x.norm() != 0.0 {
            out = &out + &(dc * *x);
        }
    }
    out
}

/// Ĉ(g) for g ∈ [−H, H]³, lexicographic.
#[derive(Clone, Debug)]
pub struct FourierTable3 {
    big_h: i64,
    coeffs: Vec<BlockCjl>,
}

impl FourierTable3 {
    pub fn big_h(&self) -> i64 {
        self.big_h
    }

    pub fn coeff(&self, g: [i64; 3]) -> &BlockCjl {
        let s = 2 * self.big_h + 1;
        let h = self.big_h;
        assert!(g.iter().all(|v| v.abs() <= h), "wavevector {g:?} outside the table");
        &self.coeffs[(((g[0] + h) * s + g[1] + h) * s + g[2] + h) as usize]
    }
}

/// Ĉ(h, x_l) for h ∈ [−H, H]², row-major over (h_a, h_b) with a < b the
/// transverse axes.
#[derive(Clone, Debug)]
pub struct SliceTable {
    big_h: i64,
    coeffs: Vec<BlockCjl>,
}

impl SliceTable {
    pub fn big_h(&self) -> i64 {
        self.big_h
    }

    pub fn coeff(&self, h: [i64; 2]) -> &BlockCjl {
        let s = 2 * self.big_h + 1;
        assert!(
            h[0].abs() <= self.big_h && h[1].abs() <= self.big_h,
            "wavevector {h:?} outside the table"
        );
        &self.coeffs[((h[0] + self.big_h) * s + h[1] + self.big_h) as usize]
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::special::bessel_j1;
    use crate::tensor::rotation_lattice;
    use proptest::prelude::*;

    /// Midpoint-rule 3D transform of the indicator of phase 1, refined in
    /// the cells the interface crosses by adaptive bisection.
    fn chi3_quadrature(cell: &UnitCell, g: [i64; 3], n: usize) -> C64 {
        let h = 1.0 / n as f64;
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = Vector3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
                    if cell.phase_at(&x) == 1 {
                        let ph = -2.0 * PI * (g[0] as f64 * x[0] + g[1] as f64 * x[1] + g[2] as f64 * x[2]);
                        s += C64::from_polar(1.0, ph);
                    }
                }
            }
        }
        s * h * h * h
    }

    #[test]
    fn mean_densities() {
        assert_eq!(UnitCell::homogeneous(steel()).mean_density(), 7700.0);
        let c = cube_cell(0.125);
        assert!((c.mean_density() - 1961.75).abs() < 1e-9);
        let f = spheroid_cell(0.5).volume_fractions()[1];
        assert!((f - PI / 12.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_coefficients() {
        let c = UnitCell::homogeneous(steel());
        assert_eq!(c.fourier3d([0, 0, 0]).unwrap(), steel().stiffness.blocks());
        assert_eq!(c.fourier3d([1, 0, -2]).unwrap().norm(), 0.0);
        for &x in &[0.0, 0.3, 1.0] {
            let t = c.slice_table(0, x, 2).unwrap();
            assert_eq!(t.coeff([0, 1]).norm(), 0.0);
            assert_eq!(t.coeff([0, 0]), &steel().stiffness.blocks());
        }
    }

    #[test]
    fn spheroid_zero_coefficient_is_volume() {
        let c = spheroid_cell(0.5);
        assert!((c.chi3([0, 0, 0])[0].re - PI * 0.5 / 6.0).abs() < 1e-15);
        let s = UnitCell::two_phase(epoxy(), steel(), Shape::Sphere { diameter: 0.8 }).unwrap();
        assert!((s.chi3([0, 0, 0])[0].re - PI * 0.512 / 6.0).abs() < 1e-15);
        assert!((cube_cell(0.125).chi3([0, 0, 0])[0].re - 0.125).abs() < 1e-15);
    }

    #[test]
    fn spheroid_chi3_matches_quadrature() {
        let c = spheroid_cell(0.5);
        for g in [[1, 0, 0], [0, 1, 1], [2, -1, 0]] {
            let want = chi3_quadrature(&c, g, 160);
            let got = c.chi3(g)[0];
            assert!((got - want).norm() < 2e-4, "{g:?}: {got} vs {want}");
        }
    }

    #[test]
    fn sphere_center_slice() {
        // a = 1, x₁ = ½: disc of radius ½, χ̂(1, 0) = −J₁(π)/2.
        let c = spheroid_cell(1.0);
        let t = c.slice_table(0, 0.5, 1).unwrap();
        let dc = steel().stiffness.block(0, 0)[(0, 0)] - epoxy().stiffness.block(0, 0)[(0, 0)];
        let chi = t.coeff([1, 0])[(0, 0)][(0, 0)] / dc;
        assert!((chi.re + bessel_j1(PI) / 2.0).abs() < 1e-14);
        let chi0 = (t.coeff([0, 0])[(0, 0)][(0, 0)] - epoxy().stiffness.block(0, 0)[(0, 0)]) / dc;
        assert!((chi0.re - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn slice_out_of_range() {
        let c = spheroid_cell(0.5);
        assert!(matches!(c.slice_table(0, 1.5, 1), Err(Error::CoordinateOutOfRange(_))));
        assert!(matches!(c.slice_table(0, -0.1, 1), Err(Error::CoordinateOutOfRange(_))));
    }

    #[test]
    fn slab_average_matches_3d() {
        // ∫ Ĉ(0, x_l) dx_l = Ĉ(0) by Gauss-Legendre on each smooth piece.
        for cell in [spheroid_cell(0.5), cube_cell(0.3)] {
            for l in 0..3 {
                let mut pts = vec![0.0];
                pts.extend(cell.breakpoints(l));
                pts.push(1.0);
                let (nodes, weights) = crate::special::gauss_legendre(20);
                let mut acc = BlockCjl::zeros();
                for w in pts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    for (t, wt) in nodes.iter().zip(&weights) {
                        let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                        let c = cell.slice_table(l, x, 0).unwrap();
                        acc = &acc + &(c.coeff([0, 0]) * (0.5 * (b - a) * wt));
                    }
                }
                let want = cell.fourier3d([0, 0, 0]).unwrap();
                assert!((&acc - &want).norm() < 1e-10 * want.norm(), "l = {l}");
            }
        }
    }

    #[test]
    fn voxel_cube_matches_closed_form() {
        // A 4³ grid with the central 2³ block set equals the cube of side ½.
        let m = 4;
        let mut phases = vec![0; m * m * m];
        for i in 1..3 {
            for j in 1..3 {
                for k in 1..3 {
                    phases[(i * m + j) * m + k] = 1;
                }
            }
        }
        let vox = UnitCell::two_phase(epoxy(), steel(), Shape::Voxel { m, phases }).unwrap();
        let cube = UnitCell::two_phase(epoxy(), steel(), Shape::Cube { side: 0.5 }).unwrap();
        for g in [[0, 0, 0], [1, 0, 0], [1, -2, 3]] {
            assert!((vox.chi3(g)[0] - cube.chi3(g)[0]).norm() < 1e-15);
        }
        for &x in &[0.1, 0.3, 0.6] {
            let a = vox.slice_table(2, x, 2).unwrap();
            let b = cube.slice_table(2, x, 2).unwrap();
            assert!((a.coeff([1, -1]) - b.coeff([1, -1])).norm() < 1e-12 * b.coeff([0, 0]).norm());
        }
        assert_eq!(vox.breakpoints(0).len(), 3);
    }

    #[test]
    fn remapped_3d_coefficients_follow_the_sublattice() {
        let cell = cube_cell(0.2).with_lattice(rotation_lattice(1)).unwrap();
        let eq = cell.to_cubic_equivalent(Formulation::AnisotropicDensity).unwrap();
        // (A^{−T} h) integer only when h₂ + h₃ is even for A₁.
        assert_eq!(eq.chi3([0, 1, 0])[0].norm(), 0.0);
        let g = pull_back(&rotation_lattice(1).map(|v| v as i64), [1, 1, 1]).unwrap();
        assert_eq!(g, [1, 0, 1]);
        let base = cube_cell(0.2);
        assert_eq!(eq.chi3([1, 1, 1])[0], base.chi3(g)[0]);
        let q = chi3_quadrature(&eq, [1, 1, 1], 120);
        assert!((eq.chi3([1, 1, 1])[0] - q).norm() < 5e-3);
    }

    #[test]
    fn nested_remaps_compose() {
        let a1 = rotation_lattice(1).map(|v| v as i64);
        let a2 = rotation_lattice(2).map(|v| v as i64);
        let inner = Shape::Remapped {
            base: Box::new(Shape::Cube { side: 0.4 }),
            map: a1,
        };
        let nested = UnitCell::two_phase(
            epoxy(),
            steel(),
            Shape::Remapped {
                base: Box::new(inner),
                map: a2,
            },
        )
        .unwrap();
        let flat = UnitCell::two_phase(
            epoxy(),
            steel(),
            Shape::Remapped {
                base: Box::new(Shape::Cube { side: 0.4 }),
                map: a1 * a2,
            },
        )
        .unwrap();
        assert_eq!(nested.shape(), flat.shape());
        let x = Vector3::new(0.13, 0.77, 0.41);
        let y = (rotation_lattice(1) * rotation_lattice(2) * x).map(|t| t.rem_euclid(1.0));
        assert_eq!(nested.phase_at(&x), cube_cell(0.064).phase_at(&y));
    }

    #[test]
    fn cubic_equivalent_identity_and_homogeneous() {
        let c = cube_cell(0.125);
        assert_eq!(c.to_cubic_equivalent(Formulation::Cosserat).unwrap(), c);
        assert_eq!(c.to_cubic_equivalent(Formulation::AnisotropicDensity).unwrap(), c);
        let h = UnitCell::homogeneous(steel())
            .with_lattice(rotation_lattice(1))
            .unwrap();
        let bar = h.to_cubic_equivalent(Formulation::AnisotropicDensity).unwrap();
        let tilde = h.to_cubic_equivalent(Formulation::Cosserat).unwrap();
        assert_eq!(bar.shape(), &Shape::Homogeneous);
        let b = lattice_inverse(&rotation_lattice(1)).unwrap();
        let via = tilde.materials()[0].stiffness.blocks().congruence(&b);
        assert!((&via - &bar.materials()[0].stiffness.blocks()).norm() < 1e-14 * via.norm());
        assert!((bar.mean_density_tensor() - b * b.transpose() * 7700.0).norm() < 1e-9);
        assert_eq!(tilde.mean_density(), 7700.0);
    }

    #[test]
    fn invalid_cells() {
        assert!(UnitCell::two_phase(epoxy(), steel(), Shape::Cube { side: 1.2 }).is_err());
        assert!(UnitCell::two_phase(epoxy(), steel(), Shape::Spheroid { a: -0.1 }).is_err());
        assert!(UnitCell::new(vec![epoxy()], Shape::Cube { side: 0.5 }, Matrix3::identity()).is_err());
        let skew = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(cube_cell(0.1).with_lattice(skew).is_err());
        assert!(UnitCell::homogeneous(steel()).with_lattice(skew).is_ok());
        assert!(Material::isotropic("bad", 1.0, 1.0, -1.0).is_err());
        assert!(Material::isotropic("bad", 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_spheroid_is_matrix() {
        let c = spheroid_cell(0.0);
        assert_eq!(c.mean_density(), 1142.0);
        assert_eq!(c.fourier3d([1, 0, 0]).unwrap().norm(), 0.0);
        assert!(c.slice_table(0, 0.5, 1).unwrap().coeff([1, 0]).norm() == 0.0);
    }

    proptest! {
        #[test]
        fn fourier_reality(g in prop::array::uniform3(-3i64..=3), a in 0.05f64..1.0, x in 0.0f64..1.0, l in 0usize..3) {
            for cell in [spheroid_cell(a), cube_cell(a * 0.9)] {
                let p = cell.fourier3d(g).unwrap();
                let m = cell.fourier3d([-g[0], -g[1], -g[2]]).unwrap();
                prop_assert!((&p - &m.map(|b| b.conjugate())).norm() < 1e-12 * p.norm().max(1.0));
                // Ĉ_jl(g) = Ĉ_lj(−g)^+
                let swapped = BlockCjl::from_fn(|j, k| m[(k, j)].adjoint());
                prop_assert!((&p - &swapped).norm() < 1e-12 * p.norm().max(1.0));
                let t = cell.slice_table(l, x, 3).unwrap();
                let h = [g[0], g[1]];
                let s = t.coeff(h);
                let sm = t.coeff([-h[0], -h[1]]);
                prop_assert!((s - &sm.map(|b| b.conjugate())).norm() < 1e-12 * s.norm().max(1.0));
            }
        }

        #[test]
        fn remapped_reality(x in 0.0f64..1.0, n in 1usize..=3, l in 0usize..3) {
            let cell = spheroid_cell(0.6).with_lattice(rotation_lattice(n)).unwrap()
                .to_cubic_equivalent(Formulation::AnisotropicDensity).unwrap();
            let t = cell.slice_table(l, x, 2).unwrap();
            for h in [[1, 0], [1, 2], [-2, 1]] {
                let s = t.coeff(h);
                let sm = t.coeff([-h[0], -h[1]]);
                prop_assert!((s - &sm.map(|b| b.conjugate())).norm() < 1e-12 * s.norm().max(1.0));
            }
        }
    }
}
