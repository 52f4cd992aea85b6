//! Full effective tensor from six Christoffel matrices, wave speeds and
//! closed-form bounds.
//!
//! Either solver yields Γ at the canonical directions e₁, e₂, e₃,
//! (e₂+e₃)/√2, (e₃+e₁)/√2, (e₁+e₂)/√2 of the cubic-lattice cell. Those six
//! matrices fix the quadratic form Γ(κ) = S_jl κ_j κ_l; an oblique lattice A
//! is undone on that form (S_pq = a_pj S̃_jl a_ql, or with A(·)Aᵀ around it
//! for the anisotropic-density cell) before D and C^eff are recovered.

mod bounds;
mod study;

pub use bounds::{bounds, hashin_shtrikman, mm_zero_bound, BoundsReport, HsBounds, QUADRATURE_TOL};
pub use study::{convergence_study, StudyRow};

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::cell::{Formulation, UnitCell};
use crate::error::{Error, Result};
use crate::mm::{self, MmOptions, PrincipalRun};
use crate::pwe::{self, PweSystem};
use crate::tensor::{
    canonical_directions, canonical_gammas, christoffel, d_from_gammas, hermitian_eigenvalues, BlockCjl,
    ChristoffelMatrix, Mat3, StiffnessTensor, C64,
};

/// Relative asymmetry of the recovered D above which the six Christoffel
/// matrices are treated as inconsistent.
pub const SYMMETRY_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Pwe,
    Mm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pwe => "pwe",
            Method::Mm => "mm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pwe" => Ok(Method::Pwe),
            "mm" => Ok(Method::Mm),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected pwe or mm)"
            ))),
        }
    }
}

impl Method {
    /// Side of the linear system the method works with at truncation N:
    /// 3(2N + 1)³ for PWE and 6(2N + 1)² for MM.
    pub fn matrix_side(self, n: usize) -> usize {
        let s = 2 * n + 1;
        match self {
            Method::Pwe => 3 * s * s * s,
            Method::Mm => 6 * s * s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub mm: MmOptions,
    pub pwe_cap: usize,
    /// Reduction used for oblique lattices.
    pub formulation: Formulation,
    /// Promote warnings (inconsistent Γ, shift redraws) to errors.
    pub strict: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            mm: MmOptions::default(),
            pwe_cap: pwe::DEFAULT_SIZE_CAP,
            formulation: Formulation::AnisotropicDensity,
            strict: false,
        }
    }
}

/// One principal MM run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub steps: usize,
    pub alpha: C64,
    pub redraws: Vec<C64>,
    pub pruning_residual: f64,
    pub skew: f64,
    pub change: f64,
}

impl RunRecord {
    fn new(label: String, run: &PrincipalRun) -> Self {
        Self {
            label,
            steps: run.steps,
            alpha: run.alpha,
            redraws: run.redraws.clone(),
            pruning_residual: run.pruning_residual,
            skew: run.skew,
            change: run.change,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// ‖D − Dᵀ‖/‖D‖ of the Voigt D before symmetrization.
    pub d_asymmetry: f64,
    pub runs: Vec<RunRecord>,
    /// Side of the PWE system actually factored (the g = 0 block is exact).
    pub pwe_side: Option<usize>,
    pub elapsed: Duration,
}

impl Diagnostics {
    pub fn max_steps(&self) -> Option<usize> {
        self.runs.iter().map(|r| r.steps).max()
    }

    pub fn max_pruning_residual(&self) -> f64 {
        self.runs.iter().map(|r| r.pruning_residual).fold(0.0, f64::max)
    }

    pub fn redraws(&self) -> usize {
        self.runs.iter().map(|r| r.redraws.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveResult {
    pub method: Method,
    pub n: usize,
    pub c_eff: StiffnessTensor,
    /// Γ^(1..6) at the canonical directions in the physical frame.
    pub gammas: Vec<ChristoffelMatrix>,
    /// Blocks of the quadratic form Γ(κ) = S_jl κ_j κ_l, S_jl = S_lj.
    pub form: BlockCjl,
    /// ⟨ρ⟩ in kg/m³.
    pub mean_rho: f64,
    /// Ascending speeds (m/s) at the canonical directions.
    pub speeds: Vec<[f64; 3]>,
    pub diagnostics: Diagnostics,
}

impl EffectiveResult {
    pub fn gamma(&self, kappa: &Vector3<f64>) -> Result<ChristoffelMatrix> {
        christoffel(&self.form, kappa, false)
    }
}

/// Symmetric blocks S_jl of the quadratic form through six Christoffel
/// matrices at the canonical directions:
/// S_ll = Γ^(l), S_23 = S_32 = Γ⁴ − ½(Γ² + Γ³) and cyclically.
pub fn quadratic_form(gammas: &[Mat3; 6]) -> BlockCjl {
    let mut s = BlockCjl::zeros();
    for l in 0..3 {
        s[(l, l)] = gammas[l];
    }
    for (k, (j, l)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
        let off = gammas[3 + k] - (gammas[j] + gammas[l]) * C64::from(0.5);
        s[(j, l)] = off;
        s[(l, j)] = off;
    }
    s
}

/// The physical form from the form of the cubic-lattice cell:
/// S_pq = a_pj S̃_jl a_ql for the Cosserat reduction and
/// S_pq = a_pj A S̄_jl Aᵀ a_ql for the anisotropic-density one.
pub fn back_map(form: &BlockCjl, lattice: &Matrix3<f64>, formulation: Formulation) -> BlockCjl {
    let inner = match formulation {
        Formulation::Cosserat => form.clone(),
        Formulation::AnisotropicDensity => form.congruence(lattice),
    };
    BlockCjl::from_fn(|p, q| {
        let mut m = Mat3::zeros();
        for j in 0..3 {
            for l in 0..3 {
                let w = lattice[(p, j)] * lattice[(q, l)];
                if w != 0.0 {
                    m += inner[(j, l)] * C64::from(w);
                }
            }
        }
        m
    })
}

/// c_α = √(λ_α/⟨ρ⟩) with λ ascending. Eigenvalues below −10⁻¹² of the
/// largest are a loss of positivity.
pub fn speeds_from_gamma(gamma: &Mat3, mean_rho: f64) -> Result<[f64; 3]> {
    let ev = hermitian_eigenvalues(gamma);
    let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&bad) = ev.iter().find(|&&v| v < -1e-12 * scale) {
        return Err(Error::NegativeEigenvalue(bad));
    }
    Ok(ev.map(|v| (v.max(0.0) / mean_rho).sqrt()))
}

/// Ascending speeds along κ from a computed result.
pub fn speeds(result: &EffectiveResult, kappa: &Vector3<f64>) -> Result<[f64; 3]> {
    speeds_from_gamma(&result.gamma(kappa)?.gamma, result.mean_rho)
}

fn mm_job(cell: &UnitCell, k: usize, n: usize, opts: &MmOptions) -> Result<(Mat3, RunRecord)> {
    if k < 3 {
        let run = mm::principal(cell, k, n, opts)?;
        Ok((run.c, RunRecord::new(format!("axis {}", k + 1), &run)))
    } else {
        let m = k - 2;
        let run = mm::principal(&mm::rotated_cell(cell, m)?, mm::rotated_axis(m), n, opts)?;
        Ok((mm::gamma_from_rotated(m, &run.c), RunRecord::new(format!("A{m}"), &run)))
    }
}

/// Canonical Γ of a cubic-lattice cell for the requested indices
/// (0..3 principal, 3..6 diagonal), with the MM runs in parallel.
fn cubic_gammas(
    cell: &UnitCell,
    method: Method,
    n: usize,
    which: &[usize],
    opts: &Options,
) -> Result<(Vec<Mat3>, Diagnostics)> {
    let mut diag = Diagnostics::default();
    let gammas = match method {
        Method::Pwe => {
            let sys = PweSystem::assemble_with_cap(cell, n, opts.pwe_cap)?;
            diag.pwe_side = Some(sys.side());
            let blocks = sys.solve()?;
            let dirs = canonical_directions();
            which
                .iter()
                .map(|&k| Ok(christoffel(&blocks, &dirs[k], true)?.gamma))
                .collect::<Result<Vec<_>>>()?
        }
        Method::Mm => {
            let out: Vec<(Mat3, RunRecord)> = which
                .par_iter()
                .map(|&k| mm_job(cell, k, n, &opts.mm))
                .collect::<Result<_>>()?;
            let (g, runs): (Vec<_>, Vec<_>) = out.into_iter().unzip();
            diag.runs = runs;
            g
        }
    };
    if opts.strict {
        if let Some(r) = diag.runs.iter().find(|r| !r.redraws.is_empty()) {
            return Err(Error::ShiftsExhausted {
                tried: r.redraws.clone(),
            });
        }
    }
    Ok((gammas, diag))
}

/// All 21 effective moduli of a cell at truncation N.
pub fn effective_moduli(cell: &UnitCell, method: Method, n: usize, opts: &Options) -> Result<EffectiveResult> {
    let start = Instant::now();
    let reduced = cell.to_cubic_equivalent(opts.formulation)?;
    let (g, mut diagnostics) = cubic_gammas(&reduced, method, n, &[0, 1, 2, 3, 4, 5], opts)?;
    let g: [Mat3; 6] = g.try_into().expect("six gammas");
    let form = back_map(&quadratic_form(&g), cell.lattice(), opts.formulation);
    let gammas = canonical_gammas(&form);
    let rec = d_from_gammas(&gammas)?;
    diagnostics.d_asymmetry = rec.asymmetry;
    if rec.asymmetry > SYMMETRY_TOL {
        let msg = format!(
            "recovered D has relative asymmetry {:.3e} (tolerance {SYMMETRY_TOL:.0e}); the six Christoffel matrices are inconsistent",
            rec.asymmetry
        );
        if opts.strict {
            return Err(Error::Symmetry(msg));
        }
        log::warn!("{method} N = {n}: {msg}");
    }
    let c_eff = rec.d.to_ceff()?;
    let mean_rho = cell.mean_density();
    let speeds = gammas
        .iter()
        .map(|g| speeds_from_gamma(&g.gamma, mean_rho))
        .collect::<Result<Vec<_>>>()?;
    diagnostics.elapsed = start.elapsed();
    Ok(EffectiveResult {
        method,
        n,
        c_eff,
        gammas,
        form,
        mean_rho,
        speeds,
        diagnostics,
    })
}

/// Γ(e_l) = C_ll^eff for the listed axes of a cubic-lattice cell, without the
/// rotated runs.
pub fn principal_gammas(
    cell: &UnitCell,
    method: Method,
    n: usize,
    axes: &[usize],
    opts: &Options,
) -> Result<(Vec<Mat3>, Diagnostics)> {
    if !cell.is_cubic() {
        return Err(Error::InvalidCell(
            "principal-only runs need a cubic-lattice cell".into(),
        ));
    }
    if let Some(&l) = axes.iter().find(|&&l| l > 2) {
        return Err(Error::InvalidArgument(format!("axis index {l} out of range")));
    }
    let start = Instant::now();
    let (g, mut diag) = cubic_gammas(cell, method, n, axes, opts)?;
    diag.elapsed = start.elapsed();
    Ok((g, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::testing::{epoxy, steel};
    use crate::cell::Material;
    use crate::tensor::rotation_lattice;

    fn quick() -> Options {
        Options {
            mm: MmOptions {
                initial_steps: 16,
                ..MmOptions::default()
            },
            ..Options::default()
        }
    }

    fn rel(a: &StiffnessTensor, b: &StiffnessTensor) -> f64 {
        (a.voigt().unwrap() - b.voigt().unwrap()).norm() / b.voigt().unwrap().norm()
    }

    #[test]
    fn homogeneous_cell_returns_its_stiffness() {
        let cell = UnitCell::homogeneous(steel());
        for method in [Method::Pwe, Method::Mm] {
            let r = effective_moduli(&cell, method, 1, &quick()).unwrap();
            assert!(rel(&r.c_eff, &steel().stiffness) <= 1e-8, "{method}");
            assert!(r.diagnostics.d_asymmetry <= 1e-12);
        }
    }

    #[test]
    fn material_speeds() {
        let s = speeds_from_gamma(&steel().stiffness.block(0, 0), 7700.0).unwrap();
        assert!((s[2] - (170e9f64 / 7700.0).sqrt()).abs() < 1e-9 * s[2]);
        assert!((s[0] - (80e9f64 / 7700.0).sqrt()).abs() < 1e-9 * s[0]);
        let e = speeds_from_gamma(&epoxy().stiffness.block(2, 2), 1142.0).unwrap();
        assert!((e[2] / 1e3 - 2.569).abs() < 1e-3);
        assert!((e[1] / 1e3 - 1.139).abs() < 1e-3);
    }

    #[test]
    fn negative_eigenvalue_is_reported() {
        let m = Mat3::from_diagonal(&nalgebra::Vector3::new(C64::from(1.0), C64::from(-0.5), C64::from(2.0)));
        assert!(matches!(speeds_from_gamma(&m, 1.0), Err(Error::NegativeEigenvalue(v)) if v == -0.5));
    }

    #[test]
    fn quadratic_form_reproduces_its_gammas() {
        let c = StiffnessTensor::from_voigt_real(&[
            [9.0, 2.0, 1.5, 0.3, -0.2, 0.4],
            [2.0, 8.0, 2.5, 0.1, 0.3, -0.1],
            [1.5, 2.5, 7.0, -0.4, 0.2, 0.2],
            [0.3, 0.1, -0.4, 3.0, 0.1, 0.2],
            [-0.2, 0.3, 0.2, 0.1, 2.5, -0.3],
            [0.4, -0.1, 0.2, 0.2, -0.3, 2.0],
        ])
        .unwrap();
        let g = canonical_gammas(&c.blocks());
        let arr: [Mat3; 6] = std::array::from_fn(|k| g[k].gamma);
        let s = quadratic_form(&arr);
        let k = Vector3::new(0.3, -0.5, 0.8).normalize();
        assert!((s.contract(&k) - c.blocks().contract(&k)).norm() <= 1e-12 * c.norm());
    }

    #[test]
    fn back_map_inverts_both_reductions() {
        let c = StiffnessTensor::from_c11_c66(5.0, 1.5);
        let a = rotation_lattice(1) + Matrix3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let b = a.try_inverse().unwrap();
        let tilde = c.tilde_transform(&b).unwrap();
        let bar = c.bar_transform(&b).unwrap();
        for (t, f) in [(tilde, Formulation::Cosserat), (bar, Formulation::AnisotropicDensity)] {
            let g = canonical_gammas(&t.blocks());
            let arr: [Mat3; 6] = std::array::from_fn(|k| g[k].gamma);
            let back = back_map(&quadratic_form(&arr), &a, f);
            let k = Vector3::new(0.6, 0.0, -0.8);
            assert!(
                (back.contract(&k) - c.blocks().contract(&k)).norm() <= 1e-12 * c.norm(),
                "{f:?}"
            );
        }
    }

    #[test]
    fn oblique_homogeneous_cell_matches_cubic() {
        let m = Material::new("aniso", 2000.0, StiffnessTensor::from_c11_c66(9e9, 2e9)).unwrap();
        let cell = UnitCell::homogeneous(m.clone())
            .with_lattice(rotation_lattice(1))
            .unwrap();
        for f in [Formulation::Cosserat, Formulation::AnisotropicDensity] {
            let opts = Options {
                formulation: f,
                ..quick()
            };
            let r = effective_moduli(&cell, Method::Mm, 1, &opts).unwrap();
            assert!(rel(&r.c_eff, &m.stiffness) <= 1e-8, "{f:?}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Pwe, Method::Mm] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("fem".parse::<Method>().is_err());
        assert_eq!(Method::Pwe.matrix_side(5), 3993);
        assert_eq!(Method::Mm.matrix_side(5), 726);
    }
}
