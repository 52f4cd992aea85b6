//! Monodromy-matrix method.
//!
//! For each axis l the cell problem is expanded in 2D Fourier modes over
//! the transverse plane and propagated along x_l by the matricant M0. Instead
//! of M0 itself the resolvent R_α = (M0 − αI)⁻¹ is integrated through its
//! Riccati equation, and C_ll^eff follows from a Schur complement of the
//! pruned system (1 − α)(I + (α − 1)R_α(1)) Ŝ = W.
//!
//! Off-principal information comes from three further principal runs on the
//! cell re-declared on the lattices A₁, A₂, A₃ (integer lattices whose columns span π/4-rotated frames)
//! in the anisotropic-density formulation:
//! Γ((e₂+e₃)/√2) = 2·A₁ C̄₂₂^eff A₁ᵀ, and cyclically.

mod extract;
mod offdiag;
mod resolvent;
mod system;

pub use extract::{extract_cll_eff, extract_cll_eff_lstsq, t_matrix, Extraction, HERMITIAN_TOL, PRUNING_TOL};
pub use offdiag::direct_offdiagonal;
pub use resolvent::{
    integrate_resolvent, integrate_resolvent_magnus, monodromy_direct, segments, Segment, DIVERGENCE_GROWTH,
};
pub use system::{assemble_q0, MmSystem, Q0Parts};

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::cell::{Formulation, UnitCell};
use crate::error::{Error, Result};
use crate::tensor::{rotation_lattice, Mat3, C64};

/// Shifts tried in order when the resolvent diverges.
pub const SHIFTS: [C64; 3] = [C64::new(0.0, 2.0), C64::new(0.5, 2.0), C64::new(-1.5, 1.5)];

/// Stepper for the resolvent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Classical RK4 on the Riccati equation; needs h·ρ(Q0) ≲ 2.8.
    Rk4,
    /// Sixth-order Magnus steps applied as a Möbius map on a grid graded
    /// towards the breakpoints.
    #[default]
    Magnus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmOptions {
    pub integrator: Integrator,
    /// First shift; the remaining entries of [`SHIFTS`] are fallbacks.
    pub alpha: C64,
    pub initial_steps: usize,
    pub max_steps: usize,
    /// Cauchy tolerance on ‖ΔC_ll^eff‖/‖C_ll^eff‖ between step doublings.
    pub tol: f64,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Magnus,
            alpha: SHIFTS[0],
            initial_steps: 64,
            max_steps: 1 << 16,
            tol: 1e-8,
        }
    }
}

impl MmOptions {
    fn shifts(&self) -> Vec<C64> {
        let mut v = vec![self.alpha];
        v.extend(SHIFTS.iter().copied().filter(|s| (s - self.alpha).norm() > 1e-12));
        v
    }
}

/// A converged principal run.
#[derive(Clone, Debug)]
pub struct PrincipalRun {
    pub axis: usize,
    pub n: usize,
    /// C_ll^eff in the stiffness units of the cell.
    pub c: Mat3,
    pub steps: usize,
    pub alpha: C64,
    /// Shifts abandoned because the resolvent diverged.
    pub redraws: Vec<C64>,
    pub pruning_residual: f64,
    pub skew: f64,
    /// Relative change at the last doubling.
    pub change: f64,
    /// Ŝ of the final run, in the scaled units of the system.
    pub(crate) s: faer::Mat<faer::c64>,
}

fn run_once(
    sys: &MmSystem,
    integrator: Integrator,
    shifts: &[C64],
    steps: usize,
    redraws: &mut Vec<C64>,
) -> Result<(Extraction, C64)> {
    for &alpha in shifts {
        if redraws.contains(&alpha) {
            continue;
        }
        let r = match integrator {
            Integrator::Rk4 => integrate_resolvent(sys, alpha, steps),
            Integrator::Magnus => integrate_resolvent_magnus(sys, alpha, steps),
        };
        match r {
            Ok(r) => return Ok((extract_cll_eff(&r, alpha, sys.center(), steps)?, alpha)),
            Err(Error::Divergence { x, growth, .. }) => {
                log::warn!("resolvent diverged at x = {x:.4} (growth {growth:.2e}) with α = {alpha}; redrawing");
                redraws.push(alpha);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::ShiftsExhausted { tried: redraws.clone() })
}

/// C_ll^eff along axis `l` at truncation N with step doubling.
pub fn principal(cell: &UnitCell, l: usize, n: usize, opts: &MmOptions) -> Result<PrincipalRun> {
    let sys = MmSystem::new(cell, l, n)?;
    principal_on(&sys, opts)
}

pub(crate) fn principal_on(sys: &MmSystem, opts: &MmOptions) -> Result<PrincipalRun> {
    let mut shifts = opts.shifts();
    let mut redraws = Vec::new();
    let mut steps = opts.initial_steps.max(1);
    let mut prev: Option<Mat3> = None;
    let mut change = f64::INFINITY;
    loop {
        match run_once(sys, opts.integrator, &shifts, steps, &mut redraws) {
            Ok((ex, alpha)) => {
                // Keep the working shift first for the remaining doublings.
                shifts.retain(|s| *s != alpha);
                shifts.insert(0, alpha);
                if let Some(p) = prev {
                    change = (ex.c - p).norm() / ex.c.norm().max(f64::MIN_POSITIVE);
                    if change <= opts.tol {
                        let scale = Complex64::new(sys.scale(), 0.0);
                        log::debug!(
                            "axis {} N = {}: converged at {steps} steps (change {change:.2e})",
                            sys.axis() + 1,
                            sys.truncation()
                        );
                        return Ok(PrincipalRun {
                            axis: sys.axis(),
                            n: sys.truncation(),
                            c: ex.c * scale,
                            steps,
                            alpha,
                            redraws,
                            pruning_residual: ex.pruning_residual,
                            skew: ex.skew,
                            change,
                            s: ex.s,
                        });
                    }
                }
                prev = Some(ex.c);
            }
            Err(Error::PruningResidual { residual, .. }) => {
                log::debug!("pruning residual {residual:.2e} at {steps} steps; doubling");
                prev = None;
            }
            Err(e) => return Err(e),
        }
        if steps * 2 > opts.max_steps {
            return Err(Error::NotConverged {
                tol: opts.tol,
                steps,
                change,
            });
        }
        steps *= 2;
    }
}

/// Axis of the principal run on the lattice A_n: 2 for A₁, 3 for A₂, 1 for A₃
/// (zero based 1, 2, 0).
pub fn rotated_axis(n: usize) -> usize {
    [1, 2, 0][n - 1]
}

/// The cell re-declared on the lattice A_n and reduced to the cubic lattice
/// in the anisotropic-density formulation.
pub fn rotated_cell(cell: &UnitCell, n: usize) -> Result<UnitCell> {
    cell.require_cubic()?;
    cell.with_lattice(rotation_lattice(n))?
        .to_cubic_equivalent(Formulation::AnisotropicDensity)
}

/// Γ^(3+n) = 2·A_n C̄_ll^eff A_nᵀ for n = 1, 2, 3.
pub fn rotated_principal_runs(cell: &UnitCell, n: usize, opts: &MmOptions) -> Result<[(Mat3, PrincipalRun); 3]> {
    let runs: Vec<(Mat3, PrincipalRun)> = (1..=3)
        .map(|k| {
            let run = principal(&rotated_cell(cell, k)?, rotated_axis(k), n, opts)?;
            Ok((gamma_from_rotated(k, &run.c), run))
        })
        .collect::<Result<_>>()?;
    Ok(runs.try_into().expect("three runs"))
}

pub(crate) fn gamma_from_rotated(k: usize, c_bar: &Mat3) -> Mat3 {
    let a: Matrix3<f64> = rotation_lattice(k);
    let ac = a.map(|v| C64::new(v, 0.0));
    ac * c_bar * ac.transpose() * C64::new(2.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::testing::{cube_cell, steel};
    use crate::cell::Material;
    use crate::tensor::{canonical_directions, christoffel, StiffnessTensor};

    fn quick() -> MmOptions {
        MmOptions {
            initial_steps: 16,
            ..MmOptions::default()
        }
    }

    #[test]
    fn homogeneous_principal_is_exact() {
        let cell = UnitCell::homogeneous(steel());
        for l in 0..3 {
            let run = principal(&cell, l, 1, &quick()).unwrap();
            let want = steel().stiffness.block(l, l);
            assert!((run.c - want).norm() <= 1e-10 * want.norm());
            assert_eq!(run.steps, 32);
        }
    }

    #[test]
    fn rotated_runs_reproduce_christoffel_for_anisotropic_medium() {
        let v = [
            [9.0, 2.0, 1.5, 0.3, -0.2, 0.4],
            [2.0, 8.0, 2.5, 0.1, 0.3, -0.1],
            [1.5, 2.5, 7.0, -0.4, 0.2, 0.2],
            [0.3, 0.1, -0.4, 3.0, 0.1, 0.2],
            [-0.2, 0.3, 0.2, 0.1, 2.5, -0.3],
            [0.4, -0.1, 0.2, 0.2, -0.3, 2.0],
        ];
        let c = StiffnessTensor::from_voigt_real(&v).unwrap().scaled(1e9);
        let cell = UnitCell::homogeneous(Material::new("aniso", 3000.0, c.clone()).unwrap());
        let runs = rotated_principal_runs(&cell, 0, &quick()).unwrap();
        let dirs = canonical_directions();
        for (k, (gamma, _)) in runs.iter().enumerate() {
            let want = christoffel(&c.blocks(), &dirs[3 + k], true).unwrap().gamma;
            assert!((gamma - want).norm() <= 1e-9 * want.norm(), "Γ^({})", 4 + k);
        }
    }

    #[test]
    fn alpha_independence() {
        let cell = cube_cell(0.125);
        let a = principal(
            &cell,
            0,
            1,
            &MmOptions {
                alpha: SHIFTS[0],
                ..quick()
            },
        )
        .unwrap();
        let b = principal(
            &cell,
            0,
            1,
            &MmOptions {
                alpha: SHIFTS[2],
                ..quick()
            },
        )
        .unwrap();
        assert!((a.c - b.c).norm() <= 1e-8 * a.c.norm());
    }

    #[test]
    fn rk4_and_magnus_agree() {
        let cell = cube_cell(0.125);
        let m = principal(&cell, 1, 1, &quick()).unwrap();
        let opts = MmOptions {
            integrator: Integrator::Rk4,
            initial_steps: 2048,
            ..MmOptions::default()
        };
        let r = principal(&cell, 1, 1, &opts).unwrap();
        assert!(
            (m.c - r.c).norm() <= 1e-8 * m.c.norm(),
            "{:.2e}",
            (m.c - r.c).norm() / m.c.norm()
        );
    }
}
