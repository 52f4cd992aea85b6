use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{back_map, speeds_from_gamma};
use crate::cell::{Formulation, UnitCell};
use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use crate::tensor::{BlockCjl, Mat3, C64};

/// Relative change between quadrature doublings at which ⟨⟨C_ll⟩_l̄⁻¹⟩_l
/// is accepted.
pub const QUADRATURE_TOL: f64 = 1e-9;
const GL_ORDER: usize = 16;
const INITIAL_PANELS: usize = 4;
const MAX_PANELS: usize = 1 << 14;

/// Hashin–Shtrikman bounds for two isotropic phases (Pa) and the speeds
/// (m/s) they imply.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsBounds {
    pub bulk: (f64, f64),
    pub shear: (f64, f64),
    /// (c_l, c_t) from the lower bulk and shear bounds.
    pub lower_speeds: (f64, f64),
    pub upper_speeds: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct BoundsReport {
    /// ⟨C_ll⟩ per axis of the cubic-lattice cell.
    pub voigt: [Mat3; 3],
    /// ⟨⟨C_ll⟩_l̄⁻¹⟩_l⁻¹ per axis of the cubic-lattice cell.
    pub mm_zero: [Mat3; 3],
    /// Physical form of the Voigt average, Γ_V(κ) = ⟨C_jl⟩ κ_j κ_l.
    pub voigt_form: BlockCjl,
    /// Physical form of Γ_B: ⟨C_al⟩ off the diagonal, mm_zero on it.
    pub bound_form: BlockCjl,
    pub mean_rho: f64,
    /// Present for two-phase cells of isotropic materials.
    pub hs: Option<HsBounds>,
}

impl BoundsReport {
    pub fn gamma_b(&self, kappa: &Vector3<f64>) -> Mat3 {
        self.bound_form.contract(kappa)
    }

    /// c_Bα(κ), ascending.
    pub fn speed_bounds(&self, kappa: &Vector3<f64>) -> Result<[f64; 3]> {
        speeds_from_gamma(&self.gamma_b(kappa), self.mean_rho)
    }

    /// Speeds of the Voigt average, ascending.
    pub fn voigt_speeds(&self, kappa: &Vector3<f64>) -> Result<[f64; 3]> {
        speeds_from_gamma(&self.voigt_form.contract(kappa), self.mean_rho)
    }
}

fn section_mean(cell: &UnitCell, l: usize, x: f64) -> Result<Mat3> {
    Ok(cell.slice_table(l, x, 0)?.coeff([0, 0])[(l, l)])
}

fn hermitian_inverse(m: &Mat3, l: usize, x: f64) -> Result<Mat3> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let chol = h.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "section average ⟨C_ll⟩ at x_{} = {x:.6} is not positive definite",
            l + 1
        ))
    })?;
    Ok(chol.inverse())
}

/// ∫₀¹ ⟨C_ll⟩_l̄⁻¹ dx_l by composite Gauss–Legendre on each breakpoint-free
/// segment after x = a + L(1 − cos πs)/2, which smooths square-root
/// behaviour of the section at the segment ends.
fn integrate_inverse(cell: &UnitCell, l: usize, panels: usize) -> Result<Mat3> {
    let (nodes, weights) = gauss_legendre(GL_ORDER);
    let mut edges = vec![0.0];
    edges.extend(cell.breakpoints(l));
    edges.push(1.0);
    let mut acc = Mat3::zeros();
    for w in edges.windows(2) {
        let len = w[1] - w[0];
        let m = ((len * panels as f64).ceil() as usize).max(1);
        for p in 0..m {
            for (t, wt) in nodes.iter().zip(&weights) {
                let s = (p as f64 + 0.5 * (1.0 + t)) / m as f64;
                let x = w[0] + 0.5 * len * (1.0 - (PI * s).cos());
                let jac = 0.5 * len * PI * (PI * s).sin() * 0.5 * wt / m as f64;
                acc += hermitian_inverse(&section_mean(cell, l, x)?, l, x)? * C64::from(jac);
            }
        }
    }
    Ok(acc)
}

/// ⟨⟨C_ll⟩_l̄⁻¹⟩_l⁻¹ of a cubic-lattice cell, doubling the quadrature until the
/// relative change is at most [`QUADRATURE_TOL`].
pub fn mm_zero_bound(cell: &UnitCell, l: usize) -> Result<Mat3> {
    if !cell.is_cubic() {
        return Err(Error::InvalidCell(
            "the section bound needs a cubic-lattice cell".into(),
        ));
    }
    if l > 2 {
        return Err(Error::InvalidArgument(format!("axis index {l} out of range")));
    }
    let mut panels = INITIAL_PANELS;
    let mut prev = integrate_inverse(cell, l, panels)?;
    loop {
        panels *= 2;
        let next = integrate_inverse(cell, l, panels)?;
        let change = (next - prev).norm() / next.norm();
        if change <= QUADRATURE_TOL {
            return hermitian_inverse(&next, l, f64::NAN);
        }
        if panels >= MAX_PANELS {
            return Err(Error::NotConverged {
                tol: QUADRATURE_TOL,
                steps: panels * GL_ORDER,
                change,
            });
        }
        prev = next;
    }
}

/// Walpole's form of the two-phase bounds, which reduces to the
/// Hashin–Shtrikman bounds when the phases are well ordered:
/// K = [Σ fᵢ/(Kᵢ + 4μ/3)]⁻¹ − 4μ/3 with μ = μ_min or μ_max, and
/// G = [Σ fᵢ/(μᵢ + ζ)]⁻¹ − ζ with ζ = μ(9K + 8μ)/(6(K + 2μ)) at
/// (K_min, μ_min) or (K_max, μ_max).
pub fn hashin_shtrikman(cell: &UnitCell) -> Result<HsBounds> {
    let mats = cell.materials();
    if mats.len() != 2 {
        return Err(Error::Unsupported(format!(
            "Hashin–Shtrikman bounds need two phases, got {}",
            mats.len()
        )));
    }
    let moduli: Vec<(f64, f64)> = mats
        .iter()
        .map(|m| {
            m.isotropic_moduli().ok_or_else(|| {
                Error::Unsupported(format!(
                    "Hashin–Shtrikman bounds need isotropic phases ({} is not)",
                    m.name
                ))
            })
        })
        .collect::<Result<_>>()?;
    let f = cell.volume_fractions();
    let k_of = |mu: f64| -> f64 {
        let s: f64 = (0..2).map(|i| f[i] / (moduli[i].0 + 4.0 / 3.0 * mu)).sum();
        1.0 / s - 4.0 / 3.0 * mu
    };
    let zeta = |k: f64, mu: f64| mu * (9.0 * k + 8.0 * mu) / (6.0 * (k + 2.0 * mu));
    let g_of = |z: f64| -> f64 {
        let s: f64 = (0..2).map(|i| f[i] / (moduli[i].1 + z)).sum();
        1.0 / s - z
    };
    let (k_min, k_max) = (moduli[0].0.min(moduli[1].0), moduli[0].0.max(moduli[1].0));
    let (mu_min, mu_max) = (moduli[0].1.min(moduli[1].1), moduli[0].1.max(moduli[1].1));
    let bulk = (k_of(mu_min), k_of(mu_max));
    let shear = (g_of(zeta(k_min, mu_min)), g_of(zeta(k_max, mu_max)));
    let rho = cell.mean_density();
    let speeds = |k: f64, g: f64| (((k + 4.0 / 3.0 * g) / rho).sqrt(), (g / rho).sqrt());
    Ok(HsBounds {
        bulk,
        shear,
        lower_speeds: speeds(bulk.0, shear.0),
        upper_speeds: speeds(bulk.1, shear.1),
    })
}

/// Voigt, section (MM N = 0) and, where applicable, Hashin–Shtrikman bounds.
pub fn bounds(cell: &UnitCell, formulation: Formulation) -> Result<BoundsReport> {
    let reduced = cell.to_cubic_equivalent(formulation)?;
    let mean = reduced.fourier3d([0, 0, 0])?;
    let voigt: [Mat3; 3] = std::array::from_fn(|l| mean[(l, l)]);
    let mm_zero = [
        mm_zero_bound(&reduced, 0)?,
        mm_zero_bound(&reduced, 1)?,
        mm_zero_bound(&reduced, 2)?,
    ];
    let sym = BlockCjl::from_fn(|j, l| (mean[(j, l)] + mean[(l, j)]) * C64::from(0.5));
    let mut bound = sym.clone();
    for l in 0..3 {
        bound[(l, l)] = mm_zero[l];
    }
    let hs = match hashin_shtrikman(cell) {
        Ok(h) => Some(h),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BoundsReport {
        voigt,
        mm_zero,
        voigt_form: back_map(&sym, cell.lattice(), formulation),
        bound_form: back_map(&bound, cell.lattice(), formulation),
        mean_rho: cell.mean_density(),
        hs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::testing::{cube_cell, epoxy, spheroid_cell, steel};
    use crate::cell::Shape;
    use crate::tensor::hermitian_eigenvalues;

    #[test]
    fn homogeneous_bounds_are_exact() {
        let cell = UnitCell::homogeneous(steel());
        let b = bounds(&cell, Formulation::AnisotropicDensity).unwrap();
        let k = Vector3::new(0.48, 0.6, 0.64);
        let want = steel().stiffness.blocks().contract(&k);
        assert!((b.gamma_b(&k) - want).norm() <= 1e-12 * want.norm());
        assert!(b.hs.is_none());
    }

    #[test]
    fn cube_section_bound_is_closed_form() {
        // Inside the slab the section mean is s²C_St + (1 − s²)C_Ep.
        let f: f64 = 0.3;
        let s = f.cbrt();
        let cell = cube_cell(f);
        let got = mm_zero_bound(&cell, 0).unwrap();
        let (st, ep) = (steel().stiffness.block(0, 0), epoxy().stiffness.block(0, 0));
        let inside = st * C64::from(s * s) + ep * C64::from(1.0 - s * s);
        let inv = inside.try_inverse().unwrap() * C64::from(s) + ep.try_inverse().unwrap() * C64::from(1.0 - s);
        let want = inv.try_inverse().unwrap();
        assert!((got - want).norm() <= 1e-9 * want.norm());
    }

    #[test]
    fn spheroid_quadrature_converges() {
        let cell = spheroid_cell(0.9);
        for l in 0..3 {
            let b = mm_zero_bound(&cell, l).unwrap();
            let v = cell.fourier3d([0, 0, 0]).unwrap()[(l, l)];
            let gap = hermitian_eigenvalues(&(v - b));
            assert!(gap[0] > 0.0, "axis {l}: {gap:?}");
        }
    }

    #[test]
    fn hs_collapses_at_pure_phases() {
        for (f, m) in [(0.0, epoxy()), (1.0, steel())] {
            let cell = UnitCell::two_phase(epoxy(), steel(), Shape::Cube { side: f64::cbrt(f) }).unwrap();
            let hs = hashin_shtrikman(&cell).unwrap();
            let (k, g) = m.isotropic_moduli().unwrap();
            for v in [hs.bulk.0, hs.bulk.1] {
                assert!((v - k).abs() <= 1e-9 * k);
            }
            for v in [hs.shear.0, hs.shear.1] {
                assert!((v - g).abs() <= 1e-9 * g);
            }
        }
    }

    #[test]
    fn hs_bracket_between_reuss_and_voigt() {
        let cell = cube_cell(0.125);
        let hs = hashin_shtrikman(&cell).unwrap();
        let f = [0.875, 0.125];
        let m = [epoxy().isotropic_moduli().unwrap(), steel().isotropic_moduli().unwrap()];
        let voigt_k = f[0] * m[0].0 + f[1] * m[1].0;
        let reuss_k = 1.0 / (f[0] / m[0].0 + f[1] / m[1].0);
        assert!(reuss_k < hs.bulk.0 && hs.bulk.0 < hs.bulk.1 && hs.bulk.1 < voigt_k);
        assert!(hs.shear.0 < hs.shear.1);
    }

    #[test]
    fn anisotropic_phase_has_no_hs() {
        let c = crate::tensor::StiffnessTensor::from_voigt_real(&[
            [9.0, 2.0, 1.5, 0.0, 0.0, 0.0],
            [2.0, 8.0, 2.5, 0.0, 0.0, 0.0],
            [1.5, 2.5, 7.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 3.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 2.5, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 2.0],
        ])
        .unwrap()
        .scaled(1e9);
        let m = crate::cell::Material::new("ortho", 3000.0, c).unwrap();
        let cell = UnitCell::two_phase(epoxy(), m, Shape::Cube { side: 0.5 }).unwrap();
        assert!(matches!(hashin_shtrikman(&cell), Err(Error::Unsupported(_))));
        assert!(bounds(&cell, Formulation::AnisotropicDensity).unwrap().hs.is_none());
    }
}
