use std::time::Duration;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{effective_moduli, principal_gammas, speeds_from_gamma, Method, Options};
use crate::cell::UnitCell;
use crate::error::Result;
use crate::tensor::{christoffel, unit_direction};

/// Speeds of one (method, N) pair.
#[derive(Clone, Debug)]
pub struct StudyRow {
    pub method: Method,
    pub n: usize,
    /// 3(2N + 1)³ or 6(2N + 1)².
    pub matrix_side: usize,
    /// Ascending speeds (m/s) per requested direction.
    pub speeds: Vec<[f64; 3]>,
    pub elapsed: Duration,
    pub max_steps: Option<usize>,
    pub max_pruning_residual: f64,
    pub redraws: usize,
    pub d_asymmetry: Option<f64>,
}

/// The coordinate axis a unit direction lies along, if any.
fn principal_axis(k: &Vector3<f64>) -> Option<usize> {
    (0..3).find(|&l| (k[l].abs() - 1.0).abs() < 1e-12)
}

/// Speeds along `directions` for every (method, N), run concurrently and
/// returned sorted by (method, N). Directions along coordinate axes of a
/// cubic-lattice cell need only the principal runs.
pub fn convergence_study(
    cell: &UnitCell,
    methods: &[Method],
    n_list: &[usize],
    directions: &[Vector3<f64>],
    opts: &Options,
) -> Result<Vec<StudyRow>> {
    let dirs: Vec<Vector3<f64>> = directions
        .iter()
        .map(|k| unit_direction(k, opts.strict))
        .collect::<Result<_>>()?;
    let axes: Option<Vec<usize>> = dirs.iter().map(principal_axis).collect();
    let mut jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| n_list.iter().map(move |&n| (m, n)))
        .collect();
    jobs.sort();
    jobs.dedup();
    let rho = cell.mean_density();
    jobs.par_iter()
        .map(|&(method, n)| {
            let (speeds, diag) = match (&axes, cell.is_cubic()) {
                (Some(axes), true) => {
                    let mut needed = axes.clone();
                    needed.sort();
                    needed.dedup();
                    let (g, diag) = principal_gammas(cell, method, n, &needed, opts)?;
                    let speeds = axes
                        .iter()
                        .map(|l| speeds_from_gamma(&g[needed.iter().position(|m| m == l).unwrap()], rho))
                        .collect::<Result<Vec<_>>>()?;
                    (speeds, diag)
                }
                _ => {
                    let r = effective_moduli(cell, method, n, opts)?;
                    let speeds = dirs
                        .iter()
                        .map(|k| speeds_from_gamma(&christoffel(&r.form, k, true)?.gamma, rho))
                        .collect::<Result<Vec<_>>>()?;
                    (speeds, r.diagnostics)
                }
            };
            let full = axes.is_none() || !cell.is_cubic();
            Ok(StudyRow {
                method,
                n,
                matrix_side: method.matrix_side(n),
                speeds,
                elapsed: diag.elapsed,
                max_steps: diag.max_steps(),
                max_pruning_residual: diag.max_pruning_residual(),
                redraws: diag.redraws(),
                d_asymmetry: full.then_some(diag.d_asymmetry),
            })
        })
        .collect()
}
