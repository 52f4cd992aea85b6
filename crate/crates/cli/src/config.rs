//! Run configuration in TOML. Moduli are in GPa, densities in g/cm³.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Deserialize;

use phonomog::homogenize::{Method, Options};
use phonomog::mm::{Integrator, MmOptions};
use phonomog::tensor::canonical_directions;
use phonomog::units::{g_per_cm3, gpa};
use phonomog::{Formulation, Material, Shape, StiffnessTensor, UnitCell};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub materials: Vec<MaterialSpec>,
    pub cell: CellSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    pub c11: Option<f64>,
    pub c66: Option<f64>,
    /// Full 6×6 Voigt matrix, order 11, 22, 33, 23, 13, 12.
    pub voigt: Option<Vec<Vec<f64>>>,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Homogeneous,
    Cube,
    Sphere,
    Spheroid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub shape: ShapeKind,
    /// Matrix material; defaults to the first entry.
    pub matrix: Option<String>,
    /// Inclusion material; defaults to the second entry.
    pub inclusion: Option<String>,
    /// Inclusion volume fraction (cube or sphere).
    pub fraction: Option<f64>,
    /// Cube side.
    pub side: Option<f64>,
    /// Sphere diameter.
    pub diameter: Option<f64>,
    /// Spheroid axis along x₁ (the other two axes span the cell).
    pub a: Option<f64>,
    /// Rows of the lattice matrix A; columns are the lattice vectors.
    pub lattice: Option<[[f64; 3]; 3]>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Pwe,
    Mm,
    #[default]
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Pwe => vec![Method::Pwe],
            MethodChoice::Mm => vec![Method::Mm],
            MethodChoice::Both => vec![Method::Pwe, Method::Mm],
        }
    }
}

impl std::str::FromStr for MethodChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pwe" => Ok(Self::Pwe),
            "mm" => Ok(Self::Mm),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown method {s:?} (pwe, mm or both)")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: MethodChoice,
    pub n: Vec<usize>,
    pub directions: Option<Vec<[f64; 3]>>,
    /// Resolvent shift as [re, im].
    pub alpha: [f64; 2],
    pub integrator: String,
    pub initial_steps: usize,
    pub max_steps: usize,
    pub tolerance: f64,
    pub formulation: String,
    pub pwe_cap: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let mm = MmOptions::default();
        Self {
            method: MethodChoice::Both,
            n: vec![0, 1, 2],
            directions: None,
            alpha: [mm.alpha.re, mm.alpha.im],
            integrator: "magnus".into(),
            initial_steps: mm.initial_steps,
            max_steps: mm.max_steps,
            tolerance: mm.tol,
            formulation: "anisotropic-density".into(),
            pwe_cap: phonomog::pwe::DEFAULT_SIZE_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Fraction,
    Aspect,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{field} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.materials.is_empty() {
            return Err(bad("at least one [[materials]] entry is required"));
        }
        for m in &self.materials {
            self.material(m)?;
        }
        if self.solver.n.is_empty() {
            return Err(bad("solver.n must list at least one truncation"));
        }
        positive("solver.tolerance", self.solver.tolerance)?;
        if self.solver.initial_steps == 0 || self.solver.max_steps < self.solver.initial_steps {
            return Err(bad(
                "solver.initial_steps must be positive and at most solver.max_steps",
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(bad("sweep.values is empty"));
            }
            match (s.parameter, self.cell.shape) {
                (SweepParameter::Fraction, ShapeKind::Cube | ShapeKind::Sphere) => {}
                (SweepParameter::Aspect, ShapeKind::Spheroid) => {}
                (p, shape) => return Err(bad(format!("sweep parameter {p:?} does not apply to shape {shape:?}"))),
            }
        }
        self.options()?;
        self.directions()?;
        self.cell_at(None)?;
        Ok(())
    }

    fn material(&self, m: &MaterialSpec) -> Result<Material, CliError> {
        let name = &m.name;
        let density = g_per_cm3(positive(&format!("materials.{name}.density"), m.density)?);
        let stiffness = match (&m.voigt, m.c11, m.c66) {
            (Some(v), None, None) => {
                if v.len() != 6 || v.iter().any(|r| r.len() != 6) {
                    return Err(bad(format!("materials.{name}.voigt must be 6×6")));
                }
                let arr: [[f64; 6]; 6] = std::array::from_fn(|i| std::array::from_fn(|j| gpa(v[i][j])));
                StiffnessTensor::from_voigt_real(&arr).map_err(|e| bad(format!("materials.{name}.voigt: {e}")))?
            }
            (None, Some(c11), Some(c66)) => {
                let c11 = positive(&format!("materials.{name}.c11"), c11)?;
                let c66 = positive(&format!("materials.{name}.c66"), c66)?;
                StiffnessTensor::from_c11_c66(gpa(c11), gpa(c66))
            }
            _ => return Err(bad(format!("materials.{name}: give either c11 and c66 or voigt"))),
        };
        Material::new(name.clone(), density, stiffness).map_err(|e| bad(format!("materials.{name}: {e}")))
    }

    fn named(&self, key: &str, name: &Option<String>, default: usize) -> Result<Material, CliError> {
        let spec = match name {
            Some(n) => self
                .materials
                .iter()
                .find(|m| &m.name == n)
                .ok_or_else(|| bad(format!("cell.{key}: no material {n:?}")))?,
            None => self
                .materials
                .get(default)
                .ok_or_else(|| bad(format!("cell.{key}: needs a material entry")))?,
        };
        self.material(spec)
    }

    /// The cell, with the sweep parameter overriding the shape size when given.
    pub fn cell_at(&self, param: Option<f64>) -> Result<UnitCell, CliError> {
        let c = &self.cell;
        let matrix = self.named("matrix", &c.matrix, 0)?;
        let lattice = c
            .lattice
            .map(|r| Matrix3::from_fn(|i, j| r[i][j]))
            .unwrap_or_else(Matrix3::identity);
        let unit = |field: &str, v: f64| -> Result<f64, CliError> {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(bad(format!("{field} must lie in [0, 1], got {v}")))
            }
        };
        let need =
            |field: &str, v: Option<f64>| v.ok_or_else(|| bad(format!("cell.{field} is required for this shape")));
        let shape = match c.shape {
            ShapeKind::Homogeneous => None,
            ShapeKind::Cube => {
                let side = match (param, c.fraction, c.side) {
                    (Some(f), _, _) => unit("sweep value", f)?.cbrt(),
                    (None, Some(f), None) => unit("cell.fraction", f)?.cbrt(),
                    (None, None, Some(s)) => unit("cell.side", s)?,
                    _ => return Err(bad("cube cells need exactly one of cell.fraction and cell.side")),
                };
                Some(Shape::Cube { side })
            }
            ShapeKind::Sphere => {
                let diameter = match (param, c.fraction, c.diameter) {
                    (Some(f), _, _) => (6.0 * unit("sweep value", f)? / PI).cbrt(),
                    (None, Some(f), None) => (6.0 * unit("cell.fraction", f)? / PI).cbrt(),
                    (None, None, Some(d)) => d,
                    _ => return Err(bad("sphere cells need exactly one of cell.fraction and cell.diameter")),
                };
                Some(Shape::Sphere {
                    diameter: unit("sphere diameter", diameter)?,
                })
            }
            ShapeKind::Spheroid => {
                let a = match param {
                    Some(a) => unit("sweep value", a)?,
                    None => unit("cell.a", need("a", c.a)?)?,
                };
                Some(Shape::Spheroid { a })
            }
        };
        let cell = match shape {
            None => UnitCell::new(vec![matrix], Shape::Homogeneous, lattice),
            Some(shape) => {
                let inclusion = self.named("inclusion", &c.inclusion, 1)?;
                UnitCell::new(vec![matrix, inclusion], shape, lattice)
            }
        };
        cell.map_err(|e| bad(format!("cell: {e}")))
    }

    pub fn options(&self) -> Result<Options, CliError> {
        let s = &self.solver;
        let integrator = match s.integrator.as_str() {
            "magnus" => Integrator::Magnus,
            "rk4" => Integrator::Rk4,
            other => return Err(bad(format!("solver.integrator {other:?} (magnus or rk4)"))),
        };
        let formulation = match s.formulation.as_str() {
            "anisotropic-density" => Formulation::AnisotropicDensity,
            "cosserat" => Formulation::Cosserat,
            other => {
                return Err(bad(format!(
                    "solver.formulation {other:?} (anisotropic-density or cosserat)"
                )))
            }
        };
        let alpha = Complex64::new(s.alpha[0], s.alpha[1]);
        if (alpha - 1.0).norm() < 1e-12 {
            return Err(bad("solver.alpha must differ from 1"));
        }
        Ok(Options {
            mm: MmOptions {
                integrator,
                alpha,
                initial_steps: s.initial_steps,
                max_steps: s.max_steps,
                tol: s.tolerance,
            },
            pwe_cap: s.pwe_cap,
            formulation,
            strict: false,
        })
    }

    pub fn directions(&self) -> Result<Vec<Vector3<f64>>, CliError> {
        match &self.solver.directions {
            None => Ok(canonical_directions().to_vec()),
            Some(list) if list.is_empty() => Err(bad("solver.directions is empty")),
            Some(list) => list
                .iter()
                .map(|d| {
                    let v = Vector3::new(d[0], d[1], d[2]);
                    if (v.norm() - 1.0).abs() > 1e-9 {
                        Err(bad(format!("solver.directions: {d:?} is not a unit vector")))
                    } else {
                        Ok(v / v.norm())
                    }
                })
                .collect(),
        }
    }
}
