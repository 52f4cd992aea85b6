//! Python bindings. Quantities are SI: Pa, kg/m³, m/s.

use nalgebra::{Matrix3, Vector3};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use phonomog_core::homogenize::{self, Method, Options};
use phonomog_core::{Formulation, Shape};

create_exception!(phonomog, PhonomogError, PyException);

fn err(e: phonomog_core::Error) -> PyErr {
    PhonomogError::new_err(e.to_string())
}

fn vector(k: [f64; 3]) -> Vector3<f64> {
    Vector3::new(k[0], k[1], k[2])
}

fn formulation(name: &str) -> PyResult<Formulation> {
    match name {
        "anisotropic-density" => Ok(Formulation::AnisotropicDensity),
        "cosserat" => Ok(Formulation::Cosserat),
        other => Err(PyValueError::new_err(format!(
            "unknown formulation {other:?} (anisotropic-density or cosserat)"
        ))),
    }
}

#[pyclass(frozen, skip_from_py_object, module = "phonomog")]
#[derive(Clone)]
struct Material(phonomog_core::Material);

#[pymethods]
impl Material {
    #[staticmethod]
    fn isotropic(name: &str, c11: f64, c66: f64, density: f64) -> PyResult<Self> {
        phonomog_core::Material::isotropic(name, c11, c66, density)
            .map(Self)
            .map_err(err)
    }

    /// Full 6×6 Voigt matrix, order 11, 22, 33, 23, 13, 12.
    #[staticmethod]
    fn from_voigt(name: &str, voigt: [[f64; 6]; 6], density: f64) -> PyResult<Self> {
        let c = phonomog_core::StiffnessTensor::from_voigt_real(&voigt).map_err(err)?;
        phonomog_core::Material::new(name, density, c).map(Self).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn density(&self) -> f64 {
        self.0.density
    }

    fn __repr__(&self) -> String {
        format!("Material({:?}, density={})", self.0.name, self.0.density)
    }
}

#[pyclass(frozen, module = "phonomog")]
struct UnitCell(phonomog_core::UnitCell);

#[pymethods]
impl UnitCell {
    #[staticmethod]
    fn homogeneous(material: &Material) -> Self {
        Self(phonomog_core::UnitCell::homogeneous(material.0.clone()))
    }

    /// `shape` is "cube" (size = side), "sphere" (diameter) or "spheroid"
    /// (axis a along x₁).
    #[staticmethod]
    fn two_phase(matrix: &Material, inclusion: &Material, shape: &str, size: f64) -> PyResult<Self> {
        let shape = match shape {
            "cube" => Shape::Cube { side: size },
            "sphere" => Shape::Sphere { diameter: size },
            "spheroid" => Shape::Spheroid { a: size },
            other => return Err(PyValueError::new_err(format!("unknown shape {other:?}"))),
        };
        phonomog_core::UnitCell::two_phase(matrix.0.clone(), inclusion.0.clone(), shape)
            .map(Self)
            .map_err(err)
    }

    /// Same cell on lattice A, given by rows; its columns are the lattice vectors.
    fn with_lattice(&self, rows: [[f64; 3]; 3]) -> PyResult<Self> {
        self.0
            .with_lattice(Matrix3::from_fn(|i, j| rows[i][j]))
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn volume_fractions(&self) -> Vec<f64> {
        self.0.volume_fractions()
    }

    #[getter]
    fn mean_density(&self) -> f64 {
        self.0.mean_density()
    }
}

#[pyclass(frozen, module = "phonomog")]
struct EffectiveResult(homogenize::EffectiveResult);

#[pymethods]
impl EffectiveResult {
    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    /// Real part of the 6×6 Voigt matrix of C_eff in Pa.
    #[getter]
    fn voigt(&self) -> PyResult<Vec<Vec<f64>>> {
        let v = self.0.c_eff.voigt().map_err(err)?;
        Ok((0..6).map(|i| (0..6).map(|j| v[(i, j)].re).collect()).collect())
    }

    #[getter]
    fn d_asymmetry(&self) -> f64 {
        self.0.diagnostics.d_asymmetry
    }

    #[getter]
    fn elapsed(&self) -> f64 {
        self.0.diagnostics.elapsed.as_secs_f64()
    }

    /// Ascending speeds (m/s) along the unit vector `kappa`.
    fn speeds(&self, kappa: [f64; 3]) -> PyResult<[f64; 3]> {
        homogenize::speeds(&self.0, &vector(kappa)).map_err(err)
    }
}

#[pyclass(frozen, module = "phonomog")]
struct Bounds(homogenize::BoundsReport);

#[pymethods]
impl Bounds {
    /// Ascending speed bounds c_Bα(κ).
    fn speed_bounds(&self, kappa: [f64; 3]) -> PyResult<[f64; 3]> {
        self.0.speed_bounds(&vector(kappa)).map_err(err)
    }

    fn voigt_speeds(&self, kappa: [f64; 3]) -> PyResult<[f64; 3]> {
        self.0.voigt_speeds(&vector(kappa)).map_err(err)
    }

    /// ((c_l, c_t) lower, (c_l, c_t) upper) for isotropic two-phase cells.
    #[getter]
    fn hashin_shtrikman_speeds(&self) -> Option<((f64, f64), (f64, f64))> {
        self.0.hs.map(|h| (h.lower_speeds, h.upper_speeds))
    }
}

#[pyfunction]
#[pyo3(signature = (cell, method = "mm", n = 1, formulation = "anisotropic-density", strict = false))]
fn effective_moduli(
    py: Python<'_>,
    cell: &UnitCell,
    method: &str,
    n: usize,
    formulation: &str,
    strict: bool,
) -> PyResult<EffectiveResult> {
    let method: Method = method.parse().map_err(err)?;
    let opts = Options {
        formulation: self::formulation(formulation)?,
        strict,
        ..Options::default()
    };
    let cell = cell.0.clone();
    py.detach(move || homogenize::effective_moduli(&cell, method, n, &opts))
        .map(EffectiveResult)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (cell, formulation = "anisotropic-density"))]
fn bounds(cell: &UnitCell, formulation: &str) -> PyResult<Bounds> {
    homogenize::bounds(&cell.0, self::formulation(formulation)?)
        .map(Bounds)
        .map_err(err)
}

#[pymodule]
#[pyo3(name = "phonomog")]
fn phonomog_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PhonomogError", m.py().get_type::<PhonomogError>())?;
    m.add_class::<Material>()?;
    m.add_class::<UnitCell>()?;
    m.add_class::<EffectiveResult>()?;
    m.add_class::<Bounds>()?;
    m.add_function(wrap_pyfunction!(effective_moduli, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    Ok(())
}
