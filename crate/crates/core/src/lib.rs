//! Quasistatic effective elastic moduli of 3D periodic composites.
//!
//! Two solvers compute the effective Christoffel matrices of a unit cell: a
//! plane-wave expansion ([`pwe`]) and a monodromy-matrix method that
//! integrates a Riccati equation for the propagator resolvent ([`mm`]). The
//! [`homogenize`] module turns six Christoffel matrices into all 21 moduli and
//! evaluates closed-form bounds.

pub mod cell;
pub mod error;
pub mod homogenize;
pub mod linalg;
pub mod mm;
pub mod pwe;
pub mod special;
pub mod tensor;
pub mod units;

pub use cell::{Formulation, Material, Shape, UnitCell};
pub use error::{Error, Result};
pub use tensor::{BlockCjl, ChristoffelMatrix, DTensor, StiffnessTensor, SymmetryClass};
