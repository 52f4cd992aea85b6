use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetry violation: {0}")]
    Symmetry(String),

    #[error("singular lattice matrix (|det A| = {det:.3e}, ‖A‖ = {norm:.3e})")]
    SingularLattice { det: f64, norm: f64 },

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate x_l = {0} outside [0, 1]")]
    CoordinateOutOfRange(f64),

    #[error("non-physical material: {0}")]
    NotPositiveDefinite(String),

    #[error("PWE matrix C0 is numerically singular (non-positive pivot at index {pivot} of {size})")]
    SingularPwe { pivot: usize, size: usize },

    #[error("PWE system side {side} exceeds the configured cap {cap}")]
    PweTooLarge { side: usize, cap: usize },

    #[error("resolvent diverged at x_l = {x:.6} (‖R‖ grew by {growth:.3e}) for shift α = {alpha}")]
    Divergence {
        x: f64,
        growth: f64,
        alpha: num_complex::Complex64,
    },

    #[error("resolvent integration failed for every shift in {tried:?}")]
    ShiftsExhausted { tried: Vec<num_complex::Complex64> },

    #[error("pruning residual {residual:.3e} above tolerance {tol:.1e}; increase the number of integration steps (currently {steps})")]
    PruningResidual { residual: f64, tol: f64, steps: usize },

    #[error("Schur block T3 is singular")]
    SingularSchur,

    #[error("effective matrix skew part {skew:.3e} exceeds tolerance {tol:.1e}")]
    NotHermitian { skew: f64, tol: f64 },

    #[error("step doubling did not reach tolerance {tol:.1e} within {steps} steps (last change {change:.3e})")]
    NotConverged { tol: f64, steps: usize, change: f64 },

    #[error("monodromy matrix overflowed (‖M0‖ = {norm:.3e}); use the resolvent path for this truncation")]
    MonodromyOverflow { norm: f64 },

    #[error("negative Christoffel eigenvalue {0:.6e}: loss of positivity")]
    NegativeEigenvalue(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-unit direction |κ| = {0}")]
    NonUnitDirection(f64),
}
