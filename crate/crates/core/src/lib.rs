//! Bounded finite potent operators on a separable Hilbert space.
//!
//! An operator is represented as a finite block on `u_1..u_N` plus finitely
//! many rank-one terms `v -> <v, right> left` whose factors may carry
//! analytically summable tails. On top of that representation the crate
//! computes the index, the AST and CN decompositions, the Drazin inverse,
//! spectra, traces, determinants and adjoint structure.

pub mod adjoint;
pub mod conformance;
pub mod error;
pub mod example;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod poly;
pub mod potency;
pub mod reduction;
pub mod report;
pub mod scalar;
pub mod sequence;
pub mod spectral;
pub mod vector;

pub use error::{Error, OpValidationError, Result, TermSide};
pub use example::worked_example;
pub use operator::{Ambient, RankOne, StructuredOperator};
pub use scalar::Cx;
pub use sequence::{TailKind, TailSequence};
pub use vector::HVector;

/// Default rank-decision tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance for theorem-level identity checks.
pub const CHECK_TOL: f64 = 1e-7;

/// Series tolerance derived from a rank tolerance.
pub(crate) fn series_tol(tol: f64) -> f64 {
    (tol * 1e-5).clamp(1e-15, 1e-12)
}
