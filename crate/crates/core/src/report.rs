//! One-shot summary of an operator, shared by the command line and the C
//! interface.

use serde::Serialize;

use crate::error::Result;
use crate::io::fingerprint;
use crate::operator::{Ambient, StructuredOperator};
use crate::potency::ast_decompose;
use crate::spectral::{spectrum_from_ast, trace_det_from_ast, SpectralReport, TraceDetReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub fingerprint: String,
    pub ambient: String,
    pub cutoff: usize,
    pub rank_one_terms: usize,
    pub dim_active: usize,
    pub dim_w: usize,
    pub dim_u_active: usize,
    pub index: usize,
    pub nilpotent: bool,
    /// Coefficients of `x^m p(x)`, constant term first, as `[re, im]`.
    pub annihilator: Vec<[f64; 2]>,
    pub splitting_condition: f64,
    pub polynomial_residual: f64,
    pub spectrum: SpectralReport,
    pub traces: TraceDetReport,
}

pub fn analyze(phi: &StructuredOperator, tol: f64) -> Result<Analysis> {
    let ast = ast_decompose(phi, tol)?;
    let spectrum = spectrum_from_ast(&ast, tol)?;
    let traces = trace_det_from_ast(&ast, tol)?;
    Ok(Analysis {
        fingerprint: fingerprint(phi),
        ambient: match phi.ambient() {
            Ambient::Infinite => "infinite".into(),
            Ambient::Finite(n) => format!("finite({n})"),
        },
        cutoff: phi.cutoff(),
        rank_one_terms: phi.terms().len(),
        dim_active: ast.dim_active(),
        dim_w: ast.dim_w(),
        dim_u_active: ast.u_coords.ncols(),
        index: ast.index,
        nilpotent: ast.dim_w() == 0,
        annihilator: ast
            .annihilator
            .polynomial()
            .coeffs()
            .iter()
            .map(|c| [c.re, c.im])
            .collect(),
        splitting_condition: ast.condition,
        polynomial_residual: ast.polynomial_residual,
        spectrum,
        traces,
    })
}
