//! Structure of `phi*` relative to `phi`: matching dimensions and indices,
//! `W_{phi*} ⊥ U_phi`, `W_phi ⊥ U_{phi*}`, adjoint CN parts, conjugate
//! spectrum, trace and determinant.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::matching_distance;
use crate::operator::{action_distance, StructuredOperator};
use crate::potency::{ast_decompose, cn_from_ast, AstDecomposition};
use crate::series_tol;
use crate::spectral::{determinants_from_ast, eigen, tate_from_ast};
use crate::vector::HVector;

/// Extra basis vectors past the largest finite support used as `U` probes.
pub const U_PROBE_EXTRA: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjointReport {
    pub dim_w: usize,
    pub dim_w_star: usize,
    pub index: usize,
    pub index_star: usize,
    pub dim_match: bool,
    pub index_match: bool,
    /// `max |<w*, u>| / ||u||` over `W_{phi*}` basis and `U_phi` probes.
    pub u_star_perp_w: f64,
    /// `max |<w, u*>| / ||u*||` over `W_phi` basis and `U_{phi*}` probes.
    pub w_star_perp_u: f64,
    /// Largest `U`-membership defect among the probes used above.
    pub u_probe_defect: f64,
    pub cn_adjoint: f64,
    pub spectrum_conj: f64,
    pub trace_conj: f64,
    pub det_conj: f64,
}

impl AdjointReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.u_star_perp_w,
            self.w_star_perp_u,
            self.u_probe_defect,
            self.cn_adjoint,
            self.spectrum_conj,
            self.trace_conj,
            self.det_conj,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.dim_match && self.index_match && self.max_residual() <= tol
    }
}

/// Vectors of `U_phi`: the basis of `U ∩ V_act`, and `(I - P) c` for
/// `c = u_1..u_{M+extra}` and every tail shape, `P` the core projector.
pub fn u_probes(ast: &AstDecomposition) -> Result<Vec<HVector>> {
    let phi = ast.operator();
    let st = series_tol(ast.tol());
    let mut out = ast.u_active_basis();
    for c in phi.probes(U_PROBE_EXTRA) {
        let u = ast.u_component(&c)?;
        let n = u.norm(st)?;
        if n > 1e-12 {
            out.push(u.scale(crate::scalar::real(1.0 / n)));
        }
    }
    Ok(out)
}

fn max_defect(ast: &AstDecomposition, probes: &[HVector]) -> Result<f64> {
    probes
        .iter()
        .try_fold(0.0f64, |acc, v| Ok(acc.max(ast.u_defect(v)?)))
}

/// `max |<w, u>| / (||w|| ||u||)`
fn perp_residual(ws: &[HVector], us: &[HVector], tol: f64) -> Result<f64> {
    let st = series_tol(tol);
    let mut worst: f64 = 0.0;
    for w in ws {
        let nw = w.norm(st)?;
        for u in us {
            let nu = u.norm(st)?;
            if nw == 0.0 || nu == 0.0 {
                continue;
            }
            worst = worst.max(w.inner(u, st)?.norm() / (nw * nu));
        }
    }
    Ok(worst)
}

/// Probe distance between the CN parts of `phi*` and the adjoints of the CN
/// parts of `phi`.
pub fn adjoint_cn_from(
    ast: &AstDecomposition,
    ast_star: &AstDecomposition,
    tol: f64,
) -> Result<f64> {
    let st = series_tol(tol);
    let cn = cn_from_ast(ast)?;
    let cn_star = cn_from_ast(ast_star)?;
    let a = action_distance(&cn_star.core, &cn.core.adjoint(), st)?;
    let b = action_distance(&cn_star.nilpotent, &cn.nilpotent.adjoint(), st)?;
    Ok(a.max(b))
}

pub fn adjoint_cn(phi: &StructuredOperator, tol: f64) -> Result<f64> {
    adjoint_cn_from(
        &ast_decompose(phi, tol)?,
        &ast_decompose(&phi.adjoint(), tol)?,
        tol,
    )
}

/// Conjugate-spectrum matching distance, trace and determinant residuals.
pub fn adjoint_spectrum_trace_det_from(
    ast: &AstDecomposition,
    ast_star: &AstDecomposition,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    let pairs = eigen(&ast.core_block, tol)?;
    let pairs_star = eigen(&ast_star.core_block, tol)?;
    let expand = |ps: &[crate::spectral::Eigenpair], conj: bool| -> Vec<crate::scalar::Cx> {
        ps.iter()
            .flat_map(|e| {
                std::iter::repeat_n(
                    if conj { e.lambda.conj() } else { e.lambda },
                    e.multiplicity,
                )
            })
            .collect()
    };
    let a = expand(&pairs, true);
    let b = expand(&pairs_star, false);
    let spectrum = if a.len() == b.len() {
        matching_distance(&a, &b)
    } else {
        f64::INFINITY
    };
    let t = tate_from_ast(ast);
    let trace = (tate_from_ast(ast_star) - t.conj()).norm() / (1.0 + t.norm());
    let d = determinants_from_ast(ast, &pairs).restriction;
    let d_star = determinants_from_ast(ast_star, &pairs_star).restriction;
    let det = (d_star - d.conj()).norm() / d.norm().max(1.0);
    Ok((spectrum, trace, det))
}

pub fn adjoint_spectrum_trace_det(phi: &StructuredOperator, tol: f64) -> Result<(f64, f64, f64)> {
    adjoint_spectrum_trace_det_from(
        &ast_decompose(phi, tol)?,
        &ast_decompose(&phi.adjoint(), tol)?,
        tol,
    )
}

pub fn adjoint_report_from(
    ast: &AstDecomposition,
    ast_star: &AstDecomposition,
    tol: f64,
) -> Result<AdjointReport> {
    let u = u_probes(ast)?;
    let u_star = u_probes(ast_star)?;
    let u_star_perp_w = perp_residual(&ast_star.w_basis, &u, tol)?;
    let w_star_perp_u = perp_residual(&ast.w_basis, &u_star, tol)?;
    let u_probe_defect = max_defect(ast, &u)?.max(max_defect(ast_star, &u_star)?);
    let cn_adjoint = adjoint_cn_from(ast, ast_star, tol)?;
    let (spectrum_conj, trace_conj, det_conj) =
        adjoint_spectrum_trace_det_from(ast, ast_star, tol)?;
    Ok(AdjointReport {
        dim_w: ast.dim_w(),
        dim_w_star: ast_star.dim_w(),
        index: ast.index,
        index_star: ast_star.index,
        dim_match: ast.dim_w() == ast_star.dim_w(),
        index_match: ast.index == ast_star.index,
        u_star_perp_w,
        w_star_perp_u,
        u_probe_defect,
        cn_adjoint,
        spectrum_conj,
        trace_conj,
        det_conj,
    })
}

pub fn adjoint_structure(phi: &StructuredOperator, tol: f64) -> Result<AdjointReport> {
    adjoint_report_from(
        &ast_decompose(phi, tol)?,
        &ast_decompose(&phi.adjoint(), tol)?,
        tol,
    )
}
