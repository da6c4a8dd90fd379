//! Spectrum with multiplicities, Riesz points, traces and `Det(Id + phi)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    complement, det, eigenvalues, identity, inverse, kernel_of_power, mat_pow, rank,
    singular_values, spectral_norm, trace, CMat,
};
use crate::operator::StructuredOperator;
use crate::potency::{ast_decompose, cn_from_ast, AstDecomposition};
use crate::reduction::active_space;
use crate::scalar::{serde_cx, Cx};
use crate::vector::HVector;

const ONE: Cx = Cx::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenpair {
    #[serde(with = "serde_cx")]
    pub lambda: Cx,
    pub multiplicity: usize,
    /// `sigma_min(B - lambda I) / max(1, ||B||)`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub contains_zero: bool,
    pub eigenpairs: Vec<Eigenpair>,
}

impl SpectralReport {
    /// Nonzero eigenvalues repeated by multiplicity.
    pub fn multiset(&self) -> Vec<Cx> {
        self.eigenpairs
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.eigenpairs.iter().map(|e| e.multiplicity).sum()
    }
}

/// Single-linkage clusters of `values` at distance `radius`.
fn cluster(values: &[Cx], radius: f64) -> Vec<Vec<Cx>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Cx>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let r = root(&mut label, i);
        match groups.iter_mut().find(|(k, _)| *k == r) {
            Some((_, g)) => g.push(v),
            None => groups.push((r, vec![v])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Eigenvalues of a square matrix with algebraic multiplicities.
///
/// Computed eigenvalues are grouped (a defective eigenvalue splits into a
/// small ring), each group is replaced by its mean, and the multiplicity is
/// confirmed as `dim Ker (B - lambda I)^n` at the rank tolerance.
pub fn eigen(b: &CMat, tol: f64) -> Result<Vec<Eigenpair>> {
    let n = b.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = spectral_norm(b).max(1.0);
    let values = eigenvalues(b)?;
    let mut pairs = Vec::new();
    for group in cluster(&values, 1e-4 * scale) {
        let lambda = group.iter().sum::<Cx>() / group.len() as f64;
        let shifted = b - identity(n) * lambda;
        let mult = kernel_of_power(&shifted, n, tol).ncols();
        let residual = singular_values(&shifted).last().copied().unwrap_or(0.0) / scale;
        if mult != group.len() {
            return Err(Error::EigenFailure(format!(
                "eigenvalue {lambda} has {} computed copies but a generalised kernel of dimension {mult}",
                group.len()
            )));
        }
        pairs.push(Eigenpair {
            lambda,
            multiplicity: mult,
            residual,
        });
    }
    pairs.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im)
            .partial_cmp(&(b.lambda.re, b.lambda.im))
            .unwrap()
    });
    Ok(pairs)
}

pub fn spectrum_from_ast(ast: &AstDecomposition, tol: f64) -> Result<SpectralReport> {
    Ok(SpectralReport {
        contains_zero: ast.index >= 1,
        eigenpairs: eigen(&ast.core_block, tol)?,
    })
}

pub fn spectrum(phi: &StructuredOperator, tol: f64) -> Result<SpectralReport> {
    spectrum_from_ast(&ast_decompose(phi, tol)?, tol)
}

/// The decomposition `E = N(lambda) ⊕ F(lambda)` at a nonzero eigenvalue.
#[derive(Debug, Clone)]
pub struct RieszPoint {
    pub lambda: Cx,
    pub n_basis: Vec<HVector>,
    /// Projector onto `N(lambda)` along `F(lambda)`.
    pub projector: StructuredOperator,
    /// `||(B - lambda)^k||` on `N(lambda)`, `k = dim N`.
    pub nilpotent_defect: f64,
    /// Smallest singular value of `B - lambda` on `F(lambda) ∩ V_act`.
    pub f_min_singular: f64,
    tol: f64,
}

impl RieszPoint {
    pub fn in_f(&self, v: &HVector) -> Result<bool> {
        let st = crate::series_tol(self.tol);
        let pv = self.projector.apply(v, st)?;
        Ok(pv.norm(st)? <= self.tol.max(1e-9) * v.norm(st)?)
    }
}

pub fn riesz_point(phi: &StructuredOperator, lambda: Cx, tol: f64) -> Result<RieszPoint> {
    let ast = ast_decompose(phi, tol)?;
    let pairs = eigen(&ast.core_block, tol)?;
    let radius = tol.sqrt() * lambda.norm().max(1.0);
    let pair = pairs
        .iter()
        .filter(|p| (p.lambda - lambda).norm() <= radius)
        .min_by(|a, b| {
            (a.lambda - lambda)
                .norm()
                .partial_cmp(&(b.lambda - lambda).norm())
                .unwrap()
        })
        .ok_or_else(|| Error::UnknownEigenvalue(format!("{lambda} is not a nonzero eigenvalue")))?;
    if lambda.norm() == 0.0 {
        return Err(Error::UnknownEigenvalue("zero is not a Riesz point".into()));
    }
    let w = ast.dim_w();
    let d = ast.dim_active();
    let bw = &ast.core_block;
    let shifted = bw - identity(w) * pair.lambda;
    let nk = kernel_of_power(&shifted, w, tol);
    let k = nk.ncols();
    // invariant complement of N(lambda) inside W: image of (B_W - lambda)^k
    let f_w = {
        let pk = mat_pow(&shifted, k.max(1));
        crate::linalg::orth(&pk, tol)
    };
    let n_act = &ast.w_coords * &nk;
    let f_act_w = &ast.w_coords * &f_w;
    let mut t = CMat::zeros(d, d);
    t.view_mut((0, 0), (d, k)).copy_from(&n_act);
    t.view_mut((0, k), (d, f_act_w.ncols())).copy_from(&f_act_w);
    t.view_mut((0, k + f_act_w.ncols()), (d, ast.u_coords.ncols()))
        .copy_from(&ast.u_coords);
    if k + f_act_w.ncols() + ast.u_coords.ncols() != d {
        return Err(Error::DegenerateTolerance {
            condition: f64::INFINITY,
        });
    }
    let t_inv = inverse(&t).ok_or(Error::DegenerateTolerance {
        condition: f64::INFINITY,
    })?;
    let e_act = &n_act * t_inv.rows(0, k);
    // E = E P, and P = B^D o phi
    let projector = ast.after_operator(&(&e_act * &ast.drazin_act))?;
    let b_t = &t_inv * &ast.space.matrix * &t;
    let n_block = b_t.view((0, 0), (k, k)).into_owned() - identity(k) * pair.lambda;
    let nilpotent_defect = mat_pow(&n_block, k).norm();
    let fd = d - k;
    let f_block = b_t.view((k, k), (fd, fd)).into_owned() - identity(fd) * pair.lambda;
    let f_min_singular = singular_values(&f_block)
        .last()
        .copied()
        .unwrap_or(f64::INFINITY);
    Ok(RieszPoint {
        lambda: pair.lambda,
        n_basis: ast.space.lift_columns(&n_act),
        projector,
        nilpotent_defect,
        f_min_singular,
        tol,
    })
}

/// Trace of the operator restricted to `W`.
pub fn tate_from_ast(ast: &AstDecomposition) -> Cx {
    trace(&ast.core_block)
}

/// Trace of the map induced on `V_act / (U ∩ V_act)`, in the orthonormal
/// complement basis of `U ∩ V_act`.
pub fn leray_from_ast(ast: &AstDecomposition) -> Cx {
    let c = complement(&ast.u_coords, ast.dim_active());
    trace(&(c.adjoint() * &ast.space.matrix * &c))
}

/// Sum of the nonzero eigenvalues of the core part `phi_1`, computed from its
/// own compression.
pub fn riesz_from_ast(ast: &AstDecomposition, tol: f64) -> Result<Cx> {
    let core = cn_from_ast(ast)?.core;
    let space = active_space(&core, tol)?;
    let b1 = &space.matrix;
    if b1.nrows() == 0 {
        return Ok(Cx::new(0.0, 0.0));
    }
    let r = rank(b1, tol);
    let mut ev = eigenvalues(b1)?;
    ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    Ok(ev.iter().take(r).sum())
}

/// `tr(block) + sum <left_k, right_k>`
pub fn diagonal_trace(phi: &StructuredOperator, tol: f64) -> Result<Cx> {
    let mut t = trace(phi.block());
    for term in phi.terms() {
        t += term.left.inner(&term.right, crate::series_tol(tol))?;
    }
    Ok(t)
}

pub fn tate_trace(phi: &StructuredOperator, tol: f64) -> Result<Cx> {
    Ok(tate_from_ast(&ast_decompose(phi, tol)?))
}

pub fn leray_trace(phi: &StructuredOperator, tol: f64) -> Result<Cx> {
    Ok(leray_from_ast(&ast_decompose(phi, tol)?))
}

pub fn riesz_trace(phi: &StructuredOperator, tol: f64) -> Result<Cx> {
    riesz_from_ast(&ast_decompose(phi, tol)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Determinants {
    /// `det(I + B|_W)`
    #[serde(with = "serde_cx")]
    pub restriction: Cx,
    /// `prod (1 + lambda_i)^mult`
    #[serde(with = "serde_cx")]
    pub product: Cx,
    /// `1 + sum_r e_r`
    #[serde(with = "serde_cx")]
    pub exterior: Cx,
    /// `det(I + B)` on the whole active space.
    #[serde(with = "serde_cx")]
    pub active: Cx,
}

impl Determinants {
    /// Largest pairwise difference relative to `max(1, |values|)`.
    pub fn discrepancy(&self) -> f64 {
        relative_spread(&[self.restriction, self.product, self.exterior, self.active])
    }
}

fn relative_spread(values: &[Cx]) -> f64 {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            worst = worst.max((a - b).norm());
        }
    }
    worst / scale
}

/// Elementary symmetric functions `e_1..e_n` of the eigenvalues of `m`,
/// obtained from the power sums `tr(m^k)` by Newton's identities.
pub fn elementary_symmetric(m: &CMat) -> Vec<Cx> {
    let n = m.nrows();
    let mut p = Vec::with_capacity(n);
    let mut pw = identity(n);
    for _ in 0..n {
        pw = &pw * m;
        p.push(trace(&pw));
    }
    let mut e = vec![ONE];
    for k in 1..=n {
        let mut s = Cx::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            s += e[k - i] * p[i - 1] * sign;
        }
        e.push(s / k as f64);
    }
    e.remove(0);
    e
}

/// `tr Λ^r m` for `r = 1..n`: sums of principal `r x r` minors. Beyond
/// `MINOR_LIMIT` the count of minors explodes and Newton's identities are used.
pub fn exterior_traces(m: &CMat) -> Vec<Cx> {
    let n = m.nrows();
    if n > MINOR_LIMIT {
        return elementary_symmetric(m);
    }
    let mut e = vec![Cx::new(0.0, 0.0); n];
    for mask in 1u32..(1u32 << n) {
        let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let r = idx.len();
        let minor = CMat::from_fn(r, r, |a, b| m[(idx[a], idx[b])]);
        e[r - 1] += det(&minor);
    }
    e
}

const MINOR_LIMIT: usize = 14;

pub fn determinants_from_ast(ast: &AstDecomposition, pairs: &[Eigenpair]) -> Determinants {
    let w = ast.dim_w();
    let restriction = det(&(identity(w) + &ast.core_block));
    let product = pairs.iter().fold(ONE, |acc, e| {
        acc * (ONE + e.lambda).powi(e.multiplicity as i32)
    });
    let exterior = ONE + exterior_traces(&ast.core_block).iter().sum::<Cx>();
    let d = ast.dim_active();
    let active = det(&(identity(d) + &ast.space.matrix));
    Determinants {
        restriction,
        product,
        exterior,
        active,
    }
}

pub fn det_id_plus(phi: &StructuredOperator, tol: f64) -> Result<Determinants> {
    let ast = ast_decompose(phi, tol)?;
    let pairs = eigen(&ast.core_block, tol)?;
    Ok(determinants_from_ast(&ast, &pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceDetReport {
    #[serde(with = "serde_cx")]
    pub tate: Cx,
    #[serde(with = "serde_cx")]
    pub leray: Cx,
    #[serde(with = "serde_cx")]
    pub riesz: Cx,
    #[serde(with = "serde_cx")]
    pub diagonal: Cx,
    #[serde(with = "serde_cx")]
    pub det_restriction: Cx,
    #[serde(with = "serde_cx")]
    pub det_product: Cx,
    #[serde(with = "serde_cx")]
    pub det_exterior: Cx,
    #[serde(with = "serde_cx")]
    pub det_active: Cx,
    /// Largest of `|t - t'| / (1 + |tate|)` over the traces.
    pub trace_discrepancy: f64,
    /// Largest relative pairwise determinant difference.
    pub det_discrepancy: f64,
    pub max_discrepancy: f64,
}

pub fn trace_det_from_ast(ast: &AstDecomposition, tol: f64) -> Result<TraceDetReport> {
    let phi = ast.operator();
    let tate = tate_from_ast(ast);
    let leray = leray_from_ast(ast);
    let riesz = riesz_from_ast(ast, tol)?;
    let diagonal = diagonal_trace(phi, tol)?;
    let trace_discrepancy = [leray, riesz, diagonal]
        .iter()
        .map(|t| (t - tate).norm())
        .fold(0.0, f64::max)
        / (1.0 + tate.norm());
    let pairs = eigen(&ast.core_block, tol)?;
    let d = determinants_from_ast(ast, &pairs);
    let det_discrepancy = d.discrepancy();
    Ok(TraceDetReport {
        tate,
        leray,
        riesz,
        diagonal,
        det_restriction: d.restriction,
        det_product: d.product,
        det_exterior: d.exterior,
        det_active: d.active,
        trace_discrepancy,
        det_discrepancy,
        max_discrepancy: trace_discrepancy.max(det_discrepancy),
    })
}

pub fn trace_det_report(phi: &StructuredOperator, tol: f64) -> Result<TraceDetReport> {
    trace_det_from_ast(&ast_decompose(phi, tol)?, tol)
}
