//! Index, annihilating polynomial, AST decomposition `V = W ⊕ U`, core
//! projector, Drazin inverse and core-nilpotent decomposition.
//!
//! Everything is computed on the active space, where the operator acts as a
//! matrix `B`. `W` is the stable image of the chain `Im phi ⊇ Im phi^2 ⊇ ...`
//! and `U ∩ V_act = Ker B^m`. Operators built from the splitting (projector,
//! Drazin inverse, core part) all have the form `R o phi` with `R` a matrix on
//! the active space, which keeps them inside the representable class.

use crate::error::{Error, Result};
use crate::linalg::{
    complement, det, identity, inverse, kernel_of_power, mat_pow, orth, rank_threshold,
    singular_values, spectral_norm, CMat,
};
use crate::operator::{max_probe_residual, probe_family, Ambient, StructuredOperator};
use crate::poly::{inverse_mod, Poly};
use crate::reduction::{active_space, ActiveSpace};
use crate::scalar::Cx;
use crate::series_tol;
use crate::vector::HVector;

const ONE: Cx = Cx::new(1.0, 0.0);

/// `x^nil_order * core(x)` annihilates the operator; `core(0) != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Annihilator {
    pub nil_order: usize,
    pub core: Poly,
}

impl Annihilator {
    pub fn polynomial(&self) -> Poly {
        Poly::monomial(self.nil_order).mul(&self.core)
    }
}

#[derive(Debug, Clone)]
pub struct AstDecomposition {
    pub space: ActiveSpace,
    pub index: usize,
    /// Orthonormal basis of `W` in active-space coordinates (columns).
    pub w_coords: CMat,
    pub w_basis: Vec<HVector>,
    /// Orthonormal basis of `U ∩ V_act = Ker B^m` in active-space coordinates.
    pub u_coords: CMat,
    /// Matrix of the operator restricted to `W` in the basis `w_coords`.
    pub core_block: CMat,
    pub annihilator: Annihilator,
    /// `s` with `s = 0 mod x^m`, `s = 1 mod p`; `s(phi)` is the projector onto `W` along `U`.
    pub core_selector: Poly,
    /// `u` with `u(phi)` the Drazin inverse.
    pub drazin_poly: Poly,
    /// Distance between the polynomial route and the splitting route on `V_act`.
    pub polynomial_residual: f64,
    /// Condition estimate of the `W ⊕ (U ∩ V_act)` basis.
    pub condition: f64,
    /// Projector onto `W` along `U ∩ V_act`, on the active space.
    pub projector_act: CMat,
    /// Drazin inverse of `B` on the active space.
    pub drazin_act: CMat,
    /// Projector onto `W` along `U` on the whole space.
    pub core_projector: StructuredOperator,
    operator: StructuredOperator,
    tol: f64,
}

impl AstDecomposition {
    pub fn dim_w(&self) -> usize {
        self.w_coords.ncols()
    }

    pub fn dim_active(&self) -> usize {
        self.space.dim()
    }

    pub fn operator(&self) -> &StructuredOperator {
        &self.operator
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Basis of `U ∩ V_act` as vectors.
    pub fn u_active_basis(&self) -> Vec<HVector> {
        self.space.lift_columns(&self.u_coords)
    }

    /// `||phi^m v|| / ||v||`
    pub fn u_defect(&self, v: &HVector) -> Result<f64> {
        let st = series_tol(self.tol);
        let nv = v.norm(st)?;
        if nv == 0.0 {
            return Ok(0.0);
        }
        let mut y = v.clone();
        for _ in 0..self.index {
            y = self.operator.apply(&y, st)?;
        }
        Ok(y.norm(st)? / nv)
    }

    /// Membership in `U = Ker phi^m`.
    pub fn in_u(&self, v: &HVector, tol: f64) -> Result<bool> {
        Ok(self.u_defect(v)? <= tol)
    }

    /// Component of `v` in `U` along `W`: `v - P v`.
    pub fn u_component(&self, v: &HVector) -> Result<HVector> {
        Ok(v.sub(&self.core_projector.apply(v, series_tol(self.tol))?))
    }

    /// `R o phi` for a matrix `R` on the active space.
    pub fn after_operator(&self, r: &CMat) -> Result<StructuredOperator> {
        self.space.operator_after(&self.operator, r, self.tol)
    }

    pub fn drazin_inverse(&self) -> Result<StructuredOperator> {
        self.after_operator(&(&self.drazin_act * &self.drazin_act))
    }

    pub fn core_part(&self) -> Result<StructuredOperator> {
        self.after_operator(&self.projector_act)
    }
}

/// `W` and `U ∩ V_act` on the active space, and the number of steps `t` until
/// the image chain `B^t M` (`M = Im phi` in coordinates) reaches `W`.
///
/// With `m` the step at which `Ker B^t` stabilises, `U ∩ V_act = Ker B^m` and
/// `W = Im B^m = (Ker (B^H)^m)^⊥`, both from the stable one-step kernel chain.
/// Since `W ⊆ M`, `M = W ⊕ Z` with `Z = P_U M`, and `B^t M = W` exactly when
/// `B^t Z = 0`.
fn image_chain(space: &ActiveSpace, tol: f64) -> Result<(usize, CMat, CMat)> {
    let degenerate = || Error::DegenerateTolerance {
        condition: f64::INFINITY,
    };
    let b = &space.matrix;
    let d = space.dim();
    let u = kernel_of_power(b, d.max(1), tol);
    let m = (1..=d.max(1))
        .find(|&t| kernel_of_power(b, t, tol).ncols() == u.ncols())
        .unwrap_or(d.max(1));
    let w = complement(&kernel_of_power(&b.adjoint(), m, tol), d);
    if w.ncols() + u.ncols() != d {
        return Err(degenerate());
    }
    let q = orth(&space.image, tol);
    if q.ncols() < w.ncols() {
        return Err(degenerate());
    }
    if u.ncols() == 0 || q.ncols() == 0 {
        return Ok((0, w, u));
    }
    let mut t = CMat::zeros(d, d);
    t.view_mut((0, 0), (d, w.ncols())).copy_from(&w);
    t.view_mut((0, w.ncols()), (d, u.ncols())).copy_from(&u);
    let t_inv = inverse(&t).ok_or_else(degenerate)?;
    // unnormalised, so directions of Im phi near the rank threshold carry
    // their own small weight; the threshold grows with B^t M like the rank
    // thresholds, tol max(1, norm)
    let mut z = &u * t_inv.rows(w.ncols(), u.ncols()) * &space.image;
    let b_norm = spectral_norm(b).max(1.0);
    let mut thr = tol * space.image.norm();
    let mut steps = 0;
    while z.norm() > thr {
        if steps > d {
            return Err(degenerate());
        }
        z = b * &z;
        thr *= b_norm;
        steps += 1;
    }
    Ok((steps, w, u))
}

fn is_automorphism(phi: &StructuredOperator, dim_w: usize) -> bool {
    matches!(phi.ambient(), Ambient::Finite(n) if dim_w == n)
}

pub fn global_index(phi: &StructuredOperator, tol: f64) -> Result<usize> {
    let space = active_space(phi, tol)?;
    let (steps, w, _) = image_chain(&space, tol)?;
    if is_automorphism(phi, w.ncols()) {
        return Ok(0);
    }
    Ok(steps + 1)
}

/// Minimal polynomial of a square matrix from the first linear dependency
/// among `I, A, A^2, ...` (matrices flattened), found on the normalised
/// matrix and rescaled.
pub fn minimal_polynomial(a: &CMat, tol: f64) -> Poly {
    let w = a.nrows();
    if w == 0 {
        return Poly::one();
    }
    let scale = a.norm();
    if scale == 0.0 {
        return Poly::monomial(1);
    }
    let an = a / Cx::new(scale, 0.0);
    let dep_tol = tol.max(1e-12) * 10.0;
    let flat = |m: &CMat| nalgebra::DVector::from_iterator(w * w, m.iter().copied());
    let mut powers = vec![identity(w)];
    for k in 1..=w {
        let next = powers.last().unwrap() * &an;
        let cols: Vec<_> = powers.iter().map(flat).collect();
        let kmat = CMat::from_columns(&cols);
        let rhs = -flat(&next);
        let svd = kmat.clone().svd(true, true);
        let c = svd.solve(&rhs, 1e-14).expect("svd with vectors");
        let resid = (&kmat * &c - &rhs).norm() / rhs.norm().max(1.0);
        if resid <= dep_tol || k == w {
            // x^k + sum c_i x^i for the normalised matrix; undo the scaling
            let mut coeffs: Vec<Cx> = (0..k)
                .map(|i| c[i] * Cx::new(scale.powi((k - i) as i32), 0.0))
                .collect();
            coeffs.push(ONE);
            if k == w && resid > dep_tol {
                // numerically no dependency below the full degree: the
                // characteristic polynomial is the minimal one
                return charpoly_from_eigen_free(a);
            }
            return Poly::new(coeffs);
        }
        powers.push(next);
    }
    unreachable!()
}

/// Characteristic polynomial via the Faddeev-LeVerrier recursion.
pub fn charpoly_from_eigen_free(a: &CMat) -> Poly {
    let n = a.nrows();
    let mut coeffs = vec![Cx::new(0.0, 0.0); n + 1];
    coeffs[n] = ONE;
    let mut m = CMat::zeros(n, n);
    for k in 1..=n {
        m = a * &m + identity(n) * coeffs[n - k + 1];
        let am = a * &m;
        coeffs[n - k] = -crate::linalg::trace(&am) / (k as f64);
    }
    Poly::new(coeffs)
}

/// Polynomials `s` and `u` from the Chinese remainder theorem on the coprime
/// factors `x^m` and `p`.
fn selector_polynomials(m: usize, p: &Poly, tol: f64) -> Result<(Poly, Poly)> {
    let c0 = p.coeff(0);
    let pscale = p.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    if c0.norm() < tol * pscale.min(1.0) || c0.norm() < tol {
        return Err(Error::DegenerateTolerance {
            condition: pscale / c0.norm().max(f64::MIN_POSITIVE),
        });
    }
    if p.degree() == Some(0) {
        // W = {0}
        let s = if m == 0 { Poly::one() } else { Poly::zero() };
        return Ok((s, Poly::zero()));
    }
    let xm = Poly::monomial(m);
    let modulus = xm.mul(p);
    let a = inverse_mod(&xm, p, 1e-13).ok_or(Error::DegenerateTolerance {
        condition: f64::INFINITY,
    })?;
    let s = xm.mul(&a).rem(&modulus);
    // x^-1 mod p is -(p - c0) / (c0 x)
    let (v, _) = p.sub(&Poly::constant(c0)).div_rem(&Poly::monomial(1));
    let v = v.scale(-ONE / c0);
    let u = v.mul(&s).rem(&modulus);
    Ok((s, u))
}

pub fn ast_decompose(phi: &StructuredOperator, tol: f64) -> Result<AstDecomposition> {
    let space = active_space(phi, tol)?;
    let b = space.matrix.clone();
    let d = space.dim();
    let (steps, w_coords, u_act) = image_chain(&space, tol)?;
    let w = w_coords.ncols();
    let index = if is_automorphism(phi, w) {
        0
    } else {
        steps + 1
    };
    let u_coords = u_act;
    let core_block = w_coords.adjoint() * &b * &w_coords;
    let thr = rank_threshold(&b, tol);
    let sv = singular_values(&core_block);
    if u_coords.ncols() + w != d || sv.last().is_some_and(|&s| s <= thr) {
        return Err(Error::DegenerateTolerance {
            condition: sv.first().copied().unwrap_or(1.0)
                / sv.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE),
        });
    }
    let mut t = CMat::zeros(d, d);
    t.view_mut((0, 0), (d, w)).copy_from(&w_coords);
    t.view_mut((0, w), (d, d - w)).copy_from(&u_coords);
    let t_inv = inverse(&t).ok_or(Error::DegenerateTolerance {
        condition: f64::INFINITY,
    })?;
    let condition = crate::linalg::condition(&t);
    if !condition.is_finite() || condition * tol > 1e-2 {
        return Err(Error::DegenerateTolerance { condition });
    }
    let left_rows = t_inv.rows(0, w).into_owned();
    let projector_act = &w_coords * &left_rows;
    let core_inv = inverse(&core_block).ok_or(Error::DegenerateTolerance {
        condition: f64::INFINITY,
    })?;
    let drazin_act = &w_coords * &core_inv * &left_rows;

    let p = minimal_polynomial(&core_block, tol);
    let (s, u) = selector_polynomials(index, &p, tol)?;
    let pr =
        |poly: &Poly, target: &CMat| (poly.eval_matrix(&b) - target).norm() / (1.0 + target.norm());
    let polynomial_residual = if d == 0 {
        0.0
    } else {
        pr(&s, &projector_act).max(pr(&u, &drazin_act))
    };

    let core_projector = space.operator_after(phi, &drazin_act, tol)?;
    let w_basis = space.lift_columns(&w_coords);
    Ok(AstDecomposition {
        space,
        index,
        w_coords,
        w_basis,
        u_coords,
        core_block,
        annihilator: Annihilator {
            nil_order: index,
            core: p,
        },
        core_selector: s,
        drazin_poly: u,
        polynomial_residual,
        condition,
        projector_act,
        drazin_act,
        core_projector,
        operator: phi.clone(),
        tol,
    })
}

pub fn drazin_inverse(phi: &StructuredOperator, tol: f64) -> Result<StructuredOperator> {
    ast_decompose(phi, tol)?.drazin_inverse()
}

#[derive(Debug, Clone)]
pub struct CnDecomposition {
    pub core: StructuredOperator,
    pub nilpotent: StructuredOperator,
}

/// `phi = phi_1 + phi_2` with `phi_1 = phi phi^D phi` of index at most one and
/// `phi_2` nilpotent, `phi_1 phi_2 = phi_2 phi_1 = 0`.
pub fn cn_decompose(phi: &StructuredOperator, tol: f64) -> Result<CnDecomposition> {
    cn_from_ast(&ast_decompose(phi, tol)?)
}

pub fn cn_from_ast(ast: &AstDecomposition) -> Result<CnDecomposition> {
    let core = ast.core_part()?;
    let nilpotent = ast.operator().sub(&core)?;
    Ok(CnDecomposition { core, nilpotent })
}

/// `(true, Some(order))` exactly when `W = {0}`.
pub fn is_nilpotent(phi: &StructuredOperator, tol: f64) -> Result<(bool, Option<usize>)> {
    let ast = ast_decompose(phi, tol)?;
    Ok(if ast.dim_w() == 0 {
        (true, Some(ast.index))
    } else {
        (false, None)
    })
}

pub fn quasi_compact_order(phi: &StructuredOperator, tol: f64) -> Result<usize> {
    global_index(phi, tol)
}

/// Probe distance between `phi^n` and `phi_1^n`; vanishes for `n >= i(phi)`.
pub fn power_identity_residual(
    ast: &AstDecomposition,
    core: &StructuredOperator,
    n: usize,
) -> Result<f64> {
    let phi = ast.operator();
    let st = series_tol(ast.tol);
    let probes = probe_family(&[phi, core], 5);
    let pow = |op: &StructuredOperator, v: &HVector| -> Result<HVector> {
        let mut y = v.clone();
        for _ in 0..n {
            y = op.apply(&y, st)?;
        }
        Ok(y)
    };
    max_probe_residual(&probes, st, |v| pow(phi, v), |v| pow(core, v))
}

#[derive(Debug, Clone)]
pub enum InvariantSubspace {
    /// `W_phi`, a nontrivial finite-dimensional closed invariant subspace.
    CoreSpace(Vec<HVector>),
    /// `Ker phi^power` for a nilpotent operator of order `power + 1`.
    KernelPower {
        power: usize,
        operator: StructuredOperator,
    },
    Degenerate(String),
}

impl InvariantSubspace {
    /// Membership test for the `KernelPower` case.
    pub fn contains(&self, v: &HVector, tol: f64) -> Result<bool> {
        match self {
            InvariantSubspace::KernelPower { power, operator } => {
                let st = series_tol(tol);
                let mut y = v.clone();
                for _ in 0..*power {
                    y = operator.apply(&y, st)?;
                }
                Ok(y.norm(st)? <= tol * v.norm(st)?.max(f64::MIN_POSITIVE))
            }
            _ => Err(Error::InvalidArgument(
                "membership is defined for kernel subspaces".into(),
            )),
        }
    }
}

/// A nontrivial closed invariant subspace.
pub fn invariant_subspace(phi: &StructuredOperator, tol: f64) -> Result<InvariantSubspace> {
    if phi.ambient() != Ambient::Infinite {
        return Err(Error::InvalidArgument(
            "invariant subspace search needs an infinite-dimensional space".into(),
        ));
    }
    let ast = ast_decompose(phi, tol)?;
    if ast.dim_w() > 0 {
        return Ok(InvariantSubspace::CoreSpace(ast.w_basis));
    }
    if ast.index >= 2 {
        return Ok(InvariantSubspace::KernelPower {
            power: ast.index - 1,
            operator: phi.clone(),
        });
    }
    Ok(InvariantSubspace::Degenerate(
        "nilpotent of order 1 means the operator is zero; every closed subspace is invariant"
            .into(),
    ))
}

/// `det` of the basis-change used by the splitting, exposed for diagnostics.
pub fn splitting_determinant(ast: &AstDecomposition) -> Cx {
    let mut t = CMat::zeros(ast.dim_active(), ast.dim_active());
    let w = ast.dim_w();
    t.view_mut((0, 0), (ast.dim_active(), w))
        .copy_from(&ast.w_coords);
    t.view_mut((0, w), (ast.dim_active(), ast.u_coords.ncols()))
        .copy_from(&ast.u_coords);
    det(&t)
}

/// `B^k` on the active space (diagnostics and tests).
pub fn active_power(ast: &AstDecomposition, k: usize) -> CMat {
    mat_pow(&ast.space.matrix, k)
}

/// Orthonormal complement of `U ∩ V_act` inside the active space.
pub fn u_complement(ast: &AstDecomposition) -> CMat {
    complement(&ast.u_coords, ast.dim_active())
}
