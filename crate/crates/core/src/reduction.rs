//! Reduction of a structured operator to a matrix on a finite-dimensional
//! invariant subspace containing its image, plus dense truncations used as
//! brute-force oracles.

use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMat};
use crate::operator::{RankOne, StructuredOperator};
use crate::scalar::Cx;
use crate::series_tol;
use crate::vector::HVector;

const ZERO: Cx = Cx::new(0.0, 0.0);

/// Orthonormal basis of `span{u_i : row i of the block is nonzero} + span{left_k}`
/// with the compression of the operator to it. The space contains `Im phi`,
/// hence is invariant.
#[derive(Debug, Clone)]
pub struct ActiveSpace {
    pub basis: Vec<HVector>,
    /// `matrix[(j, i)] = <phi q_i, q_j>`
    pub matrix: CMat,
    /// Coordinates of the images of `u_1..u_N` and of each right factor;
    /// their span is `Im phi`.
    pub image: CMat,
    /// Largest reconstruction defect `||phi q_i - sum_j B_ji q_j||`.
    pub residual: f64,
}

impl ActiveSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `sum_i coords[i] q_i`
    pub fn lift(&self, coords: &[Cx]) -> HVector {
        let mut v = HVector::zero();
        for (c, q) in coords.iter().zip(&self.basis) {
            v.axpy(*c, q);
        }
        v
    }

    pub fn lift_columns(&self, m: &CMat) -> Vec<HVector> {
        (0..m.ncols())
            .map(|k| {
                let col: Vec<Cx> = m.column(k).iter().copied().collect();
                self.lift(&col)
            })
            .collect()
    }

    /// Coordinates `<v, q_j>`; exact reconstruction only for `v` in the space.
    pub fn coords_of(&self, v: &HVector, tol: f64) -> Result<Vec<Cx>> {
        self.basis
            .iter()
            .map(|q| v.inner(q, series_tol(tol)))
            .collect()
    }

    /// Structured form of `R o phi`, where `R` is a matrix acting on this
    /// space in the orthonormal basis. Because `Im phi` lies in the space,
    /// every polynomial in `phi` without constant term has this shape.
    pub fn operator_after(
        &self,
        phi: &StructuredOperator,
        r: &CMat,
        tol: f64,
    ) -> Result<StructuredOperator> {
        let d = self.dim();
        debug_assert_eq!(r.shape(), (d, d));
        let mut terms = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<Cx> = r.column(j).iter().copied().collect();
            terms.push(RankOne::new(self.lift(&col), self.basis[j].clone()));
        }
        let n = phi.cutoff();
        let r_op =
            StructuredOperator::from_parts_unchecked(phi.ambient(), n, CMat::zeros(n, n), terms)
                .compacted();
        r_op.compose(phi, series_tol(tol))
    }

    /// `max |<q_i, q_j> - delta_ij|`
    pub fn gram_defect(&self, tol: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let g = a.inner(b, series_tol(tol))?;
                let target = if i == j { Cx::new(1.0, 0.0) } else { ZERO };
                worst = worst.max((g - target).norm());
            }
        }
        Ok(worst)
    }
}

/// Modified Gram-Schmidt (with one re-orthogonalisation pass) over the
/// basis vectors hit by the block followed by the left factors; candidates whose residual is at
/// most `tol * max(1, ||c||)` are dropped.
pub fn active_space(phi: &StructuredOperator, tol: f64) -> Result<ActiveSpace> {
    let st = series_tol(tol);
    let n = phi.cutoff();
    let block = phi.block();
    let mut basis: Vec<HVector> = (1..=n)
        .filter(|&i| (0..n).any(|j| block[(i - 1, j)] != ZERO))
        .map(HVector::basis)
        .collect();
    for t in phi.terms() {
        let c = &t.left;
        let c_norm = c.norm(st)?;
        if c_norm == 0.0 {
            continue;
        }
        let mut w = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let h = w.inner(q, st)?;
                w.axpy(-h, q);
            }
        }
        let w_norm = w.norm(st)?;
        if w_norm > tol * c_norm.max(1.0) {
            basis.push(w.scale(Cx::new(1.0 / w_norm, 0.0)));
        }
    }
    let d = basis.len();
    let mut matrix = CMat::zeros(d, d);
    let mut residual: f64 = 0.0;
    for (i, q) in basis.iter().enumerate() {
        let y = phi.apply(q, st)?;
        let mut rebuilt = HVector::zero();
        for (j, p) in basis.iter().enumerate() {
            let b = y.inner(p, st)?;
            matrix[(j, i)] = b;
            rebuilt.axpy(b, p);
        }
        residual = residual.max(y.sub(&rebuilt).norm(st)?);
    }
    let generators: Vec<HVector> = (1..=n)
        .map(HVector::basis)
        .chain(phi.terms().iter().map(|t| t.right.clone()))
        .collect();
    let mut image = CMat::zeros(d, generators.len());
    for (k, g) in generators.iter().enumerate() {
        let y = phi.apply(g, st)?;
        for (j, p) in basis.iter().enumerate() {
            image[(j, k)] = y.inner(p, st)?;
        }
    }
    Ok(ActiveSpace {
        basis,
        matrix,
        image,
        residual,
    })
}

/// Dense matrix of `P_K phi P_K` in the coordinates `u_1..u_K`.
pub fn truncate(phi: &StructuredOperator, k: usize) -> Result<CMat> {
    if k < phi.cutoff() {
        return Err(Error::InvalidArgument(format!(
            "truncation size {k} is below the cutoff {}",
            phi.cutoff()
        )));
    }
    let n = phi.cutoff();
    let mut m = CMat::zeros(k, k);
    m.view_mut((0, 0), (n, n)).copy_from(phi.block());
    for t in phi.terms() {
        let l = t.left.coords(k);
        let r = t.right.coords(k);
        for i in 0..k {
            if l[i] == ZERO {
                continue;
            }
            for j in 0..k {
                m[(i, j)] += l[i] * r[j].conj();
            }
        }
    }
    Ok(m)
}

/// Scale used to make rank decisions on the compression relative.
pub fn compression_scale(space: &ActiveSpace) -> f64 {
    frobenius(&space.matrix).max(1.0)
}
