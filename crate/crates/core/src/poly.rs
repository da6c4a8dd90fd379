//! Dense univariate polynomials over `Cx`, coefficients in increasing degree.

use crate::linalg::{identity, CMat};
use crate::scalar::Cx;

const ZERO: Cx = Cx::new(0.0, 0.0);
const ONE: Cx = Cx::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Cx>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Cx>) -> Self {
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(ONE)
    }

    pub fn constant(c: Cx) -> Self {
        Poly::new(vec![c])
    }

    /// `x^k`
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![ZERO; k + 1];
        c[k] = ONE;
        Poly { coeffs: c }
    }

    /// `prod (x - r)`
    pub fn from_roots(roots: &[Cx]) -> Self {
        roots
            .iter()
            .fold(Poly::one(), |acc, r| acc.mul(&Poly::new(vec![-r, ONE])))
    }

    pub fn coeffs(&self) -> &[Cx] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Cx {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Cx {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn monic(&self) -> Self {
        let l = self.leading();
        self.scale(ONE / l)
    }

    pub fn scale(&self, c: Cx) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn add(&self, other: &Poly) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Poly) -> Self {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    /// Euclidean division; `divisor` must be nonzero.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![ZERO; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (i, d) in divisor.coeffs.iter().enumerate() {
                rem[k + i] -= q * d;
            }
            rem[k + dd] = ZERO;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    pub fn rem(&self, divisor: &Poly) -> Poly {
        self.div_rem(divisor).1
    }

    pub fn eval(&self, x: Cx) -> Cx {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * x + c)
    }

    /// Horner evaluation at a square matrix.
    pub fn eval_matrix(&self, m: &CMat) -> CMat {
        let n = m.nrows();
        let mut acc = CMat::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = &acc * m + identity(n) * *c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Drops coefficients below `tol * max|coeff|` at the top end.
    pub fn trimmed(&self, tol: f64) -> Poly {
        let m = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut c = self.coeffs.clone();
        while c.last().is_some_and(|z| z.norm() <= tol * m) {
            c.pop();
        }
        Poly::new(c)
    }
}

/// Inverse of `a` modulo `m` when the two are coprime: returns `b` with
/// `a b = 1 mod m`, computed by the extended Euclidean algorithm.
pub fn inverse_mod(a: &Poly, m: &Poly, tol: f64) -> Option<Poly> {
    let (mut r0, mut r1) = (m.clone(), a.rem(m));
    let (mut t0, mut t1) = (Poly::zero(), Poly::one());
    let scale = m.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    while !r1.is_zero() && r1.coeffs().iter().any(|c| c.norm() > tol * scale) {
        let (q, r) = r0.div_rem(&r1);
        let t = t0.sub(&q.mul(&t1));
        r0 = r1;
        r1 = r.trimmed(tol);
        t0 = t1;
        t1 = t;
    }
    // r0 is the gcd; coprime iff it is a nonzero constant
    if r0.degree() != Some(0) {
        return None;
    }
    Some(t0.scale(ONE / r0.coeff(0)).rem(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cx, real};

    #[test]
    fn division_identity() {
        let a = Poly::new(vec![
            cx(1.0, 1.0),
            real(-2.0),
            real(0.5),
            cx(0.0, 3.0),
            real(1.0),
        ]);
        let b = Poly::new(vec![real(2.0), cx(1.0, -1.0), real(1.0)]);
        let (q, r) = a.div_rem(&b);
        let back = q.mul(&b).add(&r);
        for k in 0..5 {
            assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-13);
        }
        assert!(r.degree().unwrap() < 2);
    }

    #[test]
    fn modular_inverse() {
        let p = Poly::from_roots(&[real(2.0), cx(1.0, 1.0), real(-0.5)]);
        let x3 = Poly::monomial(3);
        let inv = inverse_mod(&x3, &p, 1e-12).unwrap();
        let prod = inv.mul(&x3).rem(&p);
        assert!((prod.coeff(0) - real(1.0)).norm() < 1e-12);
        assert!(prod.coeff(1).norm() < 1e-12 && prod.coeff(2).norm() < 1e-12);
        assert!(inverse_mod(&Poly::monomial(1), &Poly::from_roots(&[real(0.0)]), 1e-12).is_none());
    }

    #[test]
    fn matrix_evaluation() {
        let m = CMat::from_row_slice(2, 2, &[real(1.0), real(2.0), real(3.0), real(4.0)]);
        // characteristic polynomial annihilates the matrix
        let p = Poly::new(vec![real(-2.0), real(-5.0), real(1.0)]);
        assert!(p.eval_matrix(&m).norm() < 1e-13);
        assert_eq!(p.eval(real(1.0)), real(-6.0));
    }
}
