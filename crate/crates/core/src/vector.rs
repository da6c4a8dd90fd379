//! Vectors of the separable Hilbert space with orthonormal basis `u_1, u_2, ...`:
//! a finitely supported part plus finitely many tail sequences.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Cx;
use crate::sequence::{seq_inner, TailSequence};

const ZERO: Cx = Cx::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HVector {
    finite: BTreeMap<usize, Cx>,
    tails: Vec<TailSequence>,
}

impl HVector {
    pub fn zero() -> Self {
        HVector::default()
    }

    /// The basis vector `u_j` (1-based).
    pub fn basis(j: usize) -> Self {
        assert!(j >= 1, "basis indices start at 1");
        let mut v = HVector::zero();
        v.finite.insert(j, Cx::new(1.0, 0.0));
        v
    }

    pub fn from_finite<I: IntoIterator<Item = (usize, Cx)>>(entries: I) -> Self {
        let mut v = HVector::zero();
        for (j, c) in entries {
            v.add_entry(j, c);
        }
        v
    }

    /// Coordinates `1..=coords.len()`.
    pub fn from_coords(coords: &[Cx]) -> Self {
        HVector::from_finite(coords.iter().enumerate().map(|(i, c)| (i + 1, *c)))
    }

    pub fn from_tail(t: TailSequence) -> Self {
        let mut v = HVector::zero();
        v.push_tail(t);
        v
    }

    pub fn with_tail(mut self, t: TailSequence) -> Self {
        self.push_tail(t);
        self
    }

    fn add_entry(&mut self, j: usize, c: Cx) {
        assert!(j >= 1, "basis indices start at 1");
        if c == ZERO {
            return;
        }
        let e = self.finite.entry(j).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.finite.remove(&j);
        }
    }

    fn push_tail(&mut self, t: TailSequence) {
        if t.is_zero() {
            return;
        }
        if let Some(pos) = self.tails.iter().position(|s| s.same_shape(&t)) {
            let merged = self.tails[pos].coeff() + t.coeff();
            if merged == ZERO {
                self.tails.remove(pos);
            } else {
                self.tails[pos] = t.with_coeff(merged);
            }
        } else {
            self.tails.push(t);
        }
    }

    pub fn finite(&self) -> &BTreeMap<usize, Cx> {
        &self.finite
    }

    pub fn tails(&self) -> &[TailSequence] {
        &self.tails
    }

    pub fn has_tails(&self) -> bool {
        !self.tails.is_empty()
    }

    /// Largest index of the finite part (0 when empty).
    pub fn max_support(&self) -> usize {
        self.finite.keys().next_back().copied().unwrap_or(0)
    }

    /// Smallest index at which any tail starts.
    pub fn min_tail_start(&self) -> Option<usize> {
        self.tails.iter().map(|t| t.start).min()
    }

    pub fn is_square_summable(&self) -> bool {
        self.tails.iter().all(|t| t.is_square_summable())
    }

    pub fn value(&self, j: usize) -> Cx {
        let f = self.finite.get(&j).copied().unwrap_or(ZERO);
        self.tails.iter().fold(f, |acc, t| acc + t.value(j))
    }

    /// Coordinates `1..=n` including tail contributions.
    pub fn coords(&self, n: usize) -> Vec<Cx> {
        (1..=n).map(|j| self.value(j)).collect()
    }

    pub fn add(&self, other: &HVector) -> HVector {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &HVector) {
        for (&j, &c) in &other.finite {
            self.add_entry(j, c);
        }
        for t in &other.tails {
            self.push_tail(*t);
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: Cx, other: &HVector) {
        if c == ZERO {
            return;
        }
        for (&j, &x) in &other.finite {
            self.add_entry(j, c * x);
        }
        for t in &other.tails {
            self.push_tail(t.scaled(c));
        }
    }

    pub fn sub(&self, other: &HVector) -> HVector {
        let mut out = self.clone();
        out.axpy(Cx::new(-1.0, 0.0), other);
        out
    }

    pub fn scale(&self, c: Cx) -> HVector {
        if c == ZERO {
            return HVector::zero();
        }
        let mut out = HVector::zero();
        out.axpy(c, self);
        out
    }

    /// Entrywise conjugate.
    pub fn conj(&self) -> HVector {
        HVector {
            finite: self.finite.iter().map(|(&j, c)| (j, c.conj())).collect(),
            tails: self.tails.iter().map(|t| t.conj()).collect(),
        }
    }

    /// `<self, other>`, linear in the first argument, absolute error `<= tol`.
    pub fn inner(&self, other: &HVector, tol: f64) -> Result<Cx> {
        if !self.is_square_summable() || !other.is_square_summable() {
            return Err(Error::NotSquareSummable);
        }
        let mut acc = ZERO;
        // finite x finite: iterate the smaller map
        if self.finite.len() <= other.finite.len() {
            for (j, a) in &self.finite {
                if let Some(b) = other.finite.get(j) {
                    acc += a * b.conj();
                }
            }
        } else {
            for (j, b) in &other.finite {
                if let Some(a) = self.finite.get(j) {
                    acc += a * b.conj();
                }
            }
        }
        for t in &other.tails {
            for (&j, a) in &self.finite {
                acc += a * t.value(j).conj();
            }
        }
        for s in &self.tails {
            for (&j, b) in &other.finite {
                acc += s.value(j) * b.conj();
            }
        }
        let pairs = self.tails.len() * other.tails.len();
        if pairs > 0 {
            let each = tol / pairs as f64;
            for s in &self.tails {
                for t in &other.tails {
                    acc += seq_inner(s, t, each)?;
                }
            }
        }
        Ok(acc)
    }

    pub fn norm(&self, tol: f64) -> Result<f64> {
        let eps = (tol * tol).max(tol * 1e-6).min(tol);
        Ok(self.inner(self, eps)?.re.max(0.0).sqrt())
    }

    pub fn is_zero(&self, tol: f64) -> Result<bool> {
        Ok(self.norm(tol)? <= tol)
    }
}

pub fn vec_add(v: &HVector, w: &HVector) -> HVector {
    v.add(w)
}

pub fn vec_scale(c: Cx, v: &HVector) -> HVector {
    v.scale(c)
}

pub fn vec_value(v: &HVector, j: usize) -> Cx {
    v.value(j)
}

pub fn vec_inner(v: &HVector, w: &HVector, tol: f64) -> Result<Cx> {
    v.inner(w, tol)
}

pub fn vec_norm(v: &HVector, tol: f64) -> Result<f64> {
    v.norm(tol)
}

pub fn is_zero(v: &HVector, tol: f64) -> Result<bool> {
    v.is_zero(tol)
}
