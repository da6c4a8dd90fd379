//! Square-summable coefficient sequences living on indices `j >= start`.
//!
//! Only two families are representable: power decay `c * j^(-p)` and
//! geometric `c * r^j`. Both are closed under conjugation and scaling, which
//! is what keeps adjoints of structured operators inside the class. Inner
//! products are evaluated by direct summation up to a cutoff followed by a
//! certified bound on the remainder.

use crate::error::{Error, Result};
use crate::scalar::Cx;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailKind {
    Power { coeff: Cx, exponent: f64 },
    Geometric { coeff: Cx, ratio: Cx },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSequence {
    pub kind: TailKind,
    pub start: usize,
}

/// Value of a series together with a rigorous bound on the neglected part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enclosure {
    pub value: Cx,
    pub remainder_bound: f64,
    pub terms: usize,
}

const MAX_TERMS: usize = 1 << 26;

/// `2 zeta(4) / (2 pi)^4`, the Euler-Maclaurin remainder constant for two
/// correction terms.
const EM_REMAINDER: f64 = 1.0 / 720.0;

impl TailSequence {
    pub fn power(coeff: Cx, exponent: f64, start: usize) -> Self {
        TailSequence {
            kind: TailKind::Power { coeff, exponent },
            start: start.max(1),
        }
    }

    pub fn geometric(coeff: Cx, ratio: Cx, start: usize) -> Self {
        TailSequence {
            kind: TailKind::Geometric { coeff, ratio },
            start: start.max(1),
        }
    }

    pub fn coeff(&self) -> Cx {
        match self.kind {
            TailKind::Power { coeff, .. } | TailKind::Geometric { coeff, .. } => coeff,
        }
    }

    pub fn with_coeff(&self, c: Cx) -> Self {
        let kind = match self.kind {
            TailKind::Power { exponent, .. } => TailKind::Power { coeff: c, exponent },
            TailKind::Geometric { ratio, .. } => TailKind::Geometric { coeff: c, ratio },
        };
        TailSequence {
            kind,
            start: self.start,
        }
    }

    pub fn scaled(&self, c: Cx) -> Self {
        self.with_coeff(self.coeff() * c)
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let kind = match self.kind {
            TailKind::Power { coeff, exponent } => TailKind::Power {
                coeff: coeff.conj(),
                exponent,
            },
            TailKind::Geometric { coeff, ratio } => TailKind::Geometric {
                coeff: coeff.conj(),
                ratio: ratio.conj(),
            },
        };
        TailSequence {
            kind,
            start: self.start,
        }
    }

    /// Two sequences have the same shape when they differ only by the
    /// leading coefficient, so they can be merged by adding coefficients.
    pub fn same_shape(&self, other: &TailSequence) -> bool {
        if self.start != other.start {
            return false;
        }
        match (self.kind, other.kind) {
            (TailKind::Power { exponent: p, .. }, TailKind::Power { exponent: q, .. }) => {
                p.to_bits() == q.to_bits()
            }
            (TailKind::Geometric { ratio: r, .. }, TailKind::Geometric { ratio: s, .. }) => {
                r.re.to_bits() == s.re.to_bits() && r.im.to_bits() == s.im.to_bits()
            }
            _ => false,
        }
    }

    /// The same shape with unit coefficient.
    pub fn unit(&self) -> Self {
        self.with_coeff(Cx::new(1.0, 0.0))
    }

    pub fn value(&self, j: usize) -> Cx {
        if j < self.start || j == 0 {
            return Cx::new(0.0, 0.0);
        }
        match self.kind {
            TailKind::Power { coeff, exponent } => coeff * (j as f64).powf(-exponent),
            TailKind::Geometric { coeff, ratio } => coeff * pow_index(ratio, j),
        }
    }

    pub fn is_square_summable(&self) -> bool {
        match self.kind {
            TailKind::Power { coeff, exponent } => coeff == Cx::new(0.0, 0.0) || exponent > 0.5,
            TailKind::Geometric { coeff, ratio } => {
                coeff == Cx::new(0.0, 0.0) || ratio.norm() < 1.0
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff() == Cx::new(0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        let c = self.coeff();
        let params = match self.kind {
            TailKind::Power { exponent, .. } => exponent.is_finite(),
            TailKind::Geometric { ratio, .. } => ratio.re.is_finite() && ratio.im.is_finite(),
        };
        c.re.is_finite() && c.im.is_finite() && params
    }
}

fn pow_index(z: Cx, j: usize) -> Cx {
    if j <= u32::MAX as usize {
        z.powu(j as u32)
    } else {
        z.powf(j as f64)
    }
}

pub fn seq_value(s: &TailSequence, j: usize) -> Cx {
    s.value(j)
}

pub fn is_square_summable(s: &TailSequence) -> bool {
    s.is_square_summable()
}

/// `sum_j s_j * conj(t_j)` with absolute error at most `tol`.
pub fn seq_inner(s: &TailSequence, t: &TailSequence, tol: f64) -> Result<Cx> {
    Ok(seq_inner_enclosure(s, t, tol)?.value)
}

pub fn seq_norm_sq(s: &TailSequence, tol: f64) -> Result<f64> {
    Ok(seq_inner(s, s, tol)?.re.max(0.0))
}

pub fn seq_inner_enclosure(s: &TailSequence, t: &TailSequence, tol: f64) -> Result<Enclosure> {
    if !s.is_square_summable() || !t.is_square_summable() {
        return Err(Error::NotSquareSummable);
    }
    let tol = if tol > 0.0 { tol } else { 1e-12 };
    let start = s.start.max(t.start).max(1);
    let c = s.coeff() * t.coeff().conj();
    if c == Cx::new(0.0, 0.0) {
        return Ok(Enclosure {
            value: c,
            remainder_bound: 0.0,
            terms: 0,
        });
    }
    let scaled_tol = tol / c.norm();
    let e = match (s.kind, t.kind) {
        (TailKind::Power { exponent: p, .. }, TailKind::Power { exponent: q, .. }) => {
            let (v, bound, terms) = power_sum(p + q, start, scaled_tol)?;
            Enclosure {
                value: Cx::new(v, 0.0),
                remainder_bound: bound,
                terms,
            }
        }
        (TailKind::Geometric { ratio: r, .. }, TailKind::Geometric { ratio: rho, .. }) => {
            let z = r * rho.conj();
            Enclosure {
                value: pow_index(z, start) / (Cx::new(1.0, 0.0) - z),
                remainder_bound: 0.0,
                terms: 0,
            }
        }
        (TailKind::Power { exponent: p, .. }, TailKind::Geometric { ratio: rho, .. }) => {
            power_geometric_sum(p, rho.conj(), start, scaled_tol)?
        }
        (TailKind::Geometric { ratio: r, .. }, TailKind::Power { exponent: q, .. }) => {
            power_geometric_sum(q, r, start, scaled_tol)?
        }
    };
    Ok(Enclosure {
        value: e.value * c,
        remainder_bound: e.remainder_bound * c.norm(),
        terms: e.terms,
    })
}

/// Certified bound on the remainder of `sum_j s_j conj(t_j)` when the direct
/// sum stops just before index `cutoff`. Non-increasing in `cutoff`.
pub fn remainder_bound(s: &TailSequence, t: &TailSequence, cutoff: usize) -> Result<f64> {
    if !s.is_square_summable() || !t.is_square_summable() {
        return Err(Error::NotSquareSummable);
    }
    let n = cutoff.max(s.start).max(t.start).max(1);
    let c = (s.coeff() * t.coeff().conj()).norm();
    Ok(c * match (s.kind, t.kind) {
        (TailKind::Power { exponent: p, .. }, TailKind::Power { exponent: q, .. }) => {
            power_tail_bound(p + q, n)
        }
        (TailKind::Geometric { .. }, TailKind::Geometric { .. }) => 0.0,
        (TailKind::Power { exponent: p, .. }, TailKind::Geometric { ratio: z, .. })
        | (TailKind::Geometric { ratio: z, .. }, TailKind::Power { exponent: p, .. }) => {
            let m = z.norm();
            (n as f64).powf(-p) * m.powf(n as f64) / (1.0 - m)
        }
    })
}

/// Error bound of the two-term Euler-Maclaurin tail estimate of
/// `sum_{j >= n} j^(-a)`.
pub fn power_tail_bound(a: f64, n: usize) -> f64 {
    let n = n as f64;
    EM_REMAINDER * a * (a + 1.0) * (a + 2.0) * n.powf(-a - 3.0)
}

fn power_tail_estimate(a: f64, n: usize) -> f64 {
    let n = n as f64;
    n.powf(1.0 - a) / (a - 1.0) + 0.5 * n.powf(-a) + a / 12.0 * n.powf(-a - 1.0)
        - a * (a + 1.0) * (a + 2.0) / 720.0 * n.powf(-a - 3.0)
}

/// `sum_{j >= start} j^(-a)` for `a > 1`: direct summation up to a cutoff
/// where the Euler-Maclaurin remainder bound drops below `tol / 2`.
fn power_sum(a: f64, start: usize, tol: f64) -> Result<(f64, f64, usize)> {
    debug_assert!(a > 1.0);
    let mut cutoff = start.max(8);
    while power_tail_bound(a, cutoff) > 0.5 * tol {
        if cutoff >= MAX_TERMS {
            return Err(Error::SeriesBudget { tol, terms: cutoff });
        }
        cutoff *= 2;
    }
    let mut acc = Neumaier::default();
    for j in start..cutoff {
        acc.add((j as f64).powf(-a));
    }
    let bound = power_tail_bound(a, cutoff);
    Ok((
        acc.sum() + power_tail_estimate(a, cutoff),
        bound,
        cutoff - start,
    ))
}

/// `sum_{j >= start} j^(-p) z^j` for `|z| < 1`, `p > 0`, summed until the
/// geometric majorant of the remainder drops below `tol`.
fn power_geometric_sum(p: f64, z: Cx, start: usize, tol: f64) -> Result<Enclosure> {
    let m = z.norm();
    if m == 0.0 {
        return Ok(Enclosure {
            value: Cx::new(0.0, 0.0),
            remainder_bound: 0.0,
            terms: 0,
        });
    }
    let mut zj = pow_index(z, start);
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    let mut j = start;
    loop {
        let term = zj * (j as f64).powf(-p);
        re.add(term.re);
        im.add(term.im);
        let next = j + 1;
        let bound = (next as f64).powf(-p) * zj.norm() * m / (1.0 - m);
        if bound <= tol {
            return Ok(Enclosure {
                value: Cx::new(re.sum(), im.sum()),
                remainder_bound: bound,
                terms: next - start,
            });
        }
        if next - start > MAX_TERMS {
            return Err(Error::SeriesBudget {
                tol,
                terms: next - start,
            });
        }
        zj *= z;
        j = next;
    }
}

/// Compensated summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}
