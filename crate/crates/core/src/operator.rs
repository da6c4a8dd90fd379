//! The representable operator class: a finite block acting on `u_1..u_N`
//! plus finitely many rank-one terms `v -> <v, right> left`.
//!
//! Every such operator is bounded (as long as all tails are square-summable)
//! and of finite rank, hence finite potent. The class is closed under sums,
//! scaling, composition and adjoints, and therefore under polynomials without
//! constant term.

use crate::error::{Error, OpValidationError, Result, TermSide};
use crate::linalg::{frobenius, CMat};
use crate::scalar::{is_finite, Cx};
use crate::sequence::TailSequence;
use crate::vector::HVector;

const ZERO: Cx = Cx::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambient {
    Infinite,
    Finite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub left: HVector,
    pub right: HVector,
}

impl RankOne {
    pub fn new(left: HVector, right: HVector) -> Self {
        RankOne { left, right }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOperator {
    ambient: Ambient,
    cutoff: usize,
    block: CMat,
    rank_one: Vec<RankOne>,
}

impl StructuredOperator {
    /// Assembles an operator without checking it. Use [`validate`] before
    /// relying on boundedness.
    ///
    /// [`validate`]: StructuredOperator::validate
    pub fn from_parts_unchecked(
        ambient: Ambient,
        cutoff: usize,
        block: CMat,
        rank_one: Vec<RankOne>,
    ) -> Self {
        StructuredOperator {
            ambient,
            cutoff,
            block,
            rank_one,
        }
    }

    pub fn new(
        ambient: Ambient,
        cutoff: usize,
        block: CMat,
        rank_one: Vec<RankOne>,
    ) -> Result<Self, OpValidationError> {
        let op = Self::from_parts_unchecked(ambient, cutoff, block, rank_one);
        op.validate()?;
        Ok(op)
    }

    pub fn zero(ambient: Ambient, cutoff: usize) -> Self {
        let n = cutoff.max(1);
        Self::from_parts_unchecked(ambient, n, CMat::zeros(n, n), Vec::new())
    }

    /// Operator whose action on `u_1..u_N` is the given matrix and which
    /// vanishes on `u_j`, `j > N`.
    pub fn from_block(ambient: Ambient, block: CMat) -> Result<Self, OpValidationError> {
        let n = block.nrows();
        Self::new(ambient, n, block, Vec::new())
    }

    /// The single term `v -> <v, right> left`.
    pub fn rank_one(
        ambient: Ambient,
        left: HVector,
        right: HVector,
    ) -> Result<Self, OpValidationError> {
        let n = left.max_support().max(right.max_support()).max(1);
        Self::new(
            ambient,
            n,
            CMat::zeros(n, n),
            vec![RankOne::new(left, right)],
        )
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn block(&self) -> &CMat {
        &self.block
    }

    pub fn terms(&self) -> &[RankOne] {
        &self.rank_one
    }

    pub fn validate(&self) -> Result<(), OpValidationError> {
        if self.cutoff == 0 {
            return Err(OpValidationError::MalformedBlock(
                "cutoff must be positive".into(),
            ));
        }
        if self.block.nrows() != self.cutoff || self.block.ncols() != self.cutoff {
            return Err(OpValidationError::MalformedBlock(format!(
                "block is {}x{} but cutoff is {}",
                self.block.nrows(),
                self.block.ncols(),
                self.cutoff
            )));
        }
        if self.block.iter().any(|z| !is_finite(*z)) {
            return Err(OpValidationError::MalformedBlock("non-finite entry".into()));
        }
        for (k, t) in self.rank_one.iter().enumerate() {
            for (side, v) in [(TermSide::Left, &t.left), (TermSide::Right, &t.right)] {
                if v.finite().values().any(|z| !is_finite(*z))
                    || v.tails().iter().any(|s| !s.is_finite())
                {
                    return Err(OpValidationError::MalformedBlock(format!(
                        "term {k}: non-finite {side} factor"
                    )));
                }
                if !v.is_square_summable() {
                    return Err(OpValidationError::UnboundedTail { term: k, side });
                }
            }
        }
        if let Ambient::Finite(n) = self.ambient {
            if self.cutoff > n {
                return Err(OpValidationError::AmbientMismatch(format!(
                    "cutoff {} exceeds dimension {n}",
                    self.cutoff
                )));
            }
            for (k, t) in self.rank_one.iter().enumerate() {
                for v in [&t.left, &t.right] {
                    if v.has_tails() {
                        return Err(OpValidationError::AmbientMismatch(format!(
                            "term {k} has a tail on a {n}-dimensional space"
                        )));
                    }
                    if v.max_support() > n {
                        return Err(OpValidationError::AmbientMismatch(format!(
                            "term {k} is supported beyond dimension {n}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest basis index touched by the finite data of the operator.
    pub fn max_support(&self) -> usize {
        self.rank_one
            .iter()
            .flat_map(|t| [t.left.max_support(), t.right.max_support()])
            .fold(self.cutoff, usize::max)
    }

    /// Distinct tail shapes (unit coefficient) appearing in any factor.
    pub fn tail_shapes(&self) -> Vec<TailSequence> {
        let mut out: Vec<TailSequence> = Vec::new();
        for t in &self.rank_one {
            for s in t.left.tails().iter().chain(t.right.tails()) {
                if !out.iter().any(|o| o.same_shape(s)) {
                    out.push(s.unit());
                }
            }
        }
        out
    }

    fn padded_block(&self, n: usize) -> CMat {
        let mut b = CMat::zeros(n, n);
        let c = self.cutoff.min(n);
        b.view_mut((0, 0), (c, c))
            .copy_from(&self.block.view((0, 0), (c, c)));
        b
    }

    pub fn apply(&self, v: &HVector, tol: f64) -> Result<HVector> {
        let n = self.cutoff;
        let x: Vec<Cx> = v.coords(n);
        let mut out = HVector::from_finite((0..n).filter_map(|i| {
            let s: Cx = (0..n).map(|j| self.block[(i, j)] * x[j]).sum();
            (s != ZERO).then_some((i + 1, s))
        }));
        if !self.rank_one.is_empty() {
            let each = tol / self.rank_one.len() as f64;
            for t in &self.rank_one {
                let c = v.inner(&t.right, each)?;
                out.axpy(c, &t.left);
            }
        }
        Ok(out)
    }

    fn check_ambient(&self, other: &StructuredOperator) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(OpValidationError::AmbientMismatch(format!(
                "{:?} vs {:?}",
                self.ambient, other.ambient
            ))
            .into());
        }
        Ok(())
    }

    pub fn add(&self, other: &StructuredOperator) -> Result<StructuredOperator> {
        self.check_ambient(other)?;
        let n = self.cutoff.max(other.cutoff);
        let block = self.padded_block(n) + other.padded_block(n);
        let mut terms = self.rank_one.clone();
        terms.extend(other.rank_one.iter().cloned());
        Ok(StructuredOperator::from_parts_unchecked(self.ambient, n, block, terms).compacted())
    }

    pub fn scale(&self, c: Cx) -> StructuredOperator {
        if c == ZERO {
            return StructuredOperator::zero(self.ambient, self.cutoff);
        }
        StructuredOperator {
            ambient: self.ambient,
            cutoff: self.cutoff,
            block: &self.block * c,
            rank_one: self
                .rank_one
                .iter()
                .map(|t| RankOne::new(t.left.scale(c), t.right.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &StructuredOperator) -> Result<StructuredOperator> {
        self.add(&other.scale(Cx::new(-1.0, 0.0)))
    }

    /// Structured representation of `self o other`.
    pub fn compose(&self, other: &StructuredOperator, tol: f64) -> Result<StructuredOperator> {
        self.check_ambient(other)?;
        let n = self.cutoff.max(other.cutoff);
        let a = self.padded_block(n);
        let b = other.padded_block(n);
        let block = &a * &b;
        let b_adj = b.adjoint();
        let mut terms = Vec::with_capacity(self.rank_one.len() + other.rank_one.len());
        // self's functionals read the finite image of other's block
        for t in &self.rank_one {
            let r = nalgebra::DVector::from_vec(t.right.coords(n));
            let w = &b_adj * r;
            terms.push(RankOne::new(
                t.left.clone(),
                HVector::from_coords(w.as_slice()),
            ));
        }
        // other's rank-one images are pushed through self
        let each = tol / other.rank_one.len().max(1) as f64;
        for t in &other.rank_one {
            terms.push(RankOne::new(self.apply(&t.left, each)?, t.right.clone()));
        }
        Ok(StructuredOperator::from_parts_unchecked(self.ambient, n, block, terms).compacted())
    }

    /// `self^k` for `k >= 1`.
    pub fn power(&self, k: usize, tol: f64) -> Result<StructuredOperator> {
        assert!(k >= 1, "power of an operator needs k >= 1");
        let mut out = self.clone();
        for _ in 1..k {
            out = self.compose(&out, tol)?;
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> StructuredOperator {
        StructuredOperator {
            ambient: self.ambient,
            cutoff: self.cutoff,
            block: self.block.adjoint(),
            rank_one: self
                .rank_one
                .iter()
                .map(|t| RankOne::new(t.right.clone(), t.left.clone()))
                .collect(),
        }
    }

    /// Certified upper bound `||block||_F + sum ||left|| ||right||`.
    pub fn norm_bound(&self, tol: f64) -> Result<f64> {
        let mut b = frobenius(&self.block);
        for t in &self.rank_one {
            b += t.left.norm(tol)? * t.right.norm(tol)?;
        }
        Ok(b)
    }

    /// Normal form: drops vanishing terms, merges terms sharing a factor and
    /// folds terms with tail-free factors into the block. Never changes the
    /// action.
    pub fn compacted(mut self) -> StructuredOperator {
        let mut kept: Vec<RankOne> = Vec::new();
        let mut fold: Vec<RankOne> = Vec::new();
        for t in std::mem::take(&mut self.rank_one) {
            if t.left == HVector::zero() || t.right == HVector::zero() {
                continue;
            }
            if !t.left.has_tails() && !t.right.has_tails() {
                fold.push(t);
                continue;
            }
            if let Some(k) = kept.iter_mut().find(|k| k.right == t.right) {
                k.left.add_assign(&t.left);
            } else if let Some(k) = kept.iter_mut().find(|k| k.left == t.left) {
                k.right.add_assign(&t.right);
            } else {
                kept.push(t);
            }
        }
        kept.retain(|t| t.left != HVector::zero() && t.right != HVector::zero());
        if !fold.is_empty() {
            let n = fold
                .iter()
                .flat_map(|t| [t.left.max_support(), t.right.max_support()])
                .fold(self.cutoff, usize::max);
            let mut block = self.padded_block(n);
            for t in &fold {
                for (&i, &l) in t.left.finite() {
                    for (&j, &r) in t.right.finite() {
                        block[(i - 1, j - 1)] += l * r.conj();
                    }
                }
            }
            self.block = block;
            self.cutoff = n;
        }
        self.rank_one = kept;
        self
    }

    /// Deterministic probe vectors: `u_1..u_{M+extra}` (`M` the largest
    /// touched index) and every distinct tail shape as a vector.
    pub fn probes(&self, extra: usize) -> Vec<HVector> {
        probe_family(&[self], extra)
    }
}

/// Probe family shared by several operators; on a finite ambient space of
/// dimension `n` it is simply the basis `u_1..u_n`.
pub fn probe_family(ops: &[&StructuredOperator], extra: usize) -> Vec<HVector> {
    if let Some(Ambient::Finite(n)) = ops.first().map(|o| o.ambient()) {
        return (1..=n).map(HVector::basis).collect();
    }
    let m = ops.iter().map(|o| o.max_support()).max().unwrap_or(1);
    let mut out: Vec<HVector> = (1..=m + extra).map(HVector::basis).collect();
    let mut shapes: Vec<TailSequence> = Vec::new();
    for o in ops {
        for s in o.tail_shapes() {
            if !shapes.iter().any(|t| t.same_shape(&s)) {
                shapes.push(s);
            }
        }
    }
    out.extend(shapes.into_iter().map(HVector::from_tail));
    out
}

/// `max_v ||f(v) - g(v)|| / ||v||` over the probes.
pub fn max_probe_residual<F, G>(probes: &[HVector], tol: f64, f: F, g: G) -> Result<f64>
where
    F: Fn(&HVector) -> Result<HVector>,
    G: Fn(&HVector) -> Result<HVector>,
{
    let mut worst: f64 = 0.0;
    for v in probes {
        let d = f(v)?.sub(&g(v)?);
        let nv = v.norm(tol)?;
        if nv == 0.0 {
            continue;
        }
        worst = worst.max(d.norm(tol)? / nv);
    }
    Ok(worst)
}

/// Extensional distance between two operators on their joint probe family.
pub fn action_distance(a: &StructuredOperator, b: &StructuredOperator, tol: f64) -> Result<f64> {
    if a.ambient() != b.ambient() {
        return Err(Error::Validation(OpValidationError::AmbientMismatch(
            "operators live on different spaces".into(),
        )));
    }
    let probes = probe_family(&[a, b], 5);
    max_probe_residual(&probes, tol, |v| a.apply(v, tol), |v| b.apply(v, tol))
}

pub fn apply(op: &StructuredOperator, v: &HVector, tol: f64) -> Result<HVector> {
    op.apply(v, tol)
}

pub fn op_add(a: &StructuredOperator, b: &StructuredOperator) -> Result<StructuredOperator> {
    a.add(b)
}

pub fn op_scale(c: Cx, a: &StructuredOperator) -> StructuredOperator {
    a.scale(c)
}

pub fn op_compose(
    a: &StructuredOperator,
    b: &StructuredOperator,
    tol: f64,
) -> Result<StructuredOperator> {
    a.compose(b, tol)
}

pub fn op_adjoint(a: &StructuredOperator) -> StructuredOperator {
    a.adjoint()
}

pub fn op_norm_bound(a: &StructuredOperator, tol: f64) -> Result<f64> {
    a.norm_bound(tol)
}

pub fn validate(a: &StructuredOperator) -> Result<(), OpValidationError> {
    a.validate()
}
