//! Dense complex linear algebra on small matrices: rank-revealing bases,
//! kernels, determinants and a shifted-QR eigenvalue solver.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Cx;

pub type CMat = DMatrix<Cx>;

const ZERO: Cx = Cx::new(0.0, 0.0);
const ONE: Cx = Cx::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Threshold below which a singular value counts as zero: `tol * max(1, ||m||)`.
pub fn rank_threshold(m: &CMat, tol: f64) -> f64 {
    tol * spectral_norm(m).max(1.0)
}

pub fn rank(m: &CMat, tol: f64) -> usize {
    let thr = rank_threshold(m, tol);
    singular_values(m).iter().filter(|&&s| s > thr).count()
}

/// Full SVD of `m` padded with zero rows so that `V` is square.
fn full_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap().adjoint();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    // order columns by decreasing singular value
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let u = CMat::from_fn(u.nrows(), idx.len(), |i, k| u[(i, idx[k])]);
    let v = CMat::from_fn(v.nrows(), idx.len(), |i, k| v[(i, idx[k])]);
    let s = idx.iter().map(|&k| s[k]).collect();
    (u, s, v)
}

/// Orthonormal basis of the column space of `m`, judged at `tol * max(1, ||m||)`.
pub fn orth(m: &CMat, tol: f64) -> CMat {
    orth_with_threshold(m, rank_threshold(m, tol))
}

pub fn orth_with_threshold(m: &CMat, thr: f64) -> CMat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return CMat::zeros(r, 0);
    }
    let (u, s, _) = full_svd(m);
    let k = s.iter().filter(|&&x| x > thr).count().min(r);
    // rows beyond r come from the zero padding and vanish on the kept columns
    u.view((0, 0), (r, k)).into_owned()
}

/// Orthonormal basis of the kernel of `m`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    null_space_with_threshold(m, rank_threshold(m, tol))
}

pub fn null_space_with_threshold(m: &CMat, thr: f64) -> CMat {
    let (r, c) = m.shape();
    if c == 0 {
        return CMat::zeros(0, 0);
    }
    if r == 0 {
        return identity(c);
    }
    let (_, s, v) = full_svd(m);
    let k = s.iter().filter(|&&x| x > thr).count();
    v.columns(k, c - k).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// (orthonormal) columns of `y` inside `C^n`.
pub fn complement(y: &CMat, n: usize) -> CMat {
    if y.ncols() == 0 {
        return identity(n);
    }
    null_space_with_threshold(&y.adjoint(), 0.5)
}

/// Orthonormal basis of `Ker m^k` built one power at a time:
/// `K_{j+1} = { x : m x in K_j }`. Avoids forming `m^k`, whose small
/// nonzero singular values would otherwise drown in rounding.
pub fn kernel_of_power(m: &CMat, k: usize, tol: f64) -> CMat {
    let n = m.nrows();
    let thr = rank_threshold(m, tol);
    let mut basis = CMat::zeros(n, 0);
    for _ in 0..k {
        // project the image onto the complement of the current kernel
        let proj = identity(n) - &basis * basis.adjoint();
        let next = null_space_with_threshold(&(proj * m), thr);
        let done = next.ncols() == basis.ncols();
        basis = next;
        if done {
            break;
        }
    }
    basis
}

pub fn trace(m: &CMat) -> Cx {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn det(m: &CMat) -> Cx {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}

/// `||m|| * ||m^-1||` in the spectral norm; infinite when singular.
pub fn condition(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (None, _) => 1.0,
        _ => f64::INFINITY,
    }
}

pub fn mat_pow(m: &CMat, k: usize) -> CMat {
    let mut out = identity(m.nrows());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Upper Hessenberg form by Householder reflections (eigenvalues only).
fn hessenberg(mut a: CMat) -> CMat {
    let n = a.nrows();
    if n < 3 {
        return a;
    }
    for k in 0..n - 2 {
        let alpha_norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            ONE
        } else {
            x0 / x0.norm()
        };
        let mut v: Vec<Cx> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // A <- (I - 2 v v^H) A
        for j in 0..n {
            let mut dot = ZERO;
            for (t, vi) in v.iter().enumerate() {
                dot += vi.conj() * a[(k + 1 + t, j)];
            }
            for (t, vi) in v.iter().enumerate() {
                a[(k + 1 + t, j)] -= *vi * dot * 2.0;
            }
        }
        // A <- A (I - 2 v v^H)
        for i in 0..n {
            let mut dot = ZERO;
            for (t, vi) in v.iter().enumerate() {
                dot += a[(i, k + 1 + t)] * *vi;
            }
            for (t, vi) in v.iter().enumerate() {
                a[(i, k + 1 + t)] -= dot * vi.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
    a
}

/// Complex Givens rotation `G` with `G [a; b] = [r; 0]`, returned as `(c, s)`
/// where `G = [[conj(c), conj(s)], [-s, c]]`.
fn givens(a: Cx, b: Cx) -> (Cx, Cx) {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        (ONE, ZERO)
    } else {
        (a / r, b / r)
    }
}

/// All eigenvalues of a square complex matrix: Hessenberg reduction followed
/// by single-shift QR with Wilkinson shifts and deflation.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Cx>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !crate::scalar::is_finite(*z)) {
        return Err(Error::EigenFailure("non-finite matrix entry".into()));
    }
    let mut h = hessenberg(m.clone());
    let scale = max_abs(&h).max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut out = vec![ZERO; n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            out[0] = h[(0, 0)];
            break;
        }
        // find the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let reference = if diag == 0.0 { scale } else { diag };
            if sub <= eps * reference || sub <= eps * eps * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            out[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 60 * n + 200 {
            return Err(Error::EigenFailure(format!(
                "QR iteration did not converge for a {n}x{n} matrix"
            )));
        }
        let shift = if iter.is_multiple_of(11) {
            // exceptional shift
            h[(hi, hi)] + Cx::new(h[(hi, hi - 1)].norm() * 0.75, h[(hi, hi - 1)].norm() * 0.35)
        } else {
            wilkinson(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c.conj() * x + s.conj() * y;
                h[(k + 1, j)] = -s * x + c * y;
            }
            rots.push((c, s));
        }
        for (t, (c, s)) in rots.into_iter().enumerate() {
            let k = lo + t;
            for i in lo..=(k + 1).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s;
                h[(i, k + 1)] = -x * s.conj() + y * c.conj();
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
    Ok(out)
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson(a: Cx, b: Cx, c: Cx, d: Cx) -> Cx {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mu1 = (a + d) * 0.5 + disc;
    let mu2 = (a + d) * 0.5 - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Optimal bottleneck matching distance between two multisets of complex
/// numbers of equal size: `min over bijections of max |a_i - b_pi(i)|`.
/// Returns infinity when the sizes differ.
pub fn matching_distance(a: &[Cx], b: &[Cx]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if a.is_empty() {
        return 0.0;
    }
    let mut cands: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| (x - y).norm()))
        .collect();
    cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cands.dedup();
    // smallest candidate threshold admitting a perfect matching
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(a, b, cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cands[lo]
}

fn has_perfect_matching(a: &[Cx], b: &[Cx], thr: f64) -> bool {
    let n = a.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        a: &[Cx],
        b: &[Cx],
        thr: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..b.len() {
            if seen[j] || (a[i] - b[j]).norm() > thr {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none() || augment(owner[j].unwrap(), a, b, thr, seen, owner) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, a, b, thr, &mut seen, &mut owner)
    })
}
