//! Acceptance gate. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::linalg::{Schur, SVD};
use nalgebra::DMatrix;

use finpot::adjoint::adjoint_structure;
use finpot::conformance::{case_seed, example_check, random_finite_potent, GenParams};
use finpot::linalg::matching_distance;
use finpot::operator::probe_family;
use finpot::potency::{ast_decompose, cn_decompose, drazin_inverse, global_index};
use finpot::reduction::truncate;
use finpot::scalar::{cx, real};
use finpot::spectral::{
    det_id_plus, diagonal_trace, leray_trace, riesz_trace, spectrum, tate_trace,
};
use finpot::{
    worked_example, Cx, Error, HVector, OpValidationError, StructuredOperator, TailSequence,
    CHECK_TOL, DEFAULT_TOL,
};

const SEED: u64 = 0x5EED_2024;
const RANDOM_CASES: usize = 200;
const ORACLE_CASES: usize = 20;
const ORACLE_SIZES: [usize; 3] = [100, 200, 400];
/// Distances below this are rounding noise and carry no ordering.
const ROUNDING_FLOOR: f64 = 1e-12;
const SERIES_TOL: f64 = 1e-15;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    format!("{} error: {e}", e.kind())
}

fn random_operators() -> Result<Vec<StructuredOperator>, String> {
    (0..RANDOM_CASES)
        .map(|i| random_finite_potent(&GenParams::with_seed(case_seed(SEED, i))).map_err(err))
        .collect()
}

fn dist(a: &HVector, b: &HVector) -> Result<f64, String> {
    a.sub(b).norm(SERIES_TOL).map_err(err)
}

fn fin(entries: &[(usize, Cx)]) -> HVector {
    HVector::from_finite(entries.iter().copied())
}

/// `max ||f v - g v|| / max(||v||, ||f v||, ||g v||)` over `probes`.
fn probe_residual<F, G>(probes: &[HVector], f: F, g: G) -> Result<f64, String>
where
    F: Fn(&HVector) -> finpot::Result<HVector>,
    G: Fn(&HVector) -> finpot::Result<HVector>,
{
    let mut worst: f64 = 0.0;
    for v in probes {
        let (fv, gv) = (f(v).map_err(err)?, g(v).map_err(err)?);
        let n = |x: &HVector| x.norm(SERIES_TOL).map_err(err);
        let scale = n(v)?.max(n(&fv)?).max(n(&gv)?);
        if scale > 0.0 {
            worst = worst.max(n(&fv.sub(&gv))? / scale);
        }
    }
    Ok(worst)
}

/// Applies `ops` right to left.
fn chain(ops: &[&StructuredOperator], v: &HVector) -> finpot::Result<HVector> {
    let mut y = v.clone();
    for op in ops.iter().rev() {
        y = op.apply(&y, SERIES_TOL)?;
    }
    Ok(y)
}

fn worked_example_reproduction() -> Outcome {
    let start = Instant::now();
    let phi = worked_example();
    let star = phi.adjoint();
    let tr = tate_trace(&phi, DEFAULT_TOL).map_err(err)?;
    let tr_star = tate_trace(&star, DEFAULT_TOL).map_err(err)?;
    ensure((tr - cx(4.0, 1.0)).norm() <= 1e-9, || format!("tr = {tr}"))?;
    ensure((tr_star - cx(4.0, -1.0)).norm() <= 1e-9, || {
        format!("tr* = {tr_star}")
    })?;

    let idx = global_index(&phi, DEFAULT_TOL).map_err(err)?;
    let idx_star = global_index(&star, DEFAULT_TOL).map_err(err)?;
    ensure(idx == 2 && idx_star == 2, || {
        format!("indices {idx}, {idx_star}")
    })?;

    let ast = ast_decompose(&phi, DEFAULT_TOL).map_err(err)?;
    let ast_star = ast_decompose(&star, DEFAULT_TOL).map_err(err)?;
    ensure(ast.dim_w() == 3 && ast_star.dim_w() == 3, || {
        format!("dim W = {}, dim W* = {}", ast.dim_w(), ast_star.dim_w())
    })?;
    let mut span_residual: f64 = 0.0;
    for w in &ast_star.w_basis {
        let head = fin(&[(1, w.value(1)), (2, w.value(2)), (3, w.value(3))]);
        span_residual = span_residual.max(dist(w, &head)?);
    }
    ensure(span_residual <= 1e-9, || {
        format!("W* leaves span(u1,u2,u3) by {span_residual:e}")
    })?;

    let cn = cn_decompose(&phi, DEFAULT_TOL).map_err(err)?;
    let (c, n) = (&cn.core, &cn.nilpotent);
    let (c_star, n_star) = (c.adjoint(), n.adjoint());
    let o = real(0.0);
    let r = real;
    let mut worst: f64 = 0.0;
    for j in 1..=6 {
        let jf = j as f64;
        let core_j = match j {
            1 => fin(&[(1, cx(1.0, 1.0)), (2, r(1.0)), (4, r(1.0))]),
            2 => fin(&[(1, r(2.0)), (3, cx(5.0, -3.0))]),
            3 => fin(&[(1, r(1.0)), (2, r(-2.0)), (3, r(3.0)), (4, r(-2.0))]),
            _ => fin(&[]),
        };
        let nil_j = if j >= 5 {
            fin(&[(4, r(jf.powi(-2)))])
        } else {
            fin(&[])
        };
        let core_star_j = match j {
            1 => fin(&[(1, cx(1.0, -1.0)), (2, r(2.0)), (3, r(1.0))]),
            2 => fin(&[(1, r(1.0)), (3, r(-2.0))]),
            3 => fin(&[(2, cx(5.0, 3.0)), (3, r(3.0))]),
            4 => fin(&[(1, r(1.0)), (3, r(-2.0))]),
            _ => fin(&[]),
        };
        let nil_star_j = if j == 4 {
            HVector::from_tail(TailSequence::power(r(1.0), 2.0, 5))
        } else {
            fin(&[(1, o)])
        };
        let u = HVector::basis(j);
        for (op, want) in [
            (c, &core_j),
            (n, &nil_j),
            (&c_star, &core_star_j),
            (&n_star, &nil_star_j),
        ] {
            worst = worst.max(dist(&op.apply(&u, SERIES_TOL).map_err(err)?, want)?);
        }
    }
    ensure(worst <= 1e-9, || format!("basis actions off by {worst:e}"))?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "tr = {tr:.3}, tr* = {tr_star:.3}, i = i* = 2, dim W = 3, actions within {worst:.1e}, {elapsed:.0?}"
    ))
}

/// Cofactor expansion along the first row.
fn cofactor_det(m: &[Vec<Cx>]) -> Cx {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = real(0.0);
    for j in 0..n {
        let minor: Vec<Vec<Cx>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &z)| z)
                    .collect()
            })
            .collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += m[0][j] * cofactor_det(&minor) * sign;
    }
    acc
}

fn rel(a: Cx, b: Cx) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

fn det_spread(phi: &StructuredOperator) -> Result<(f64, [Cx; 3]), String> {
    let d = det_id_plus(phi, DEFAULT_TOL).map_err(err)?;
    let v = [d.restriction, d.product, d.exterior];
    Ok((rel(v[0], v[1]).max(rel(v[0], v[2])).max(rel(v[1], v[2])), v))
}

fn determinant_consistency(ops: &[StructuredOperator]) -> Outcome {
    let phi = worked_example();
    // I + B for the block written column by column from the basis actions
    let cols = [
        [cx(1.0, 1.0), r1(), r0(), r1()],
        [real(2.0), r0(), cx(5.0, -3.0), r0()],
        [r1(), real(-2.0), real(3.0), real(-2.0)],
        [r0(), r0(), r0(), r0()],
    ];
    let shifted: Vec<Vec<Cx>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| cols[j][i] + if i == j { r1() } else { r0() })
                .collect()
        })
        .collect();
    let oracle = cofactor_det(&shifted);
    ensure((oracle - cx(31.0, -1.0)).norm() <= 1e-12, || {
        format!("oracle = {oracle}")
    })?;

    let (spread, v) = det_spread(&phi)?;
    ensure(spread <= 1e-8, || {
        format!("worked example spread {spread:e}")
    })?;
    for z in v {
        ensure(rel(z, oracle) <= 1e-8, || {
            format!("{z} differs from oracle {oracle}")
        })?;
    }
    let ex = example_check(DEFAULT_TOL, CHECK_TOL).map_err(err)?;
    ensure(ex.quoted_det_is_core_det && !ex.quoted_det_matches, || {
        "quoted value 15+i not identified as det(phi|W)".into()
    })?;
    ensure(ex.report.notes.iter().any(|n| n.contains("15+i")), || {
        "report does not flag the quoted 15+i".into()
    })?;

    let mut worst: f64 = 0.0;
    for (i, op) in ops.iter().enumerate() {
        let (s, _) = det_spread(op)?;
        ensure(s <= 1e-8, || format!("case {i}: spread {s:e}"))?;
        worst = worst.max(s);
    }
    Ok(format!(
        "oracle det(I+B) = {oracle:.3}, worked example spread {spread:.1e}, {} random worst {worst:.1e}, 15+i flagged",
        ops.len()
    ))
}

fn r0() -> Cx {
    real(0.0)
}

fn r1() -> Cx {
    real(1.0)
}

fn trace_equality(ops: &[StructuredOperator]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, op) in ops.iter().enumerate() {
        let tate = tate_trace(op, DEFAULT_TOL).map_err(err)?;
        let others = [
            leray_trace(op, DEFAULT_TOL).map_err(err)?,
            riesz_trace(op, DEFAULT_TOL).map_err(err)?,
            diagonal_trace(op, DEFAULT_TOL).map_err(err)?,
        ];
        for t in others {
            let r = (t - tate).norm() / (1.0 + tate.norm());
            ensure(r <= 1e-7, || format!("case {i}: trace gap {r:e}"))?;
            worst = worst.max(r);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} operators, worst {worst:.1e}, {elapsed:.1?}",
        ops.len()
    ))
}

fn adjoint_suite(ops: &[StructuredOperator]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, op) in ops.iter().enumerate() {
        let rep = adjoint_structure(op, DEFAULT_TOL).map_err(err)?;
        ensure(rep.index_match && rep.dim_match, || {
            format!(
                "case {i}: index {}/{} dim W {}/{}",
                rep.index, rep.index_star, rep.dim_w, rep.dim_w_star
            )
        })?;
        let star = op.adjoint();
        let s = spectrum(op, DEFAULT_TOL).map_err(err)?.multiset();
        let s_star = spectrum(&star, DEFAULT_TOL).map_err(err)?.multiset();
        let conj: Vec<Cx> = s.iter().map(|z| z.conj()).collect();
        let spec = matching_distance(&conj, &s_star);
        let t = tate_trace(op, DEFAULT_TOL).map_err(err)?;
        let t_star = tate_trace(&star, DEFAULT_TOL).map_err(err)?;
        let tr = (t_star - t.conj()).norm() / (1.0 + t.norm());
        let d = det_id_plus(op, DEFAULT_TOL).map_err(err)?.restriction;
        let d_star = det_id_plus(&star, DEFAULT_TOL).map_err(err)?.restriction;
        let det = rel(d_star, d.conj());
        for (what, r) in [
            ("spectrum", spec),
            ("trace", tr),
            ("det", det),
            ("cn adjoint", rep.cn_adjoint),
        ] {
            ensure(r <= 1e-7, || format!("case {i}: {what} residual {r:e}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!(
        "{} operators, worst residual {worst:.1e}",
        ops.len()
    ))
}

fn drazin_axioms(phi: &StructuredOperator) -> Result<f64, String> {
    let m = global_index(phi, DEFAULT_TOL).map_err(err)?;
    let dz = drazin_inverse(phi, DEFAULT_TOL).map_err(err)?;
    let cn = cn_decompose(phi, DEFAULT_TOL).map_err(err)?;
    let (c, n) = (&cn.core, &cn.nilpotent);
    let probes = probe_family(&[phi, &dz, c, n], 5);
    let zero = |_: &HVector| Ok(HVector::zero());
    let mut lhs = vec![phi; m + 1];
    lhs.push(&dz);
    let rhs = vec![phi; m];
    let residuals = [
        probe_residual(
            &probes,
            |v| chain(&[phi, &dz], v),
            |v| chain(&[&dz, phi], v),
        )?,
        probe_residual(
            &probes,
            |v| chain(&[&dz, phi, &dz], v),
            |v| dz.apply(v, SERIES_TOL),
        )?,
        probe_residual(&probes, |v| chain(&lhs, v), |v| chain(&rhs, v))?,
        probe_residual(
            &probes,
            |v| Ok(c.apply(v, SERIES_TOL)?.add(&n.apply(v, SERIES_TOL)?)),
            |v| phi.apply(v, SERIES_TOL),
        )?,
        probe_residual(&probes, |v| chain(&[c, n], v), zero)?,
        probe_residual(&probes, |v| chain(&[n, c], v), zero)?,
    ];
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

fn drazin_cn(ops: &[StructuredOperator]) -> Outcome {
    let ex = drazin_axioms(&worked_example())?;
    ensure(ex <= 1e-7, || format!("worked example residual {ex:e}"))?;
    let mut worst = ex;
    for (i, op) in ops.iter().enumerate() {
        let r = drazin_axioms(op)?;
        ensure(r <= 1e-7, || format!("case {i}: residual {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!(
        "worked example and {} operators, worst {worst:.1e}",
        ops.len()
    ))
}

const UNBOUNDED: &str = r#"{
  "schema_version": "1",
  "operator": {
    "ambient": "infinite",
    "cutoff": 1,
    "block": [[[0, 0]]],
    "rank_one": [
      {
        "left": { "finite": { "1": [1, 0] } },
        "right": { "tails": [ { "kind": "power", "coeff": [1, 0], "exponent": -1, "start": 2 } ] }
      }
    ]
  }
}
"#;

fn unbounded_rejection() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("unbounded.json");
    std::fs::write(&path, UNBOUNDED).map_err(|e| e.to_string())?;
    match finpot::io::parse(&path) {
        Err(Error::Validation(OpValidationError::UnboundedTail { .. })) => {}
        Err(e) => return Err(format!("wrong error {}", e.kind())),
        Ok(_) => return Err("file accepted".into()),
    }
    let out = Command::new(env!("CARGO_BIN_EXE_finpot"))
        .arg("analyze")
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(1), || {
        format!("exit status {:?}", out.status)
    })?;
    ensure(stderr.contains("UnboundedTail"), || {
        format!("stderr: {stderr}")
    })?;
    Ok("parse fails with UnboundedTail, CLI exits 1".into())
}

/// Nonzero eigenvalues of the truncation: compress onto the range of `m` and
/// keep the `count` largest in modulus.
fn truncated_spectrum(m: &DMatrix<Cx>, count: usize) -> Vec<Cx> {
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-12 * top.max(1.0))
        .collect();
    let q = u.select_columns(keep.iter());
    let compressed = q.adjoint() * m * &q;
    let (_, t) = Schur::new(compressed).unpack();
    let mut ev: Vec<Cx> = t.diagonal().iter().copied().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev.truncate(count);
    ev
}

fn truncation_oracle() -> Outcome {
    let mut worst_final: f64 = 0.0;
    let mut used = 0;
    let mut i = 0;
    while used < ORACLE_CASES {
        let params = GenParams {
            repeat_probability: 0.0,
            ..GenParams::with_seed(case_seed(SEED ^ 0x7A, i))
        };
        i += 1;
        let op = random_finite_potent(&params).map_err(err)?;
        let structural = spectrum(&op, DEFAULT_TOL).map_err(err)?.multiset();
        if structural.is_empty() {
            continue;
        }
        used += 1;
        let mut prev = f64::INFINITY;
        for k in ORACLE_SIZES {
            let m = truncate(&op, k).map_err(err)?;
            let d = matching_distance(&truncated_spectrum(&m, structural.len()), &structural);
            ensure(d <= prev || d <= ROUNDING_FLOOR, || {
                format!("case {i}: distance grows from {prev:e} to {d:e} at K = {k}")
            })?;
            prev = d;
        }
        ensure(prev <= 1e-6, || {
            format!("case {i}: distance {prev:e} at K = 400")
        })?;
        worst_final = worst_final.max(prev);
    }
    Ok(format!(
        "{used} operators, worst distance at K = 400 {worst_final:.1e}"
    ))
}

fn main() -> ExitCode {
    let ops = random_operators();
    let with_ops = |f: fn(&[StructuredOperator]) -> Outcome| match &ops {
        Ok(ops) => f(ops),
        Err(e) => Err(format!("generation failed: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("worked example reproduction", worked_example_reproduction()),
        ("determinant consistency", with_ops(determinant_consistency)),
        ("trace equality", with_ops(trace_equality)),
        ("adjoint suite", with_ops(adjoint_suite)),
        ("Drazin and core-nilpotent axioms", with_ops(drazin_cn)),
        ("unbounded operator rejected", unbounded_rejection()),
        ("truncation oracle convergence", truncation_oracle()),
    ];
    let mut failed = 0;
    for (n, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
