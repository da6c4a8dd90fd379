use proptest::prelude::*;

use finpot::adjoint::adjoint_structure;
use finpot::conformance::{random_finite_potent, run_conformance, GenParams};
use finpot::io::{fingerprint, parse_str, to_json_string};
use finpot::operator::{action_distance, probe_family};
use finpot::potency::{ast_decompose, global_index, is_nilpotent};
use finpot::reduction::active_space;
use finpot::scalar::cx;
use finpot::sequence::{remainder_bound, seq_inner};
use finpot::spectral::{spectrum, tate_trace};
use finpot::vector::{vec_add, vec_scale, vec_value};
use finpot::{Ambient, Cx, HVector, RankOne, StructuredOperator, TailSequence, DEFAULT_TOL};

const ST: f64 = 1e-13;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn complex(scale: f64) -> impl Strategy<Value = Cx> {
    (-scale..scale, -scale..scale).prop_map(|(re, im)| cx(re, im))
}

fn tail() -> impl Strategy<Value = TailSequence> {
    prop_oneof![
        (complex(2.0), 0.6..3.0f64, 1usize..12).prop_map(|(c, e, s)| TailSequence::power(c, e, s)),
        (complex(2.0), 0.0..0.8f64, 0.0..6.3f64, 1usize..12)
            .prop_map(|(c, m, a, s)| TailSequence::geometric(c, Cx::from_polar(m, a), s)),
    ]
}

fn vector() -> impl Strategy<Value = HVector> {
    (
        prop::collection::vec((1usize..10, complex(2.0)), 0..5),
        prop::collection::vec(tail(), 0..3),
    )
        .prop_map(|(entries, tails)| {
            tails
                .into_iter()
                .fold(HVector::from_finite(entries), HVector::with_tail)
        })
}

fn operator() -> impl Strategy<Value = StructuredOperator> {
    (1usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(complex(1.5), n * n),
            prop::collection::vec((vector(), vector()), 0..3),
        )
            .prop_map(move |(entries, terms)| {
                let block = finpot::linalg::CMat::from_vec(n, n, entries);
                let terms = terms.into_iter().map(|(l, r)| RankOne::new(l, r)).collect();
                StructuredOperator::new(Ambient::Infinite, n, block, terms).unwrap()
            })
    })
}

fn generated() -> impl Strategy<Value = StructuredOperator> {
    any::<u64>().prop_map(|seed| random_finite_potent(&GenParams::with_seed(seed)).unwrap())
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn seq_inner_is_conjugate_symmetric(s in tail(), t in tail()) {
        let tol = 1e-12;
        let a = seq_inner(&s, &t, tol).unwrap();
        let b = seq_inner(&t, &s, tol).unwrap();
        prop_assert!((a - b.conj()).norm() <= 2.0 * tol);
    }

    #[test]
    fn remainder_bound_is_monotone(s in tail(), t in tail(), n in 1usize..200, k in 1usize..200) {
        prop_assert!(remainder_bound(&s, &t, n + k).unwrap() <= remainder_bound(&s, &t, n).unwrap());
    }

    #[test]
    fn finite_probe_inner_is_dot_product(s in tail(), probe in prop::collection::vec((1usize..40, complex(2.0)), 1..6)) {
        let v = HVector::from_finite(probe);
        let dot: Cx = v.finite().iter().map(|(&j, c)| s.value(j) * c.conj()).sum();
        let got = HVector::from_tail(s).inner(&v, 1e-14).unwrap();
        prop_assert!((got - dot).norm() <= 1e-12 * (1.0 + dot.norm()));
    }

    #[test]
    fn inner_product_axioms(v in vector(), w in vector()) {
        let vw = v.inner(&w, ST).unwrap();
        let wv = w.inner(&v, ST).unwrap();
        prop_assert!((vw - wv.conj()).norm() <= 1e-10);
        let vv = v.inner(&v, ST).unwrap();
        prop_assert!(vv.im.abs() <= 1e-10 && vv.re >= -1e-10);
        let (nv, nw) = (v.norm(ST).unwrap(), w.norm(ST).unwrap());
        prop_assert!(vw.norm() <= nv * nw + 1e-9);
    }

    #[test]
    fn values_distribute_over_add_and_scale(v in vector(), w in vector(), c in complex(3.0), j in 1usize..30) {
        let sum = vec_add(&v, &w);
        prop_assert!((vec_value(&sum, j) - (vec_value(&v, j) + vec_value(&w, j))).norm() <= 1e-12);
        let scaled = vec_scale(c, &v);
        prop_assert!((vec_value(&scaled, j) - c * vec_value(&v, j)).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn operator_norm_bound_holds_on_probes(phi in operator()) {
        let bound = phi.norm_bound(ST).unwrap();
        for v in phi.probes(5) {
            let lhs = phi.apply(&v, ST).unwrap().norm(ST).unwrap();
            prop_assert!(lhs <= bound * v.norm(ST).unwrap() + 1e-9);
        }
    }

    #[test]
    fn composition_acts_as_successive_application(phi in operator(), psi in operator()) {
        let both = phi.compose(&psi, ST).unwrap();
        for v in probe_family(&[&phi, &psi], 5) {
            let direct = both.apply(&v, ST).unwrap();
            let stepwise = phi.apply(&psi.apply(&v, ST).unwrap(), ST).unwrap();
            let scale = 1.0 + stepwise.norm(ST).unwrap();
            prop_assert!(direct.sub(&stepwise).norm(ST).unwrap() <= 1e-9 * scale);
        }
    }

    #[test]
    fn adjoint_pairing(phi in operator()) {
        let star = phi.adjoint();
        let probes = probe_family(&[&phi, &star], 5);
        for v in &probes {
            let pv = phi.apply(v, ST).unwrap();
            for w in &probes {
                let lhs = pv.inner(w, ST).unwrap();
                let rhs = v.inner(&star.apply(w, ST).unwrap(), ST).unwrap();
                prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
            }
        }
        prop_assert!(action_distance(&star.adjoint(), &phi, ST).unwrap() <= 1e-12);
    }

    #[test]
    fn active_space_is_small_and_orthonormal(phi in operator()) {
        let space = active_space(&phi, DEFAULT_TOL).unwrap();
        prop_assert!(space.dim() <= phi.cutoff() + phi.terms().len());
        prop_assert!(space.gram_defect(ST).unwrap() <= 1e-10);
    }

    #[test]
    fn file_round_trip(phi in operator()) {
        let text = to_json_string(&phi);
        let back = parse_str(&text).unwrap();
        prop_assert_eq!(to_json_string(&back), text);
        prop_assert_eq!(fingerprint(&back), fingerprint(&phi));
        prop_assert!(action_distance(&phi, &back, ST).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn generated_operators_pass_the_theorem_suite(phi in generated()) {
        let r = run_conformance(&phi, DEFAULT_TOL);
        prop_assert!(r.passed, "failed {:?}", r.failed_ids());
    }

    #[test]
    fn multiplicities_fill_the_core(phi in generated()) {
        let ast = ast_decompose(&phi, DEFAULT_TOL).unwrap();
        prop_assert_eq!(spectrum(&phi, DEFAULT_TOL).unwrap().total_multiplicity(), ast.dim_w());
    }

    #[test]
    fn trace_and_spectrum_scale(phi in generated(), c in complex(2.0)) {
        prop_assume!(c.norm() > 0.1);
        let scaled = phi.scale(c);
        let t = tate_trace(&phi, DEFAULT_TOL).unwrap();
        let ts = tate_trace(&scaled, DEFAULT_TOL).unwrap();
        prop_assert!((ts - c * t).norm() <= 1e-8 * (1.0 + (c * t).norm()));
        let s: Vec<Cx> = spectrum(&phi, DEFAULT_TOL).unwrap().multiset().iter().map(|z| c * z).collect();
        let ss = spectrum(&scaled, DEFAULT_TOL).unwrap().multiset();
        prop_assert!(finpot::linalg::matching_distance(&s, &ss) <= 1e-7 * (1.0 + c.norm()));
    }

    #[test]
    fn adjoint_is_an_involution(phi in generated()) {
        let a = adjoint_structure(&phi, DEFAULT_TOL).unwrap();
        let b = adjoint_structure(&phi.adjoint(), DEFAULT_TOL).unwrap();
        prop_assert_eq!((a.dim_w, a.index), (b.dim_w_star, b.index_star));
        prop_assert_eq!((a.dim_w_star, a.index_star), (b.dim_w, b.index));
    }

    #[test]
    fn nilpotent_adjoint_keeps_its_order(seed in any::<u64>()) {
        let params = GenParams { max_core_dim: 0, ..GenParams::with_seed(seed) };
        let phi = random_finite_potent(&params).unwrap();
        let (nil, order) = is_nilpotent(&phi, DEFAULT_TOL).unwrap();
        let (nil_star, order_star) = is_nilpotent(&phi.adjoint(), DEFAULT_TOL).unwrap();
        prop_assert!(nil && nil_star);
        prop_assert_eq!(order, order_star);
        prop_assert_eq!(order, Some(global_index(&phi, DEFAULT_TOL).unwrap()));
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>()) {
        let p = GenParams::with_seed(seed);
        let a = run_conformance(&random_finite_potent(&p).unwrap(), DEFAULT_TOL);
        let b = run_conformance(&random_finite_potent(&p).unwrap(), DEFAULT_TOL);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
