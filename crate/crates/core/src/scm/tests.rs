use super::*;
use crate::admg::VSet;
use crate::pse::fixtures::{green_bundle, mixed_time_med_with};
use crate::pse::{find_recanting_districts, make_bundle, unroll, unroll_regime, CausalPath, TreatmentValues};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::from_ratio(n, d)
}

fn random_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<Q> {
    let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..6)).collect();
    let s: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, s)).collect()
}

fn random_model(g: &Admg, rng: &mut ChaCha8Rng) -> DiscreteScm<Q> {
    let n = g.universe();
    let domains = (0..n).map(|_| vec!["0".to_string(), "1".to_string()]).collect();
    let own = (0..n).map(|_| random_probs(rng, 3)).collect();
    let bi = g.bidirected_edges().iter().map(|_| random_probs(rng, 2)).collect();
    DiscreteScm::from_fn(g.clone(), domains, own, bi, |_, _, _| rng.gen_range(0..2)).unwrap()
}

fn triangle_a() -> Admg {
    Admg::builder().nodes(&["a", "m", "y"]).edge("a", "m").edge("m", "y").edge("a", "y").build().unwrap()
}

#[test]
fn deterministic_chain_is_a_point_mass() {
    let g = Admg::builder().nodes(&["x", "y"]).edge("x", "y").build().unwrap();
    let d = vec![vec!["0".to_string(), "1".to_string()]; 2];
    let m = DiscreteScm::<Q>::from_fn(g, d, vec![vec![q(1, 1)]; 2], vec![], |v, pa, _| if v == 0 { 1 } else { 1 - pa[0] })
        .unwrap();
    let p = m.observational_dist().unwrap();
    assert_eq!(p.probs(), &[q(0, 1), q(0, 1), q(1, 1), q(0, 1)]);
}

#[test]
fn validation_rejects_bad_models() {
    let g = Admg::builder().nodes(&["x"]).build().unwrap();
    let d = vec![vec!["0".to_string(), "1".to_string()]];
    assert!(DiscreteScm::<Q>::new(g.clone(), d.clone(), vec![vec![q(1, 2), q(1, 3)]], vec![], vec![vec![0, 1]]).is_err());
    assert!(DiscreteScm::<Q>::new(g.clone(), d.clone(), vec![vec![q(1, 2), q(1, 2)]], vec![], vec![vec![0]]).is_err());
    assert!(DiscreteScm::<Q>::new(g.clone(), d.clone(), vec![vec![q(1, 2), q(1, 2)]], vec![], vec![vec![0, 2]]).is_err());
    let m = DiscreteScm::<Q>::new(g, d, vec![vec![q(1, 2), q(1, 2)]], vec![], vec![vec![0, 1]]).unwrap();
    assert!(m.interventional_dist(&Regime::from([(0, 2)])).is_err());
}

#[test]
fn enumeration_guard() {
    let names: Vec<String> = (0..13).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let g = Admg::builder().nodes(&refs).build().unwrap();
    let n = g.universe();
    let m = DiscreteScm::<Q>::from_fn(
        g,
        vec![vec!["0".into(), "1".into()]; n],
        vec![vec![q(1, 4); 4]; n],
        vec![],
        |_, _, e| e[0] % 2,
    )
    .unwrap();
    assert!(matches!(m.observational_dist(), Err(ScmError::TooLarge { .. })));
}

#[test]
fn observational_matches_factorisation_and_empty_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = triangle_a();
    for _ in 0..20 {
        let m = random_model(&g, &mut rng);
        let obs = m.observational_dist().unwrap();
        assert_eq!(obs.total(), q(1, 1));
        assert_eq!(obs, m.truncated_factorization(&Regime::new()).unwrap());
        for x in 0..2 {
            let r = Regime::from([(0, x)]);
            assert_eq!(m.interventional_dist(&r).unwrap(), m.truncated_factorization(&r).unwrap());
        }
    }
}

#[test]
fn truncation_refuses_bidirected_models() {
    let g = Admg::builder().nodes(&["x", "y"]).edge("x", "y").bidirected("x", "y").build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_model(&g, &mut rng);
    assert_eq!(m.truncated_factorization(&Regime::new()).unwrap_err(), ScmError::HasBidirected);
}

#[test]
fn conflict_free_counterfactual_is_interventional() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = mixed_time_med_with(&[], &[]);
    let (a, y) = (g.set(&["a0", "a1"]).unwrap(), g.set(&["y"]).unwrap());
    let values = TreatmentValues::binary(&a);
    let m = random_model(&g, &mut rng);
    let term = unroll_regime(&g, &a, &y, &values, true);
    let cf = m.counterfactual_dist(&term).unwrap();
    let r: Regime = a.iter().map(|&v| (v, 1)).collect();
    let dist = m.interventional_dist(&r).unwrap().marginal(&[g.index("y").unwrap()]).unwrap();
    assert_eq!(cf, dist);
}

fn two_node_core() -> Admg {
    Admg::builder()
        .nodes(&["a", "z1", "z2"])
        .edge("a", "z1")
        .edge("a", "z2")
        .edge("z1", "z2")
        .bidirected("z1", "z2")
        .build()
        .unwrap()
}

#[test]
fn parity_pair_agrees_on_interventions() {
    let g = two_node_core();
    let (m1, m2) = parity_models::<Q>(&g, 0, 1, 2).unwrap();
    assert_eq!(first_interventional_disagreement(&m1, &m2).unwrap(), None);
    // sink z2 has even parity in every interventional world
    for x in 0..2 {
        let p = m1.interventional_dist(&Regime::from([(0, x)])).unwrap().marginal(&[2]).unwrap();
        assert_eq!(p.probs(), &[q(1, 1), q(0, 1)]);
    }
}

#[test]
fn parity_pair_disagrees_on_the_split_term() {
    let g = two_node_core();
    let (m1, m2) = parity_models::<Q>(&g, 0, 1, 2).unwrap();
    let term = split_treatment_term(&g, 0, 1);
    assert_eq!(term.render(&g), "z2(a=0, z1(a=1))");
    let (g1, g2) = (m1.counterfactual_dist(&term).unwrap(), m2.counterfactual_dist(&term).unwrap());
    assert_eq!(g1.probs(), &[q(0, 1), q(1, 1)]);
    assert_eq!(g2.probs(), &[q(1, 1), q(0, 1)]);
}

#[test]
fn parity_models_reject_bad_cores() {
    let g = two_node_core();
    assert!(parity_models::<Q>(&g, 0, 1, 1).is_err());
    let split = Admg::builder().nodes(&["a", "z1", "z2"]).edge("a", "z1").edge("a", "z2").build().unwrap();
    assert!(parity_models::<Q>(&split, 0, 1, 2).is_err());
}

fn check_counterexample(g: &Admg, eps: Q) -> Q {
    let bundle = green_bundle(g);
    let reports = find_recanting_districts(g, &bundle);
    assert_eq!(reports.len(), 1);
    let values = TreatmentValues::binary(&bundle.treatments);
    let (m1, m2) = counterexample_models(g, &bundle, &reports[0], &values, &eps).unwrap();
    assert_eq!(first_interventional_disagreement(&m1, &m2).unwrap(), None);
    for m in [&m1, &m2] {
        assert!(m.observational_dist().unwrap().probs().iter().all(|p| *p > q(0, 1)));
    }
    let term = unroll(g, &bundle, &values);
    m1.counterfactual_dist(&term).unwrap().tvd(&m2.counterfactual_dist(&term).unwrap()).unwrap()
}

#[test]
fn counterexample_on_fail_b() {
    let g = mixed_time_med_with(&[("m1", "l2")], &[]);
    let eps = q(1, 1000);
    let tvd = check_counterexample(&g, eps.clone());
    assert!(tvd >= q(1, 1) - q(4, 1) * eps, "tvd {tvd}");
}

#[test]
fn counterexample_on_fail_a() {
    let g = mixed_time_med_with(&[], &[("l2", "m2")]);
    let eps = q(1, 1000);
    let tvd = check_counterexample(&g, eps.clone());
    assert!(tvd >= q(1, 1) - q(4, 1) * eps, "tvd {tvd}");
}

#[test]
fn counterexample_tvd_grows_as_epsilon_shrinks() {
    let g = Admg::builder()
        .nodes(&["a", "z1", "z2", "y"])
        .edge("a", "z1")
        .edge("a", "z2")
        .edge("z1", "y")
        .edge("z2", "y")
        .bidirected("z1", "z2")
        .build()
        .unwrap();
    let a = g.set(&["a"]).unwrap();
    let y = g.set(&["y"]).unwrap();
    let p = CausalPath(vec![0, 1, 3]);
    let bundle = make_bundle(&g, &a, &y, vec![p]).unwrap();
    let reports = find_recanting_districts(&g, &bundle);
    assert_eq!(reports[0].district, VSet::from([1, 2]));
    let values = TreatmentValues::binary(&a);
    let term = unroll(&g, &bundle, &values);
    let mut last = q(0, 1);
    for d in [10, 100, 1000] {
        let (m1, m2) = counterexample_models(&g, &bundle, &reports[0], &values, &q(1, d)).unwrap();
        assert_eq!(first_interventional_disagreement(&m1, &m2).unwrap(), None);
        let tvd = m1.counterfactual_dist(&term).unwrap().tvd(&m2.counterfactual_dist(&term).unwrap()).unwrap();
        let one_minus = q(1, 1) - q(2, d);
        assert_eq!(tvd, one_minus.clone() * one_minus);
        assert!(tvd > last);
        last = tvd;
    }
}

#[test]
fn counterexample_rejects_bad_epsilon() {
    let g = mixed_time_med_with(&[("m1", "l2")], &[]);
    let bundle = green_bundle(&g);
    let r = &find_recanting_districts(&g, &bundle)[0];
    let values = TreatmentValues::binary(&bundle.treatments);
    assert!(counterexample_models(&g, &bundle, r, &values, &q(1, 2)).is_err());
    assert!(counterexample_models(&g, &bundle, r, &values, &q(0, 1)).is_err());
}

#[test]
fn float_models_work() {
    let g = triangle_a();
    let n = g.universe();
    let m = DiscreteScm::<f64>::from_fn(
        g,
        vec![vec!["0".into(), "1".into()]; n],
        vec![vec![0.25, 0.75]; n],
        vec![],
        |_, pa, e| (pa.iter().sum::<usize>() + e[0]) % 2,
    )
    .unwrap();
    let p = m.observational_dist().unwrap();
    assert!((p.total() - 1.0).abs() < 1e-12);
}
