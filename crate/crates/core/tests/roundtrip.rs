mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recant::cli::{parse_problem, read_model, read_table, render_problem, write_model, write_table, BundleForm, ProblemSpec};
use recant::formula::{canonicalize_in, identify_pse, interventional_functional, parse_formula, render, Style};
use recant::pse::{make_bundle, proper_causal_paths, CausalPath, TreatmentValues};
use recant::Rational;

/// A random problem (any bundle that is edge-consistent), with random value
/// labels on the treatments.
fn random_problem(rng: &mut ChaCha8Rng) -> Option<ProblemSpec> {
    let n = rng.gen_range(2..=7);
    let g = random_graph(rng, n, 0.45, 0.2, 4);
    let a = BTreeSet::from([rng.gen_range(0..n - 1)]);
    let y = BTreeSet::from([n - 1]);
    let all = proper_causal_paths(&g, &a, &y).ok()?;
    let mut chosen: BTreeSet<CausalPath> = all.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    close_bundle(&all, &mut chosen);
    let form = match rng.gen_range(0..3) {
        0 if chosen.len() == all.len() => BundleForm::All,
        1 if chosen.is_empty() => BundleForm::None,
        _ if chosen.is_empty() => return None,
        _ => BundleForm::Paths,
    };
    let bundle = make_bundle(&g, &a, &y, chosen).ok()?;
    let mut values = TreatmentValues::binary(&a);
    if rng.gen_bool(0.5) {
        values.set(*a.iter().next().unwrap(), "hi", "lo");
    }
    Some(ProblemSpec { graph: g, treatments: a, outcomes: y, bundle, form, values })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn problem_render_parse_fixpoint(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(spec) = random_problem(&mut rng) {
            let text = render_problem(&spec);
            let back = parse_problem(&text).unwrap();
            prop_assert_eq!(render_problem(&back), text.clone());
            prop_assert_eq!(&back.bundle, &spec.bundle);
            prop_assert_eq!(back.graph.directed_edges(), spec.graph.directed_edges());
            prop_assert_eq!(back.graph.bidirected_edges(), spec.graph.bidirected_edges());
            prop_assert_eq!(&back.values, &spec.values);
        }
    }

    #[test]
    fn formula_render_parse_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(inst) = random_instance(&mut rng) {
            let g = &inst.graph;
            for f in [identify_pse(g, &inst.bundle).unwrap(), interventional_functional(g, &inst.bundle).unwrap()] {
                let c = canonicalize_in(&f, g);
                let text = render(&c, g, &inst.values, Style::Text);
                let back = parse_formula(&text, g, &inst.values).unwrap();
                prop_assert_eq!(canonicalize_in(&back, g), c.clone());
                prop_assert_eq!(render(&canonicalize_in(&back, g), g, &inst.values, Style::Text), text);
            }
        }
    }

    #[test]
    fn model_and_table_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let g = random_graph(&mut rng, n, 0.5, 0.3, 3);
        let m = positive_model(&g, &mut rng);
        let text = write_model(&m);
        let back = read_model::<Rational>(&text, &g).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_model(&back), text);
        let obs = m.observational_dist().unwrap();
        let t = write_table(&obs);
        let tb = read_table::<Rational>(&t, &g).unwrap();
        prop_assert_eq!(&tb, &obs);
        prop_assert_eq!(write_table(&tb), t);
    }
}

#[test]
fn tables_are_written_with_sorted_labels() {
    let g = random_graph(&mut ChaCha8Rng::seed_from_u64(1), 1, 0.0, 0.0, 0);
    let t = recant::ExactTable::new(
        vec![0],
        vec!["v0".into()],
        vec![vec!["b".into(), "a".into()]],
        vec![q(1, 3), q(2, 3)],
    )
    .unwrap();
    assert_eq!(write_table(&t), "v0 p\na 2/3\nb 1/3\n");
    assert!(read_table::<Rational>("v0 p\nb 1/3\na 2/3\n", &g).is_err());
    assert!(read_table::<Rational>("v0 p\na 1/3\n", &g).is_err());
    assert!(read_table::<Rational>("v0 p\na 1/3\nb 1/3\n", &g).is_err());
    let f = read_table::<f64>("v0 p\na 0.25\nb 0.75\n", &g).unwrap();
    assert_eq!(f.probs(), &[0.25, 0.75]);
}

#[test]
fn model_files_reject_bad_input() {
    let g = random_graph(&mut ChaCha8Rng::seed_from_u64(2), 2, 1.0, 0.0, 0);
    let good = "domain v0 0 1\ndomain v1 0 1\nnoise u(v0) 1/2 1/2\nnoise u(v1) 1\n\
                mech v0 u(v0)\n0 : 0\n1 : 1\nmech v1 v0 u(v1)\n0 0 : 1\n1 0 : 0\n";
    let m = read_model::<Rational>(good, &g).unwrap();
    assert_eq!(m.observational_dist().unwrap().probs(), &[q(0, 1), q(1, 2), q(1, 2), q(0, 1)]);
    let swapped_rows = good.replace("0 0 : 1\n1 0 : 0", "1 0 : 0\n0 0 : 1");
    assert!(read_model::<Rational>(&swapped_rows, &g).is_err());
    let wrong_inputs = good.replace("mech v1 v0 u(v1)", "mech v1 u(v1) v0");
    assert!(read_model::<Rational>(&wrong_inputs, &g).unwrap_err().msg.contains("inputs of `v1`"));
    let bad_noise = good.replace("noise u(v1) 1", "noise u(v1) 1/2");
    assert!(read_model::<Rational>(&bad_noise, &g).is_err());
    let unknown = good.replace("1 0 : 0", "1 0 : 7");
    assert_eq!(read_model::<Rational>(&unknown, &g).unwrap_err().line, 10);
}
