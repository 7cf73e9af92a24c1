mod common;

use std::path::{Path, PathBuf};

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recant::cli::{parse_problem, read_model, read_table, run, write_model, write_table, BundleForm, Code};
use recant::pse::{all_paths_bundle, unroll};
use recant::Rational;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["recant"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("recant-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const TRIANGLE: &str = "node a\nnode m\nnode y\na -> m\nm -> y\na -> y\ntreatment a\noutcome y\n";

fn diag(text: &str) -> (Code, usize, usize) {
    let d = parse_problem(text).unwrap_err();
    (d.code, d.line, d.col)
}

#[test]
fn time_med_file_parses_to_the_figure() {
    let spec = load("time_med");
    let g = &spec.graph;
    assert_eq!(g.len(), 7);
    assert_eq!(g.directed_edges().len(), 15);
    assert_eq!(g.bidirected_edges().len(), 3);
    let green: Vec<String> =
        spec.bundle.green.iter().map(|&(t, h)| format!("{}->{}", g.name(t), g.name(h))).collect();
    assert_eq!(green, ["a0->m1", "m1->m2", "m1->y", "a1->m2", "m2->y"]);
    assert_eq!(spec.form, BundleForm::Paths);
}

#[test]
fn paths_all_is_the_total_effect_bundle() {
    let spec = parse_problem(&format!("{TRIANGLE}paths all\n")).unwrap();
    assert_eq!(spec.bundle, all_paths_bundle(&spec.graph, &spec.treatments, &spec.outcomes).unwrap());
    assert_eq!(spec.bundle.paths.len(), 2);
    let none = parse_problem(&format!("{TRIANGLE}paths none\n")).unwrap();
    assert!(none.bundle.paths.is_empty());
}

#[test]
fn non_directed_path_is_rejected() {
    let text = std::fs::read_to_string(corpus_path("time_med")).unwrap() + "path a0 -> y -> m1\n";
    let d = parse_problem(&text).unwrap_err();
    assert_eq!(d.code, Code::ImproperPath);
    assert_eq!(d.line, text.lines().count());
    assert!(d.to_string().starts_with("E004 at"), "{d}");
}

#[test]
fn diagnostics_have_distinct_codes_and_positions() {
    assert_eq!(diag("node a\nnode\n"), (Code::Syntax, 2, 5));
    assert_eq!(diag("node a\na => b\n"), (Code::Syntax, 2, 1));
    assert_eq!(diag(&format!("{TRIANGLE}path a -> q\n")), (Code::UnknownVertex, 9, 11));
    assert_eq!(diag("node a\nnode b\na -> b\n  b -> a\ntreatment a\noutcome b\npaths all\n"), (Code::Graph, 4, 3));
    assert_eq!(diag("node a\nnode a\n"), (Code::Graph, 2, 6));
    assert_eq!(diag(&format!("{TRIANGLE}path m -> y\n")), (Code::ImproperPath, 9, 1));
    assert_eq!(diag(&format!("{TRIANGLE}treatment y\npaths all\n")).0, Code::Sets);
    assert_eq!(diag(TRIANGLE).0, Code::Sets);
    assert_eq!(diag(&format!("{TRIANGLE}paths all\npath a -> y\n")).0, Code::Sets);
    assert_eq!(diag(&format!("{TRIANGLE}value m active=1 baseline=0\npaths all\n")), (Code::Sets, 9, 7));
}

#[test]
fn edge_inconsistent_bundle_is_e005() {
    // the two listed paths colour b -> m and m -> y, so b -> m -> y is all
    // green and must be listed too
    let head = "node a\nnode b\nnode m\nnode k\nnode y\na -> m\nb -> m\nm -> y\nm -> k\nk -> y\n\
                treatment a\ntreatment b\noutcome y\n";
    let d = parse_problem(&format!("{head}path a -> m -> y\npath b -> m -> k -> y\n")).unwrap_err();
    assert_eq!(d.code, Code::Inconsistent);
    assert_eq!((d.line, d.col), (14, 1));
    assert!(d.to_string().contains("b -> m -> y") || d.to_string().contains("a -> m -> k -> y"), "{d}");
    let closed = format!(
        "{head}path a -> m -> y\npath b -> m -> k -> y\npath b -> m -> y\npath a -> m -> k -> y\n"
    );
    assert!(parse_problem(&closed).is_ok());
}

#[test]
fn check_exit_codes() {
    let (code, out, _) = cli(&["check", &s(&corpus_path("time_med"))]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("verdict: no recanting district"));
    let (code, out, _) = cli(&["check", &s(&corpus_path("time_med_fail_a"))]);
    assert_eq!(code, 1);
    assert!(out.contains("recanting district {l1,l2,m2,y} via a1: in pi a1 -> m2 -> y; not in pi a1 -> l2 -> y"), "{out}");
    let (code, out, _) = cli(&["check", &s(&corpus_path("time_med_fail_b"))]);
    assert_eq!(code, 1);
    assert!(out.contains("recanting district {m1} via a0"), "{out}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&[]).0, 2);
    assert_eq!(cli(&["frobnicate"]).0, 2);
    let (code, _, err) = cli(&["check", "/nonexistent/problem"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"));
    let dir = scratch("usage");
    let bad = dir.join("bad.recant");
    std::fs::write(&bad, "node a\nnode\n").unwrap();
    let (code, _, err) = cli(&["check", &s(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("E001 at 2:5"), "{err}");
    assert_eq!(cli(&["identify", &s(&corpus_path("time_med")), "--interventional", "--observational"]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn identify_and_unroll() {
    let f = s(&corpus_path("triangle_a"));
    assert_eq!(cli(&["identify", &f]).1, "Σ_m p(y | a=1, m) p(m | a=0)\n");
    assert_eq!(cli(&["identify", &f, "--interventional"]).1, "Σ_m p(y | do(a=1, m)) p(m | do(a=0))\n");
    assert_eq!(cli(&["identify", &f, "--latex"]).1, "\\sum_{m} p(y \\mid a=1, m) p(m \\mid a=0)\n");
    assert_eq!(cli(&["unroll", &f]).1, "y(a=1, m(a=0))\n");
    let (code, out, _) = cli(&["identify", &s(&corpus_path("time_med_fail_b"))]);
    assert_eq!(code, 1);
    assert!(out.starts_with("not identified: recanting district"));
}

#[test]
fn hedge_is_a_domain_failure() {
    let dir = scratch("hedge");
    let p = dir.join("bow.recant");
    std::fs::write(&p, "node a\nnode y\na -> y\na <-> y\ntreatment a\noutcome y\npaths all\n").unwrap();
    let (code, out, _) = cli(&["identify", &s(&p)]);
    assert_eq!(code, 1);
    assert!(out.contains("hedge"), "{out}");
    assert_eq!(cli(&["check", &s(&p)]).0, 1);
}

#[test]
fn evaluate_and_decompose_match_the_oracle() {
    let dir = scratch("eval");
    let spec = load("triangle_a");
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let m = positive_model(&spec.graph, &mut rng);
    let model = dir.join("m.model");
    std::fs::write(&model, write_model(&m)).unwrap();
    let f = s(&corpus_path("triangle_a"));
    let (code, obs, _) = cli(&["oracle", &f, "--model", &s(&model), "--what", "obs"]);
    assert_eq!(code, 0);
    let table = dir.join("obs.table");
    std::fs::write(&table, &obs).unwrap();
    let (code, got, err) = cli(&["evaluate", &f, "--table", &s(&table)]);
    assert_eq!(code, 0, "{err}");
    let (_, oracle, _) = cli(&["oracle", &f, "--model", &s(&model)]);
    assert_eq!(got, oracle);
    assert_eq!(oracle, write_table(&m.counterfactual_dist(&unroll(&spec.graph, &spec.bundle, &spec.values)).unwrap()));

    let (code, dec, _) = cli(&["decompose", &f, "--table", &s(&table)]);
    assert_eq!(code, 0);
    let nums: Vec<Rational> = dec.lines().map(|l| l.split_once(' ').unwrap().1.parse().unwrap()).collect();
    assert_eq!(nums[0], nums[1].clone() + nums[2].clone());
    let (_, total, _) = cli(&["oracle", &f, "--model", &s(&model), "--what", "total"]);
    assert_eq!(total.trim().parse::<Rational>().unwrap(), nums[0]);
}

#[test]
fn evaluate_reports_positivity() {
    let dir = scratch("positivity");
    let table = dir.join("t.table");
    std::fs::write(
        &table,
        "a m y p\n0 0 0 1/2\n0 0 1 1/2\n0 1 0 0\n0 1 1 0\n1 0 0 0\n1 0 1 0\n1 1 0 0\n1 1 1 0\n",
    )
    .unwrap();
    let (code, out, _) = cli(&["evaluate", &s(&corpus_path("triangle_a")), "--table", &s(&table)]);
    assert_eq!(code, 1);
    assert!(out.contains("positivity"), "{out}");
}

#[test]
fn oracle_interventional_regime() {
    let dir = scratch("do");
    let spec = load("triangle_a");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = positive_model(&spec.graph, &mut rng);
    let model = dir.join("m.model");
    std::fs::write(&model, write_model(&m)).unwrap();
    let f = s(&corpus_path("triangle_a"));
    let (code, out, _) = cli(&["oracle", &f, "--model", &s(&model), "--what", "do:a=1"]);
    assert_eq!(code, 0);
    let t = read_table::<Rational>(&out, &spec.graph).unwrap();
    assert_eq!(t.names(), ["m", "y"]);
    assert_eq!(cli(&["oracle", &f, "--model", &s(&model), "--what", "do:a=7"]).0, 2);
    assert_eq!(cli(&["oracle", &f, "--model", &s(&model), "--what", "sideways"]).0, 2);
}

#[test]
fn counterexample_writes_models_and_summary() {
    let dir = scratch("cx");
    let f = s(&corpus_path("time_med_fail_b"));
    let (code, out, err) = cli(&["counterexample", &f, "--out", &s(&dir)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("interventional agreement: exact on 2187 regimes"), "{out}");
    assert!(out.contains("observational positivity: strict"));
    assert!(out.contains("effect tvd 249001/250000"));
    assert_eq!(std::fs::read_to_string(dir.join("summary.txt")).unwrap(), out);
    let spec = load("time_med_fail_b");
    let m1 = read_model::<Rational>(&std::fs::read_to_string(dir.join("m1.model")).unwrap(), &spec.graph).unwrap();
    let m2 = read_model::<Rational>(&std::fs::read_to_string(dir.join("m2.model")).unwrap(), &spec.graph).unwrap();
    assert_eq!(recant::scm::first_interventional_disagreement(&m1, &m2).unwrap(), None);
    let (_, p1, _) = cli(&["oracle", &f, "--model", &s(&dir.join("m1.model"))]);
    let (_, p2, _) = cli(&["oracle", &f, "--model", &s(&dir.join("m2.model"))]);
    assert_ne!(p1, p2);
    let (code, out, _) = cli(&["counterexample", &s(&corpus_path("time_med")), "--out", &s(&dir)]);
    assert_eq!(code, 1);
    assert!(out.contains("no recanting district"));
    assert_eq!(cli(&["counterexample", &f, "--epsilon", "1/2", "--out", &s(&dir)]).0, 2);
}
