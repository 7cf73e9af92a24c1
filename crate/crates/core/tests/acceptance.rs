//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recant::admg::{Admg, VSet};
use recant::cli::{parse_problem, render_problem, run, ProblemSpec};
use recant::eval::{decompose, evaluate, ModelSource, Value};
use recant::formula::{
    canonicalize_in, identify_pse, mediation_effects, natural_effects, parse_formula, total_effect_functional, FormulaExpr,
};
use recant::pse::{all_paths_bundle, empty_bundle, find_recanting_districts, relevant_nodes, unroll, TreatmentValues};
use recant::scm::{counterexample_models, first_interventional_disagreement, Regime};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["recant"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    out.extend(err);
    (code, String::from_utf8(out).unwrap())
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn same_formula(g: &Admg, got: &FormulaExpr, want: &FormulaExpr) -> bool {
    canonicalize_in(got, g) == canonicalize_in(want, g)
}

fn criterion_1() -> Check {
    let expect: [(&str, Vec<&[&str]>); 3] =
        [("time_med", vec![]), ("time_med_fail_a", vec![&["l1", "l2", "m2", "y"]]), ("time_med_fail_b", vec![&["m1"]])];
    let mut notes = Vec::new();
    for (name, want) in expect {
        let text = std::fs::read_to_string(corpus_path(name)).unwrap();
        let start = Instant::now();
        let spec = parse_problem(&text).map_err(|d| d.to_string())?;
        let reports = find_recanting_districts(&spec.graph, &spec.bundle);
        let took = start.elapsed();
        let got: BTreeSet<VSet> = reports.iter().map(|r| r.district.clone()).collect();
        let want: BTreeSet<VSet> = want.iter().map(|d| spec.graph.set(d).unwrap()).collect();
        ensure(got == want, || format!("{name}: districts {got:?}, expected {want:?}"))?;
        ensure(took < Duration::from_millis(100), || format!("{name}: {took:?} >= 0.1 s"))?;
        notes.push(format!("{name} {:.1} ms", took.as_secs_f64() * 1e3));
    }
    Ok(notes.join(", "))
}

fn criterion_2() -> Check {
    let spec = load("time_med");
    let g = &spec.graph;
    let vstar = relevant_nodes(g, &spec.treatments, &spec.outcomes);
    let got: BTreeSet<VSet> = g.subgraph(&vstar).districts().into_iter().collect();
    let want: BTreeSet<VSet> = [&["m1"][..], &["m2"], &["l1", "l2", "y"]].iter().map(|d| g.set(d).unwrap()).collect();
    ensure(got == want, || format!("districts {got:?}"))?;
    Ok("{m1} {m2} {l1,l2,y}".into())
}

const OBS_G: &str = "Σ_{l1, l2, m1, m2} p(y | a0=0, a1=0, l1, l2, m1, m2) p(m2 | l2, a1=1, m1, a0=1) \
                     p(l2 | a0=0, a1=0, l1) p(m1 | l1, a0=1) p(l1 | a0=0)";
const DO_EXAMPLE: &str =
    "Σ_{l1, l2, m1, m2} p(y, l1, l2 | do(a0=0, a1=0, m1, m2)) p(m1 | do(a0=1, l1)) p(m2 | do(a1=1, l2, m1))";
const OBS_G_TOTAL: &str = "Σ_{l1, l2, m1, m2} p(y | a0=1, a1=1, l1, l2, m1, m2) p(m2 | l2, a1=1, m1, a0=1) \
                           p(l2 | a0=1, a1=1, l1) p(m1 | l1, a0=1) p(l1 | a0=1)";

fn identify_matches(spec: &ProblemSpec, file: &Path, flag: Option<&str>, want: &str) -> Result<(), String> {
    let g = &spec.graph;
    let f = path_str(file);
    let mut args = vec!["identify", f.as_str()];
    if let Some(x) = flag {
        args.push(x);
    }
    let (code, out) = cli(&args);
    ensure(code == 0, || format!("identify {flag:?} exited {code}: {out}"))?;
    let got = parse_formula(out.trim(), g, &spec.values).map_err(|e| format!("cannot parse output: {e}"))?;
    let want = parse_formula(want, g, &spec.values).map_err(|e| e.to_string())?;
    ensure(same_formula(g, &got, &want), || format!("identify {flag:?} printed {}", out.trim()))
}

fn criterion_3() -> Check {
    let spec = load("time_med");
    let file = corpus_path("time_med");
    identify_matches(&spec, &file, Some("--observational"), OBS_G)?;
    identify_matches(&spec, &file, Some("--interventional"), DO_EXAMPLE)?;
    let text = std::fs::read_to_string(&file).unwrap();
    let total: String = text.lines().filter(|l| !l.starts_with("path ")).map(|l| format!("{l}\n")).collect::<String>() + "paths all\n";
    let dir = std::env::temp_dir().join(format!("recant-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let tfile = dir.join("time_med_total.recant");
    std::fs::write(&tfile, &total).unwrap();
    let tspec = parse_problem(&total).map_err(|d| d.to_string())?;
    identify_matches(&tspec, &tfile, None, OBS_G_TOTAL)?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok("observational, interventional and total-effect functionals".into())
}

fn criterion_4() -> Check {
    let spec = load("triangle_a");
    let g = &spec.graph;
    let (dir, _) = mediation_effects(g, &spec.bundle).map_err(|e| e.to_string())?;
    let want = parse_formula("Σ_m (E[y | a=1, m] - E[y | a=0, m]) p(m | a=0)", g, &spec.values).unwrap();
    ensure(same_formula(g, &dir, &want), || "triangle direct effect differs".into())?;
    let v = load("verma");
    let g = &v.graph;
    let (nde, _) = natural_effects(g, &v.treatments, g.index("y").unwrap(), &g.set(&["m"]).unwrap())
        .map_err(|e| e.to_string())?;
    let want = parse_formula("Σ_m (Σ_l E[y | m, l, a=1] p(l | a=1)) p(m | a=0) - E[y | a=0]", g, &v.values).unwrap();
    ensure(same_formula(g, &nde, &want), || "verma direct effect differs".into())?;
    Ok("mediation formula and verma direct effect".into())
}

/// Criteria 5 and 6 share the instances.
fn criteria_5_6() -> (Check, Check) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut done, mut with_bi, mut multi_a, mut tried) = (0, 0, 0, 0);
    let mut c5: Result<(), String> = Ok(());
    let mut c6: Result<(), String> = Ok(());
    while done < 200 {
        tried += 1;
        let Some(inst) = random_instance(&mut rng) else { continue };
        let g = &inst.graph;
        let m = positive_model(g, &mut rng);
        let src = ModelSource::new(&m).unwrap();
        let f = identify_pse(g, &inst.bundle).unwrap();
        let got = evaluate(&f, &src, &inst.values);
        let oracle = m.counterfactual_dist(&unroll(g, &inst.bundle, &inst.values)).unwrap();
        match got {
            Ok(Value::Dist(t)) if t == oracle => {}
            other => {
                if c5.is_ok() {
                    c5 = Err(format!("instance {done}: evaluated {other:?}, oracle {oracle:?}"));
                }
            }
        }
        match decompose(g, &inst.bundle, &inst.values, &src) {
            Ok(d) if d.total == d.in_pi.clone() + d.not_in_pi.clone() => {}
            other => {
                if c6.is_ok() {
                    c6 = Err(format!("instance {done}: {other:?}"));
                }
            }
        }
        with_bi += usize::from(!g.bidirected_edges().is_empty());
        multi_a += usize::from(inst.bundle.treatments.len() > 1);
        done += 1;
    }
    let took = start.elapsed();
    let c5 = c5.and_then(|_| {
        ensure(took < Duration::from_secs(60), || format!("sweep took {took:?}"))?;
        Ok(format!(
            "200 instances ({with_bi} with bidirected edges, {multi_a} with two treatments, {tried} drawn), {:.2} s",
            took.as_secs_f64()
        ))
    });
    (c5, c6.map(|_| "total = in_pi + not_in_pi on all 200 instances".into()))
}

fn criterion_7() -> Check {
    let mut notes = Vec::new();
    for name in ["time_med_fail_a", "time_med_fail_b"] {
        let start = Instant::now();
        let spec = load(name);
        let (g, b) = (&spec.graph, &spec.bundle);
        let reports = find_recanting_districts(g, b);
        let r = reports.first().ok_or_else(|| format!("{name}: no recanting district"))?;
        let eps = q(1, 1000);
        let (m1, m2) = counterexample_models(g, b, r, &spec.values, &eps).map_err(|e| e.to_string())?;
        let regimes = m1.all_regimes().len();
        let dis = first_interventional_disagreement(&m1, &m2).map_err(|e| e.to_string())?;
        ensure(dis.is_none(), || format!("{name}: interventional disagreement at {dis:?}"))?;
        for m in [&m1, &m2] {
            let obs = m.observational_dist().unwrap();
            ensure(obs.probs().iter().all(|p| *p > q(0, 1)), || format!("{name}: observed joint has zeros"))?;
        }
        let term = unroll(g, b, &spec.values);
        let tvd = m1.counterfactual_dist(&term).unwrap().tvd(&m2.counterfactual_dist(&term).unwrap()).unwrap();
        ensure(tvd >= q(9, 10), || format!("{name}: tvd {tvd}"))?;
        let took = start.elapsed();
        ensure(took < Duration::from_secs(30), || format!("{name}: {took:?}"))?;
        notes.push(format!("{name} tvd {tvd} over {regimes} regimes, {:.2} s", took.as_secs_f64()));
    }
    Ok(notes.join("; "))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for i in 0..100 {
        let n = rng.gen_range(2..=7);
        let g = random_graph(&mut rng, n, 0.4, 0.0, 0);
        let m = random_model(&g, &mut rng);
        for _ in 0..5 {
            let mut regime = Regime::new();
            for v in 0..n {
                if rng.gen_bool(0.4) {
                    regime.insert(v, rng.gen_range(0..2));
                }
            }
            let a = m.interventional_dist(&regime).map_err(|e| e.to_string())?;
            let b = m.truncated_factorization(&regime).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("model {i}, regime {regime:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} model/regime pairs"))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in FIGURES {
        let spec = load(name);
        let g = &spec.graph;
        let (a, y) = (&spec.treatments, &spec.outcomes);
        let all = all_paths_bundle(g, a, y).unwrap();
        let none = empty_bundle(g, a, y).unwrap();
        let f = identify_pse(g, &all).map_err(|e| format!("{name}: {e}"))?;
        let te = total_effect_functional(g, a, y, true).map_err(|e| format!("{name}: {e}"))?;
        ensure(same_formula(g, &f, &te), || format!("{name}: π = all differs from the total effect"))?;
        let m = positive_model(g, &mut rng);
        let src = ModelSource::new(&m).unwrap();
        let values = TreatmentValues::binary(a);
        let (_, not_in_pi) = mediation_effects(g, &all).map_err(|e| e.to_string())?;
        let (in_pi, _) = mediation_effects(g, &none).map_err(|e| e.to_string())?;
        for (what, e) in [("not_in_pi for π = all", not_in_pi), ("in_pi for π = ∅", in_pi)] {
            let v = evaluate(&e, &src, &values).map_err(|e| e.to_string())?.scalar().map_err(|e| e.to_string())?;
            ensure(v == q(0, 1), || format!("{name}: {what} = {v}"))?;
        }
    }
    Ok(format!("{} figures", FIGURES.len()))
}

fn criterion_10() -> Check {
    for name in FIGURES {
        let text = std::fs::read_to_string(corpus_path(name)).unwrap();
        let spec = parse_problem(&text).map_err(|d| d.to_string())?;
        let out = render_problem(&spec);
        ensure(out == text, || format!("{name}: render(parse(file)) != file"))?;
    }
    let mut runs = 0;
    for name in FIGURES {
        let f = path_str(&corpus_path(name));
        for args in [
            vec!["check", &f],
            vec!["unroll", &f],
            vec!["identify", &f],
            vec!["identify", &f, "--interventional"],
            vec!["identify", &f, "--latex"],
        ] {
            let first = cli(&args);
            let second = cli(&args);
            ensure(first == second, || format!("{args:?} differs between runs"))?;
            runs += 1;
        }
    }
    let base = std::env::temp_dir().join(format!("recant-acceptance-cx-{}", std::process::id()));
    let f = path_str(&corpus_path("time_med_fail_b"));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let dir = base.join(k.to_string());
        let d = path_str(&dir);
        let (code, out) = cli(&["counterexample", &f, "--out", &d]);
        ensure(code == 0, || format!("counterexample exited {code}: {out}"))?;
        let files: Vec<Vec<u8>> =
            ["m1.model", "m2.model", "summary.txt"].iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect();
        outputs.push((out, files));
    }
    let _ = std::fs::remove_dir_all(&base);
    ensure(outputs[0] == outputs[1], || "counterexample files differ between runs".into())?;
    Ok(format!("6 corpus fixpoints, {} byte-identical command pairs", runs + 1))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: &str, what: &str, start: Instant, r: Check| {
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(note) => println!("criterion {n:>2}: PASS  {what} — {note} [{secs:.2} s]"),
            Err(e) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {what} — {e} [{secs:.2} s]");
            }
        }
    };
    let t = Instant::now();
    report("1", "recanting verdicts on the three time-varying figures", t, criterion_1());
    let t = Instant::now();
    report("2", "districts of the relevant subgraph", t, criterion_2());
    let t = Instant::now();
    report("3", "identify output equals the reference functionals", t, criterion_3());
    let t = Instant::now();
    report("4", "direct-effect formulas (triangle, verma)", t, criterion_4());
    let t = Instant::now();
    let (c5, c6) = criteria_5_6();
    report("5", "oracle soundness sweep", t, c5);
    report("6", "effect decomposition is additive", t, c6);
    let t = Instant::now();
    report("7", "non-identifiability counterexamples", t, criterion_7());
    let t = Instant::now();
    report("8", "truncated factorisation equals mutilation", t, criterion_8());
    let t = Instant::now();
    report("9", "degenerate bundles", t, criterion_9());
    let t = Instant::now();
    report("10", "round trips and determinism", t, criterion_10());
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
