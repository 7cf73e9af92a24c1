#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use recant::admg::{Admg, VSet, Vertex};
use recant::cli::{parse_problem, ProblemSpec};
use recant::formula::{identify_pse, total_effect_functional};
use recant::pse::{find_recanting_districts, make_bundle, proper_causal_paths, CausalPath, PathBundle, TreatmentValues};
use recant::scm::DiscreteScm;
use recant::Rational;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_path(name: &str) -> PathBuf {
    corpus_dir().join(format!("{name}.recant"))
}

pub fn load(name: &str) -> ProblemSpec {
    let text = std::fs::read_to_string(corpus_path(name)).unwrap();
    parse_problem(&text).unwrap()
}

pub const FIGURES: [&str; 6] = ["triangle_a", "triangle_b", "verma", "time_med", "time_med_fail_a", "time_med_fail_b"];

fn probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..6)).collect();
    let s: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, s)).collect()
}

/// Binary model with a strictly positive observed joint: for every
/// mechanism row, own-noise values 0 and 1 give both outputs; value 2 gives
/// a random one.
pub fn positive_model(g: &Admg, rng: &mut ChaCha8Rng) -> DiscreteScm<Rational> {
    let n = g.universe();
    let domains = (0..n).map(|_| vec!["0".to_string(), "1".to_string()]).collect();
    let own = (0..n).map(|_| probs(rng, 3)).collect();
    let bi = g.bidirected_edges().iter().map(|_| probs(rng, 2)).collect();
    let mut rows: HashMap<(Vertex, Vec<usize>, Vec<usize>), usize> = HashMap::new();
    DiscreteScm::from_fn(g.clone(), domains, own, bi, |v, pa, e| {
        let key = (v, pa.to_vec(), e[1..].to_vec());
        match e[0] {
            0 | 1 => e[0] ^ *rows.entry(key).or_insert_with(|| rng.gen_range(0..2)),
            _ => rng.gen_range(0..2),
        }
    })
    .unwrap()
}

/// Any binary model, no positivity guarantee.
pub fn random_model(g: &Admg, rng: &mut ChaCha8Rng) -> DiscreteScm<Rational> {
    let n = g.universe();
    let domains = (0..n).map(|_| vec!["0".to_string(), "1".to_string()]).collect();
    let own = (0..n).map(|_| probs(rng, 2)).collect();
    let bi = g.bidirected_edges().iter().map(|_| probs(rng, 2)).collect();
    DiscreteScm::from_fn(g.clone(), domains, own, bi, |_, _, _| rng.gen_range(0..2)).unwrap()
}

/// Random ADMG on `n` vertices `v0..`, declared in a topological order.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p_dir: f64, p_bi: f64, max_bi: usize) -> Admg {
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut dir = Vec::new();
    let mut bi = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_dir) {
                dir.push((i, j));
            }
            if bi.len() < max_bi && rng.gen_bool(p_bi) {
                bi.push((i, j));
            }
        }
    }
    Admg::from_indices(names, dir, bi).unwrap()
}

pub struct Instance {
    pub graph: Admg,
    pub bundle: PathBundle,
    pub values: TreatmentValues,
}

/// Adds every proper path whose edges are all green until the bundle is
/// edge-consistent.
pub fn close_bundle(all: &[CausalPath], chosen: &mut BTreeSet<CausalPath>) {
    loop {
        let green: BTreeSet<(Vertex, Vertex)> = chosen.iter().flat_map(|p| p.edges()).collect();
        let before = chosen.len();
        for p in all {
            if p.edges().all(|e| green.contains(&e)) {
                chosen.insert(p.clone());
            }
        }
        if chosen.len() == before {
            return;
        }
    }
}

/// A random problem with at most 7 vertices and a single outcome whose
/// bundle has no recanting district and whose total effect is identified.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Option<Instance> {
    let n = rng.gen_range(3..=7);
    let g = random_graph(rng, n, 0.45, 0.2, 3);
    let mut vs: Vec<Vertex> = (0..n).collect();
    vs.shuffle(rng);
    let k = if n > 3 && rng.gen_bool(0.3) { 2 } else { 1 };
    let a: VSet = vs[..k].iter().copied().collect();
    let y: VSet = VSet::from([*vs[k..].iter().max().unwrap()]);
    let all = proper_causal_paths(&g, &a, &y).ok()?;
    if all.is_empty() {
        return None;
    }
    total_effect_functional(&g, &a, &y, true).ok()?;
    let mut chosen: BTreeSet<CausalPath> = all.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    close_bundle(&all, &mut chosen);
    let bundle = make_bundle(&g, &a, &y, chosen).ok()?;
    if !find_recanting_districts(&g, &bundle).is_empty() {
        return None;
    }
    identify_pse(&g, &bundle).ok()?;
    let values = TreatmentValues::binary(&a);
    Some(Instance { graph: g, bundle, values })
}
