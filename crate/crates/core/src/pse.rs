//! Proper causal paths, path bundles, the recanting-district criterion and
//! nested-counterfactual unrolling.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::admg::{Admg, GraphError, VSet, Vertex};

/// A directed path `v0 -> v1 -> ... -> vk`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CausalPath(pub Vec<Vertex>);

impl CausalPath {
    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn start(&self) -> Vertex {
        self.0[0]
    }

    pub fn end(&self) -> Vertex {
        *self.0.last().unwrap()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn render(&self, g: &Admg) -> String {
        let parts: Vec<&str> = self.0.iter().map(|&v| g.name(v)).collect();
        parts.join(" -> ")
    }

    /// Directed, simple, starts in `a`, ends in `y`, no later vertex in `a`.
    pub fn is_proper(&self, g: &Admg, a: &VSet, y: &VSet) -> bool {
        let vs = &self.0;
        if vs.len() < 2 || !vs.iter().all(|&v| g.contains(v)) {
            return false;
        }
        let distinct: BTreeSet<_> = vs.iter().collect();
        distinct.len() == vs.len()
            && a.contains(&vs[0])
            && y.contains(&self.end())
            && vs[1..].iter().all(|v| !a.contains(v))
            && self.edges().all(|(t, h)| g.has_edge(t, h))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PseError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("treatment and outcome sets overlap at `{0}`")]
    Overlap(String),
    #[error("empty treatment or outcome set")]
    Empty,
    #[error("not a proper causal path: {0}")]
    NotProper(String),
    #[error("bundle is not edge-consistent: all-green path {0} is missing")]
    Inconsistent(String),
}

fn check_sets(g: &Admg, a: &VSet, y: &VSet) -> Result<(), PseError> {
    g.check_set(a)?;
    g.check_set(y)?;
    if a.is_empty() || y.is_empty() {
        return Err(PseError::Empty);
    }
    if let Some(&v) = a.intersection(y).next() {
        return Err(PseError::Overlap(g.name(v).to_string()));
    }
    Ok(())
}

/// All proper causal paths from `a` to `y`, sorted lexicographically by
/// vertex order. Paths may run through one outcome on their way to another.
pub fn proper_causal_paths(g: &Admg, a: &VSet, y: &VSet) -> Result<Vec<CausalPath>, PseError> {
    check_sets(g, a, y)?;
    let reach = relevant_nodes(g, a, y);
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn dfs(
        g: &Admg,
        reach: &VSet,
        y: &VSet,
        stack: &mut Vec<Vertex>,
        out: &mut Vec<CausalPath>,
    ) {
        let v = *stack.last().unwrap();
        for &c in g.ch(v) {
            if !reach.contains(&c) || stack.contains(&c) {
                continue;
            }
            stack.push(c);
            if y.contains(&c) {
                out.push(CausalPath(stack.clone()));
            }
            dfs(g, reach, y, stack, out);
            stack.pop();
        }
    }
    for &s in a {
        stack.push(s);
        dfs(g, &reach, y, &mut stack, &mut out);
        stack.pop();
    }
    out.sort();
    Ok(out)
}

/// Ancestors of `y` in the graph with `a` deleted (reflexive, so `y` is
/// included).
pub fn relevant_nodes(g: &Admg, a: &VSet, y: &VSet) -> VSet {
    let rest: VSet = g.vertices().difference(a).copied().collect();
    let y: VSet = y.difference(a).copied().collect();
    g.subgraph(&rest).ancestors(&y)
}

/// A set π of proper causal paths with its derived green edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathBundle {
    pub treatments: VSet,
    pub outcomes: VSet,
    pub paths: BTreeSet<CausalPath>,
    pub green: BTreeSet<(Vertex, Vertex)>,
}

impl PathBundle {
    pub fn is_green(&self, t: Vertex, h: Vertex) -> bool {
        self.green.contains(&(t, h))
    }

    pub fn contains(&self, p: &CausalPath) -> bool {
        self.paths.contains(p)
    }
}

/// Validates `paths` and derives green edges. Rejects improper paths and
/// bundles that omit a proper path all of whose edges are green.
pub fn make_bundle(
    g: &Admg,
    a: &VSet,
    y: &VSet,
    paths: impl IntoIterator<Item = CausalPath>,
) -> Result<PathBundle, PseError> {
    check_sets(g, a, y)?;
    let mut set = BTreeSet::new();
    for p in paths {
        if !p.is_proper(g, a, y) {
            let text = p
                .0
                .iter()
                .map(|&v| g.names().get(v).map(String::as_str).unwrap_or("?"))
                .collect::<Vec<_>>()
                .join(" -> ");
            return Err(PseError::NotProper(text));
        }
        set.insert(p);
    }
    let green: BTreeSet<(Vertex, Vertex)> = set.iter().flat_map(|p| p.edges()).collect();
    for p in proper_causal_paths(g, a, y)? {
        if !set.contains(&p) && p.edges().all(|e| green.contains(&e)) {
            return Err(PseError::Inconsistent(p.render(g)));
        }
    }
    Ok(PathBundle {
        treatments: a.clone(),
        outcomes: y.clone(),
        paths: set,
        green,
    })
}

/// The total-effect bundle: every proper causal path.
pub fn all_paths_bundle(g: &Admg, a: &VSet, y: &VSet) -> Result<PathBundle, PseError> {
    let paths = proper_causal_paths(g, a, y)?;
    make_bundle(g, a, y, paths)
}

pub fn empty_bundle(g: &Admg, a: &VSet, y: &VSet) -> Result<PathBundle, PseError> {
    make_bundle(g, a, y, Vec::new())
}

/// A recanting district with its witness path pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecantingReport {
    pub district: VSet,
    pub treatment: Vertex,
    pub path_in_pi: CausalPath,
    pub path_not_in_pi: CausalPath,
}

impl RecantingReport {
    pub fn render(&self, g: &Admg) -> String {
        format!(
            "recanting district {} via {}: in pi {}; not in pi {}",
            g.fmt_set(&self.district),
            g.name(self.treatment),
            self.path_in_pi.render(g),
            self.path_not_in_pi.render(g)
        )
    }
}

/// Shortest path from `z` to an outcome inside `reach`. With `need_blue`,
/// the path (together with the already-taken edge when `blue_seen`) must
/// contain a non-green edge; otherwise it must be entirely green.
fn witness_tail(
    g: &Admg,
    bundle: &PathBundle,
    reach: &VSet,
    z: Vertex,
    need_blue: bool,
    blue_seen: bool,
) -> Option<Vec<Vertex>> {
    let y = &bundle.outcomes;
    let done = |v: Vertex, b: bool| y.contains(&v) && b == need_blue;
    if !need_blue && blue_seen {
        return None;
    }
    let start = (z, blue_seen);
    if done(z, blue_seen) {
        return Some(vec![z]);
    }
    let mut prev: HashMap<(Vertex, bool), (Vertex, bool)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    prev.insert(start, start);
    while let Some((v, b)) = queue.pop_front() {
        for &c in g.ch(v) {
            if !reach.contains(&c) {
                continue;
            }
            let green = bundle.is_green(v, c);
            if !need_blue && !green {
                continue;
            }
            let nb = b || !green;
            let st = (c, nb);
            if prev.contains_key(&st) {
                continue;
            }
            prev.insert(st, (v, b));
            if done(c, nb) {
                let mut path = vec![c];
                let mut cur = st;
                while cur != start {
                    cur = prev[&cur];
                    path.push(cur.0);
                }
                path.reverse();
                // BFS over (vertex, flag) can revisit a vertex in both states
                let distinct: BTreeSet<_> = path.iter().collect();
                if distinct.len() == path.len() {
                    return Some(path);
                }
                continue;
            }
            queue.push_back(st);
        }
    }
    None
}

/// One report per recanting district of the subgraph on the relevant nodes.
/// Empty exactly when the effect is a functional of interventional
/// distributions.
pub fn find_recanting_districts(g: &Admg, bundle: &PathBundle) -> Vec<RecantingReport> {
    let a = &bundle.treatments;
    let reach = relevant_nodes(g, a, &bundle.outcomes);
    let sub = g.subgraph(&reach);
    let mut out = Vec::new();
    'district: for d in sub.districts() {
        for &t in a {
            let mut green_hit = None;
            let mut blue_hit = None;
            for &z in g.ch(t).intersection(&d) {
                let green = bundle.is_green(t, z);
                if green_hit.is_none() && green {
                    if let Some(tail) = witness_tail(g, bundle, &reach, z, false, false) {
                        green_hit = Some(tail);
                    }
                }
                if blue_hit.is_none() {
                    if let Some(tail) = witness_tail(g, bundle, &reach, z, true, !green) {
                        blue_hit = Some(tail);
                    }
                }
            }
            if let (Some(gp), Some(bp)) = (green_hit, blue_hit) {
                let mk = |tail: Vec<Vertex>| {
                    let mut v = vec![t];
                    v.extend(tail);
                    CausalPath(v)
                };
                out.push(RecantingReport {
                    district: d.clone(),
                    treatment: t,
                    path_in_pi: mk(gp),
                    path_not_in_pi: mk(bp),
                });
                continue 'district;
            }
        }
    }
    out
}

/// Active and baseline value labels per treatment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreatmentValues {
    map: BTreeMap<Vertex, (String, String)>,
}

impl TreatmentValues {
    /// Defaults every treatment to active `1`, baseline `0`.
    pub fn binary(a: &VSet) -> Self {
        TreatmentValues {
            map: a.iter().map(|&v| (v, ("1".into(), "0".into()))).collect(),
        }
    }

    pub fn set(&mut self, v: Vertex, active: &str, baseline: &str) {
        self.map.insert(v, (active.into(), baseline.into()));
    }

    pub fn is_treatment(&self, v: Vertex) -> bool {
        self.map.contains_key(&v)
    }

    pub fn active(&self, v: Vertex) -> &str {
        self.map.get(&v).map(|p| p.0.as_str()).unwrap_or("1")
    }

    pub fn baseline(&self, v: Vertex) -> &str {
        self.map.get(&v).map(|p| p.1.as_str()).unwrap_or("0")
    }

    /// Same treatments with active and baseline exchanged.
    pub fn swapped(&self) -> Self {
        TreatmentValues {
            map: self
                .map
                .iter()
                .map(|(&v, (a, b))| (v, (b.clone(), a.clone())))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vertex, &str, &str)> {
        self.map.iter().map(|(&v, (a, b))| (v, a.as_str(), b.as_str()))
    }
}

/// An argument of a counterfactual node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CfArg {
    Active,
    Baseline,
    /// A fixed value label.
    Const(String),
    /// Index of another node in the same arena.
    Sub(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CfNode {
    pub target: Vertex,
    /// One entry per parent of `target`, in declaration order.
    pub args: Vec<(Vertex, CfArg)>,
}

/// A nested counterfactual stored as a hash-consed arena: identical
/// subterms appear once, so a world evaluates each of them exactly once.
/// Nodes are stored children-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedCounterfactual {
    pub nodes: Vec<CfNode>,
    pub roots: Vec<(Vertex, usize)>,
    pub values: TreatmentValues,
}

#[derive(Default)]
pub struct ArenaBuilder {
    nodes: Vec<CfNode>,
    index: HashMap<CfNode, usize>,
}

impl ArenaBuilder {
    pub fn intern(&mut self, node: CfNode) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        let i = self.nodes.len();
        self.index.insert(node.clone(), i);
        self.nodes.push(node);
        i
    }

    pub fn finish(self, roots: Vec<(Vertex, usize)>, values: TreatmentValues) -> NestedCounterfactual {
        NestedCounterfactual {
            nodes: self.nodes,
            roots,
            values,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Mode {
    Pse,
    AllBaseline,
}

/// Unrolls the π-specific counterfactual of every outcome jointly.
pub fn unroll(g: &Admg, bundle: &PathBundle, values: &TreatmentValues) -> NestedCounterfactual {
    let a = &bundle.treatments;
    let mut arena = ArenaBuilder::default();
    let mut memo: HashMap<(Vertex, Mode), usize> = HashMap::new();
    fn go(
        g: &Admg,
        bundle: &PathBundle,
        v: Vertex,
        mode: Mode,
        arena: &mut ArenaBuilder,
        memo: &mut HashMap<(Vertex, Mode), usize>,
    ) -> usize {
        if let Some(&i) = memo.get(&(v, mode)) {
            return i;
        }
        let mut args = Vec::new();
        for &p in g.pa(v) {
            let green = mode == Mode::Pse && bundle.is_green(p, v);
            let arg = if bundle.treatments.contains(&p) {
                if green {
                    CfArg::Active
                } else {
                    CfArg::Baseline
                }
            } else {
                let m = if green { Mode::Pse } else { Mode::AllBaseline };
                CfArg::Sub(go(g, bundle, p, m, arena, memo))
            };
            args.push((p, arg));
        }
        let i = arena.intern(CfNode { target: v, args });
        memo.insert((v, mode), i);
        i
    }
    let roots = bundle
        .outcomes
        .iter()
        .filter(|y| !a.contains(y))
        .map(|&y| (y, go(g, bundle, y, Mode::Pse, &mut arena, &mut memo)))
        .collect();
    arena.finish(roots, values.clone())
}

/// Y(x) for a single regime: treatments fixed to active (or baseline),
/// everything else natural. Equivalent to unrolling the all-paths (or
/// empty) bundle.
pub fn unroll_regime(g: &Admg, a: &VSet, y: &VSet, values: &TreatmentValues, active: bool) -> NestedCounterfactual {
    let bundle = if active {
        all_paths_bundle(g, a, y)
    } else {
        empty_bundle(g, a, y)
    }
    .expect("valid treatment/outcome sets");
    unroll(g, &bundle, values)
}

impl NestedCounterfactual {
    pub fn targets(&self) -> VSet {
        self.nodes.iter().map(|n| n.target).collect()
    }

    fn render_node(&self, g: &Admg, i: usize, out: &mut String) {
        let node = &self.nodes[i];
        out.push_str(g.name(node.target));
        out.push('(');
        for (k, (p, arg)) in node.args.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            match arg {
                CfArg::Active => {
                    out.push_str(&format!("{}={}", g.name(*p), self.values.active(*p)))
                }
                CfArg::Baseline => {
                    out.push_str(&format!("{}={}", g.name(*p), self.values.baseline(*p)))
                }
                CfArg::Const(c) => out.push_str(&format!("{}={}", g.name(*p), c)),
                CfArg::Sub(j) => self.render_node(g, *j, out),
            }
        }
        out.push(')');
    }

    /// One line per outcome, e.g. `y(a=1, m(a=0))`.
    pub fn render(&self, g: &Admg) -> String {
        let mut lines = Vec::new();
        for &(_, i) in &self.roots {
            let mut s = String::new();
            self.render_node(g, i, &mut s);
            lines.push(s);
        }
        lines.join("\n")
    }
}
