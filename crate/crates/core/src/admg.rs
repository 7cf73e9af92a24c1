//! Acyclic directed mixed graphs.
//!
//! Vertices are identified by their declaration index. A subgraph keeps the
//! full name table of its host and only narrows the set of present vertices,
//! so vertex indices stay meaningful across every graph derived from one
//! declaration. All vertex sets are `BTreeSet<usize>`, which makes iteration
//! follow declaration order for free.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub type Vertex = usize;
pub type VSet = BTreeSet<Vertex>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),
    #[error("invalid vertex name `{0}`")]
    BadName(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("directed cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

#[derive(Clone)]
pub struct Admg {
    names: Arc<Vec<String>>,
    present: VSet,
    directed: Vec<(Vertex, Vertex)>,
    bidirected: Vec<(Vertex, Vertex)>,
    pa: Vec<VSet>,
    ch: Vec<VSet>,
    sib: Vec<VSet>,
}

impl PartialEq for Admg {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.present == other.present
            && self.directed.iter().collect::<BTreeSet<_>>()
                == other.directed.iter().collect::<BTreeSet<_>>()
            && self.bidirected.iter().collect::<BTreeSet<_>>()
                == other.bidirected.iter().collect::<BTreeSet<_>>()
    }
}

impl Eq for Admg {}

impl fmt::Debug for Admg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Admg {{ vertices: {}", self.fmt_set(&self.present))?;
        for &(a, b) in &self.directed {
            write!(f, ", {}->{}", self.name(a), self.name(b))?;
        }
        for &(a, b) in &self.bidirected {
            write!(f, ", {}<->{}", self.name(a), self.name(b))?;
        }
        write!(f, " }}")
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
        && !s.starts_with('\'')
}

/// Incremental constructor; `build` validates everything at once.
#[derive(Debug, Default, Clone)]
pub struct AdmgBuilder {
    names: Vec<String>,
    directed: Vec<(String, String)>,
    bidirected: Vec<(String, String)>,
}

impl AdmgBuilder {
    pub fn node(mut self, name: &str) -> Self {
        self.names.push(name.to_string());
        self
    }

    pub fn nodes(mut self, names: &[&str]) -> Self {
        self.names.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn edge(mut self, tail: &str, head: &str) -> Self {
        self.directed.push((tail.into(), head.into()));
        self
    }

    pub fn bidirected(mut self, a: &str, b: &str) -> Self {
        self.bidirected.push((a.into(), b.into()));
        self
    }

    pub fn build(self) -> Result<Admg, GraphError> {
        let mut names: Vec<String> = Vec::new();
        for n in self.names {
            if !valid_name(&n) {
                return Err(GraphError::BadName(n));
            }
            if names.contains(&n) {
                return Err(GraphError::DuplicateVertex(n));
            }
            names.push(n);
        }
        let find = |s: &str| {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| GraphError::UnknownVertex(s.to_string()))
        };
        let mut dir = Vec::new();
        for (t, h) in &self.directed {
            dir.push((find(t)?, find(h)?));
        }
        let mut bi = Vec::new();
        for (a, b) in &self.bidirected {
            bi.push((find(a)?, find(b)?));
        }
        Admg::from_indices(names, dir, bi)
    }
}

impl Admg {
    pub fn builder() -> AdmgBuilder {
        AdmgBuilder::default()
    }

    /// Builds from a name table and index-based edges. Bidirected edges are
    /// normalised to (lower, higher) declaration index.
    pub fn from_indices(
        names: Vec<String>,
        directed: Vec<(Vertex, Vertex)>,
        bidirected: Vec<(Vertex, Vertex)>,
    ) -> Result<Admg, GraphError> {
        let n = names.len();
        let mut pa = vec![VSet::new(); n];
        let mut ch = vec![VSet::new(); n];
        let mut sib = vec![VSet::new(); n];
        for &(t, h) in &directed {
            assert!(t < n && h < n, "edge endpoint out of range");
            if t == h {
                return Err(GraphError::SelfLoop(names[t].clone()));
            }
            if !ch[t].insert(h) {
                return Err(GraphError::DuplicateEdge(format!(
                    "{} -> {}",
                    names[t], names[h]
                )));
            }
            pa[h].insert(t);
        }
        let mut bi = Vec::with_capacity(bidirected.len());
        for &(a, b) in &bidirected {
            assert!(a < n && b < n, "edge endpoint out of range");
            if a == b {
                return Err(GraphError::SelfLoop(names[a].clone()));
            }
            let (a, b) = (a.min(b), a.max(b));
            if !sib[a].insert(b) {
                return Err(GraphError::DuplicateEdge(format!(
                    "{} <-> {}",
                    names[a], names[b]
                )));
            }
            sib[b].insert(a);
            bi.push((a, b));
        }
        let g = Admg {
            names: Arc::new(names),
            present: (0..n).collect(),
            directed,
            bidirected: bi,
            pa,
            ch,
            sib,
        };
        if let Some(cycle) = g.find_cycle() {
            return Err(GraphError::Cycle(
                cycle.iter().map(|&v| g.names[v].clone()).collect(),
            ));
        }
        Ok(g)
    }

    fn find_cycle(&self) -> Option<Vec<Vertex>> {
        // 0 = unseen, 1 = on stack, 2 = done
        let n = self.names.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<Vertex> = Vec::new();
        fn dfs(
            g: &Admg,
            v: Vertex,
            state: &mut [u8],
            stack: &mut Vec<Vertex>,
        ) -> Option<Vec<Vertex>> {
            state[v] = 1;
            stack.push(v);
            for &c in &g.ch[v] {
                if state[c] == 1 {
                    let start = stack.iter().position(|&x| x == c).unwrap();
                    let mut cyc = stack[start..].to_vec();
                    cyc.push(c);
                    return Some(cyc);
                }
                if state[c] == 0 {
                    if let Some(c) = dfs(g, c, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        for v in 0..n {
            if state[v] == 0 {
                if let Some(c) = dfs(self, v, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Size of the shared name table (not the number of present vertices).
    pub fn universe(&self) -> usize {
        self.names.len()
    }

    pub fn vertices(&self) -> &VSet {
        &self.present
    }

    pub fn len(&self) -> usize {
        self.present.len()
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.present.contains(&v)
    }

    pub fn name(&self, v: Vertex) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of a present vertex by name.
    pub fn index(&self, name: &str) -> Result<Vertex, GraphError> {
        self.names
            .iter()
            .position(|n| n == name)
            .filter(|v| self.present.contains(v))
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub fn set(&self, names: &[&str]) -> Result<VSet, GraphError> {
        names.iter().map(|n| self.index(n)).collect()
    }

    pub fn check_set(&self, w: &VSet) -> Result<(), GraphError> {
        match w.iter().find(|v| !self.present.contains(v)) {
            Some(&v) => Err(GraphError::UnknownVertex(
                self.names.get(v).cloned().unwrap_or_else(|| format!("#{v}")),
            )),
            None => Ok(()),
        }
    }

    pub fn directed_edges(&self) -> &[(Vertex, Vertex)] {
        &self.directed
    }

    pub fn bidirected_edges(&self) -> &[(Vertex, Vertex)] {
        &self.bidirected
    }

    pub fn has_edge(&self, t: Vertex, h: Vertex) -> bool {
        self.ch[t].contains(&h)
    }

    pub fn has_bidirected(&self, a: Vertex, b: Vertex) -> bool {
        self.sib[a].contains(&b)
    }

    pub fn pa(&self, v: Vertex) -> &VSet {
        &self.pa[v]
    }

    pub fn ch(&self, v: Vertex) -> &VSet {
        &self.ch[v]
    }

    pub fn sib(&self, v: Vertex) -> &VSet {
        &self.sib[v]
    }

    pub fn parents(&self, w: &VSet) -> VSet {
        w.iter().flat_map(|&v| self.pa[v].iter().copied()).collect()
    }

    pub fn children(&self, w: &VSet) -> VSet {
        w.iter().flat_map(|&v| self.ch[v].iter().copied()).collect()
    }

    fn closure(&self, w: &VSet, up: bool) -> VSet {
        let mut seen: VSet = w.clone();
        let mut queue: VecDeque<Vertex> = w.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            let next = if up { &self.pa[v] } else { &self.ch[v] };
            for &u in next {
                if seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Reflexive ancestors.
    pub fn ancestors(&self, w: &VSet) -> VSet {
        self.closure(w, true)
    }

    /// Reflexive descendants.
    pub fn descendants(&self, w: &VSet) -> VSet {
        self.closure(w, false)
    }

    pub fn subgraph(&self, s: &VSet) -> Admg {
        let keep = |v: &Vertex| s.contains(v) && self.present.contains(v);
        let mut pa = self.pa.clone();
        let mut ch = self.ch.clone();
        let mut sib = self.sib.clone();
        for v in 0..self.names.len() {
            if keep(&v) {
                pa[v].retain(keep);
                ch[v].retain(keep);
                sib[v].retain(keep);
            } else {
                pa[v].clear();
                ch[v].clear();
                sib[v].clear();
            }
        }
        Admg {
            names: Arc::clone(&self.names),
            present: self.present.iter().copied().filter(|v| s.contains(v)).collect(),
            directed: self
                .directed
                .iter()
                .copied()
                .filter(|(a, b)| keep(a) && keep(b))
                .collect(),
            bidirected: self
                .bidirected
                .iter()
                .copied()
                .filter(|(a, b)| keep(a) && keep(b))
                .collect(),
            pa,
            ch,
            sib,
        }
    }

    /// Bidirected-reachable set of `v` (its district).
    pub fn district_of(&self, v: Vertex) -> VSet {
        let mut seen = VSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.sib[u] {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Districts ordered by their least member.
    pub fn districts(&self) -> Vec<VSet> {
        let mut out: Vec<VSet> = Vec::new();
        let mut covered = VSet::new();
        for &v in &self.present {
            if covered.contains(&v) {
                continue;
            }
            let d = self.district_of(v);
            covered.extend(d.iter().copied());
            out.push(d);
        }
        out
    }

    /// Members of `d` with no directed child inside `d`.
    pub fn district_sinks(&self, d: &VSet) -> Result<VSet, GraphError> {
        self.check_set(d)?;
        Ok(d
            .iter()
            .copied()
            .filter(|&v| self.ch[v].is_disjoint(d))
            .collect())
    }

    /// Topological order; ties broken by declaration order.
    pub fn topological_order(&self) -> Vec<Vertex> {
        let mut indeg: Vec<usize> = (0..self.names.len()).map(|v| self.pa[v].len()).collect();
        let mut ready: BTreeSet<Vertex> = self
            .present
            .iter()
            .copied()
            .filter(|&v| indeg[v] == 0)
            .collect();
        let mut out = Vec::with_capacity(self.present.len());
        while let Some(v) = ready.pop_first() {
            out.push(v);
            for &c in &self.ch[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        debug_assert_eq!(out.len(), self.present.len(), "acyclicity invariant");
        out
    }

    pub fn fmt_set(&self, w: &VSet) -> String {
        let parts: Vec<&str> = w.iter().map(|&v| self.name(v)).collect();
        format!("{{{}}}", parts.join(","))
    }

    /// Graph with the same vertices and every edge relabelled by `perm`
    /// (`perm[old] = new name`). Used for isomorphism checks.
    pub fn relabel(&self, new_names: Vec<String>) -> Result<Admg, GraphError> {
        assert_eq!(new_names.len(), self.names.len());
        let g = Admg::from_indices(new_names, self.directed.clone(), self.bidirected.clone())?;
        Ok(g.subgraph(&self.present))
    }
}

/// m-separation of `x` and `y` given `z`, via the moralised ancestral graph:
/// two vertices are joined if adjacent, or if both lie in `D ∪ pa(D)` for
/// some district `D` of the ancestral subgraph.
pub fn m_separated(g: &Admg, x: &VSet, y: &VSet, z: &VSet) -> bool {
    if !x.is_disjoint(y) {
        return false;
    }
    let mut seed = x.clone();
    seed.extend(y.iter().copied());
    seed.extend(z.iter().copied());
    let anc = g.ancestors(&seed);
    let h = g.subgraph(&anc);
    let n = g.universe();
    let mut adj = vec![VSet::new(); n];
    let join = |a: Vertex, b: Vertex, adj: &mut Vec<VSet>| {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    };
    for &(a, b) in h.directed_edges() {
        join(a, b, &mut adj);
    }
    for d in h.districts() {
        let mut block = d.clone();
        block.extend(h.parents(&d));
        let members: Vec<Vertex> = block.into_iter().collect();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                join(members[i], members[j], &mut adj);
            }
        }
    }
    let mut seen: VSet = x.clone();
    let mut queue: VecDeque<Vertex> = x.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if z.contains(&u) || !seen.insert(u) {
                continue;
            }
            if y.contains(&u) {
                return false;
            }
            queue.push_back(u);
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mixed_time_med() -> Admg {
        Admg::builder()
            .nodes(&["a0", "l1", "m1", "a1", "l2", "m2", "y"])
            .edge("a0", "l1")
            .edge("l1", "m1")
            .edge("a0", "m1")
            .edge("m1", "a1")
            .edge("a1", "l2")
            .edge("l2", "m2")
            .edge("a1", "m2")
            .edge("m2", "y")
            .edge("m1", "y")
            .edge("a1", "y")
            .edge("a0", "y")
            .edge("l1", "y")
            .edge("l2", "y")
            .edge("l1", "l2")
            .edge("m1", "m2")
            .bidirected("l1", "l2")
            .bidirected("l1", "y")
            .bidirected("l2", "y")
            .build()
            .unwrap()
    }

    fn names(g: &Admg, w: &VSet) -> Vec<String> {
        let mut v: Vec<String> = w.iter().map(|&i| g.name(i).to_string()).collect();
        v.sort();
        v
    }

    fn sorted(xs: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = xs.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn parents_of_outcome() {
        let g = mixed_time_med();
        let p = g.parents(&g.set(&["y"]).unwrap());
        assert_eq!(names(&g, &p), sorted(&["a0", "a1", "l1", "l2", "m1", "m2"]));
        assert!(g.parents(&VSet::new()).is_empty());
        assert!(g.set(&["zz"]).is_err());
    }

    #[test]
    fn ancestors_in_dag_with_latent_vertex() {
        let g = Admg::builder()
            .nodes(&["a0", "u", "l1", "m1", "a1", "l2", "m2", "y"])
            .edge("a0", "u")
            .edge("u", "l1")
            .edge("u", "l2")
            .edge("u", "y")
            .edge("a0", "l1")
            .edge("l1", "m1")
            .edge("a0", "m1")
            .edge("m1", "a1")
            .edge("a1", "l2")
            .edge("l2", "m2")
            .edge("a1", "m2")
            .edge("m2", "y")
            .edge("m1", "y")
            .edge("a1", "y")
            .build()
            .unwrap();
        let an = g.ancestors(&g.set(&["m1"]).unwrap());
        assert_eq!(names(&g, &an), sorted(&["m1", "l1", "a0", "u"]));
    }

    #[test]
    fn ancestors_reflexive_and_complete() {
        let e = Admg::builder().nodes(&["v", "w"]).build().unwrap();
        assert_eq!(e.ancestors(&VSet::from([0])), VSet::from([0]));
        let g = mixed_time_med();
        assert_eq!(g.ancestors(&g.set(&["y"]).unwrap()).len(), 7);
    }

    #[test]
    fn subgraph_keeps_internal_edges() {
        let g = mixed_time_med();
        let s = g.subgraph(&g.set(&["l1", "l2", "y"]).unwrap());
        assert_eq!(s.bidirected_edges().len(), 3);
        let mut d: Vec<(&str, &str)> = s
            .directed_edges()
            .iter()
            .map(|&(a, b)| (s.name(a), s.name(b)))
            .collect();
        d.sort();
        assert_eq!(d, vec![("l1", "l2"), ("l1", "y"), ("l2", "y")]);
        assert_eq!(g.subgraph(g.vertices()), g);
    }

    #[test]
    fn districts_and_sinks() {
        let g = mixed_time_med();
        let ds: Vec<Vec<String>> = g.districts().iter().map(|d| names(&g, d)).collect();
        assert_eq!(
            ds,
            vec![
                sorted(&["a0"]),
                sorted(&["l1", "l2", "y"]),
                sorted(&["m1"]),
                sorted(&["a1"]),
                sorted(&["m2"]),
            ]
        );
        let dy = g.district_of(g.index("y").unwrap());
        assert_eq!(names(&g, &g.district_sinks(&dy).unwrap()), sorted(&["y"]));

        let chain = Admg::builder()
            .nodes(&["v1", "v2", "v3"])
            .edge("v1", "v2")
            .edge("v2", "v3")
            .bidirected("v1", "v2")
            .bidirected("v2", "v3")
            .build()
            .unwrap();
        let all = chain.vertices().clone();
        assert_eq!(chain.district_sinks(&all).unwrap(), VSet::from([2]));
        let flat = Admg::builder()
            .nodes(&["p", "q"])
            .bidirected("p", "q")
            .build()
            .unwrap();
        assert_eq!(flat.district_sinks(flat.vertices()).unwrap().len(), 2);
    }

    #[test]
    fn topological_order_is_stable() {
        let g = Admg::builder()
            .nodes(&["y", "m", "a"])
            .edge("a", "m")
            .edge("m", "y")
            .edge("a", "y")
            .build()
            .unwrap();
        let order: Vec<&str> = g.topological_order().iter().map(|&v| g.name(v)).collect();
        assert_eq!(order, vec!["a", "m", "y"]);
        let e = Admg::builder().nodes(&["x", "y", "z"]).build().unwrap();
        assert_eq!(e.topological_order(), vec![0, 1, 2]);
    }

    #[test]
    fn construction_rejects_bad_input() {
        let cyc = Admg::builder()
            .nodes(&["a", "b"])
            .edge("a", "b")
            .edge("b", "a")
            .build();
        assert!(matches!(cyc, Err(GraphError::Cycle(_))));
        let dup = Admg::builder()
            .nodes(&["a", "b"])
            .bidirected("a", "b")
            .bidirected("b", "a")
            .build();
        assert!(matches!(dup, Err(GraphError::DuplicateEdge(_))));
        let lp = Admg::builder().nodes(&["a"]).edge("a", "a").build();
        assert!(matches!(lp, Err(GraphError::SelfLoop(_))));
        let unk = Admg::builder().nodes(&["a"]).edge("a", "b").build();
        assert!(matches!(unk, Err(GraphError::UnknownVertex(_))));
    }

    #[test]
    fn m_separation_basics() {
        // a -> m -> y, a <-> y: a and y never separated
        let g = Admg::builder()
            .nodes(&["a", "m", "y"])
            .edge("a", "m")
            .edge("m", "y")
            .bidirected("a", "y")
            .build()
            .unwrap();
        let (a, m, y) = (VSet::from([0]), VSet::from([1]), VSet::from([2]));
        assert!(!m_separated(&g, &a, &y, &m));
        let chain = g.subgraph(&VSet::from([0, 1, 2]));
        let dag = Admg::from_indices(chain.names().to_vec(), vec![(0, 1), (1, 2)], vec![]).unwrap();
        assert!(m_separated(&dag, &a, &y, &m));
        assert!(!m_separated(&dag, &a, &y, &VSet::new()));
        // collider a -> m <- y
        let col = Admg::from_indices(dag.names().to_vec(), vec![(0, 1), (2, 1)], vec![]).unwrap();
        assert!(m_separated(&col, &a, &y, &VSet::new()));
        assert!(!m_separated(&col, &a, &y, &m));
    }
}
