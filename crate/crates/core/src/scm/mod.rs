//! Discrete structural causal models evaluated by exhaustive enumeration of
//! the exogenous noise.
//!
//! Every observed vertex has its own independent noise source, and every
//! bidirected edge has one shared source read by both endpoints. A
//! mechanism is a total table from (parent values in declaration order,
//! then attached noise values: own first, then incident bidirected edges in
//! edge order) to a value index, stored first-input-most-significant.

mod counter;
mod table;

pub use counter::{counterexample_models, parity_models, split_treatment_term};
pub use table::DistTable;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::admg::{Admg, Vertex};
use crate::pse::{CfArg, NestedCounterfactual};
use crate::scalar::Scalar;

/// Largest number of joint noise configurations enumerated.
pub const MAX_NOISE_CONFIGS: u128 = 1 << 24;

/// Intervention: vertex → value index.
pub type Regime = BTreeMap<Vertex, usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScmError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("vertex #{0} is not in the table")]
    MissingVariable(Vertex),
    #[error("value `{label}` is not in the domain of `{vertex}`")]
    UnknownValue { vertex: String, label: String },
    #[error("value index {index} out of range for `{vertex}`")]
    OutOfDomain { vertex: String, index: usize },
    #[error("{configs} joint noise configurations exceed the enumeration limit of {limit}")]
    TooLarge { configs: u128, limit: u128 },
    #[error("the truncation formula needs a model without bidirected edges")]
    HasBidirected,
    #[error("{0}")]
    Construction(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource<T> {
    pub name: String,
    pub probs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm<T> {
    graph: Admg,
    domains: Vec<Vec<String>>,
    noises: Vec<NoiseSource<T>>,
    attached: Vec<Vec<usize>>,
    tables: Vec<Vec<usize>>,
}

/// Joint noise assignments with nonzero probability, in canonical order.
pub struct Worlds<T> {
    noise: Vec<Vec<usize>>,
    weight: Vec<T>,
}

impl<T> Worlds<T> {
    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }
}

impl<T: Scalar> DiscreteScm<T> {
    fn assemble(
        graph: Admg,
        domains: Vec<Vec<String>>,
        own_noise: Vec<Vec<T>>,
        bi_noise: Vec<Vec<T>>,
    ) -> Result<Self, ScmError> {
        let n = graph.universe();
        if domains.len() != n || own_noise.len() != n {
            return Err(ScmError::Invalid("per-vertex lists must cover every vertex".into()));
        }
        if bi_noise.len() != graph.bidirected_edges().len() {
            return Err(ScmError::Invalid("one noise table per bidirected edge is required".into()));
        }
        let mut noises = Vec::new();
        let mut attached = vec![Vec::new(); n];
        for &v in graph.vertices() {
            attached[v].push(noises.len());
            noises.push(NoiseSource { name: format!("u({})", graph.name(v)), probs: own_noise[v].clone() });
        }
        for (k, &(x, y)) in graph.bidirected_edges().iter().enumerate() {
            attached[x].push(noises.len());
            attached[y].push(noises.len());
            noises.push(NoiseSource {
                name: format!("u({},{})", graph.name(x), graph.name(y)),
                probs: bi_noise[k].clone(),
            });
        }
        let m = DiscreteScm { graph, domains, noises, attached, tables: vec![Vec::new(); n] };
        for &v in m.graph.vertices() {
            if m.domains[v].is_empty() {
                return Err(ScmError::Invalid(format!("empty domain for `{}`", m.graph.name(v))));
            }
            let mut seen = std::collections::BTreeSet::new();
            if !m.domains[v].iter().all(|l| seen.insert(l)) {
                return Err(ScmError::Invalid(format!("repeated value in the domain of `{}`", m.graph.name(v))));
            }
        }
        for s in &m.noises {
            if s.probs.is_empty() || s.probs.iter().any(|p| *p < T::zero()) {
                return Err(ScmError::Invalid(format!("noise `{}` needs nonnegative probabilities", s.name)));
            }
            let total = s.probs.iter().fold(T::zero(), |a, p| a + p.clone());
            let ok = if T::is_exact() { total == T::one() } else { (total.to_f64() - 1.0).abs() < 1e-9 };
            if !ok {
                return Err(ScmError::Invalid(format!("noise `{}` sums to {}", s.name, total.to_text())));
            }
        }
        Ok(m)
    }

    /// Builds and validates a model.
    ///
    /// `domains`, `own_noise` and `tables` are indexed by vertex (entries for
    /// vertices outside the graph are ignored); `bi_noise` follows
    /// `graph.bidirected_edges()`.
    pub fn new(
        graph: Admg,
        domains: Vec<Vec<String>>,
        own_noise: Vec<Vec<T>>,
        bi_noise: Vec<Vec<T>>,
        tables: Vec<Vec<usize>>,
    ) -> Result<Self, ScmError> {
        let mut m = Self::assemble(graph, domains, own_noise, bi_noise)?;
        if tables.len() != m.graph.universe() {
            return Err(ScmError::Invalid("per-vertex lists must cover every vertex".into()));
        }
        m.tables = tables;
        for &v in m.graph.vertices() {
            let size: usize = m.input_radices(v).iter().product();
            let name = m.graph.name(v);
            if m.tables[v].len() != size {
                return Err(ScmError::Invalid(format!(
                    "mechanism table of `{name}` has {} rows, needs {size}",
                    m.tables[v].len()
                )));
            }
            if let Some(&bad) = m.tables[v].iter().find(|&&x| x >= m.domains[v].len()) {
                return Err(ScmError::OutOfDomain { vertex: name.to_string(), index: bad });
            }
        }
        Ok(m)
    }

    /// Builds the mechanism tables from `f(vertex, parent values, attached
    /// noise values)`.
    pub fn from_fn(
        graph: Admg,
        domains: Vec<Vec<String>>,
        own_noise: Vec<Vec<T>>,
        bi_noise: Vec<Vec<T>>,
        mut f: impl FnMut(Vertex, &[usize], &[usize]) -> usize,
    ) -> Result<Self, ScmError> {
        let m = Self::assemble(graph, domains, own_noise, bi_noise)?;
        let mut tables = vec![Vec::new(); m.graph.universe()];
        for &v in m.graph.vertices() {
            let radices = m.input_radices(v);
            let np = m.graph.pa(v).len();
            let size: usize = radices.iter().product();
            let mut digits = vec![0; radices.len()];
            let mut rows = Vec::with_capacity(size);
            for _ in 0..size {
                rows.push(f(v, &digits[..np], &digits[np..]));
                for k in (0..digits.len()).rev() {
                    digits[k] += 1;
                    if digits[k] < radices[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            tables[v] = rows;
        }
        let DiscreteScm { graph, domains, noises, attached, .. } = m;
        let own = graph.vertices().iter().map(|&v| (v, noises[attached[v][0]].probs.clone())).collect::<BTreeMap<_, _>>();
        let own_noise = (0..graph.universe()).map(|v| own.get(&v).cloned().unwrap_or_default()).collect();
        let nv = graph.len();
        let bi_noise = noises[nv..].iter().map(|s| s.probs.clone()).collect();
        Self::new(graph, domains, own_noise, bi_noise, tables)
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn domain(&self, v: Vertex) -> &[String] {
        &self.domains[v]
    }

    pub fn noises(&self) -> &[NoiseSource<T>] {
        &self.noises
    }

    /// Indices into [`Self::noises`] read by `v`'s mechanism.
    pub fn attached(&self, v: Vertex) -> &[usize] {
        &self.attached[v]
    }

    pub fn table(&self, v: Vertex) -> &[usize] {
        &self.tables[v]
    }

    /// Radices of the mechanism inputs of `v`: parents, then attached noises.
    pub fn input_radices(&self, v: Vertex) -> Vec<usize> {
        let mut r: Vec<usize> = self.graph.pa(v).iter().map(|&p| self.domains[p].len()).collect();
        r.extend(self.attached[v].iter().map(|&k| self.noises[k].probs.len()));
        r
    }

    pub fn value_index(&self, v: Vertex, label: &str) -> Result<usize, ScmError> {
        self.domains[v].iter().position(|l| l == label).ok_or_else(|| ScmError::UnknownValue {
            vertex: self.graph.name(v).to_string(),
            label: label.to_string(),
        })
    }

    /// Number of joint noise configurations.
    pub fn noise_configs(&self) -> u128 {
        self.noises.iter().fold(1u128, |acc, s| acc.saturating_mul(s.probs.len() as u128))
    }

    /// Every joint noise assignment with nonzero probability.
    pub fn worlds(&self) -> Result<Worlds<T>, ScmError> {
        let configs = self.noise_configs();
        if configs > MAX_NOISE_CONFIGS {
            return Err(ScmError::TooLarge { configs, limit: MAX_NOISE_CONFIGS });
        }
        let mut noise = vec![Vec::new()];
        let mut weight = vec![T::one()];
        for s in &self.noises {
            let mut nn = Vec::with_capacity(noise.len() * s.probs.len());
            let mut nw = Vec::with_capacity(noise.len() * s.probs.len());
            for (prefix, w) in noise.iter().zip(&weight) {
                for (x, p) in s.probs.iter().enumerate() {
                    if p.is_zero() {
                        continue;
                    }
                    let mut n = prefix.clone();
                    n.push(x);
                    nn.push(n);
                    nw.push(w.clone() * p.clone());
                }
            }
            noise = nn;
            weight = nw;
        }
        Ok(Worlds { noise, weight })
    }

    fn mech(&self, v: Vertex, parent: impl Fn(Vertex) -> usize, noise: &[usize]) -> usize {
        let mut idx = 0;
        for &p in self.graph.pa(v) {
            idx = idx * self.domains[p].len() + parent(p);
        }
        for &k in &self.attached[v] {
            idx = idx * self.noises[k].probs.len() + noise[k];
        }
        self.tables[v][idx]
    }

    fn check_regime(&self, regime: &Regime) -> Result<(), ScmError> {
        for (&v, &x) in regime {
            if !self.graph.contains(v) {
                return Err(ScmError::Invalid(format!("vertex #{v} is not in the model")));
            }
            if x >= self.domains[v].len() {
                return Err(ScmError::OutOfDomain { vertex: self.graph.name(v).to_string(), index: x });
            }
        }
        Ok(())
    }

    fn order(&self) -> Vec<Vertex> {
        self.graph.topological_order()
    }

    fn empty_table(&self, vars: Vec<Vertex>) -> DistTable<T> {
        let names = vars.iter().map(|&v| self.graph.name(v).to_string()).collect();
        let domains: Vec<Vec<String>> = vars.iter().map(|&v| self.domains[v].clone()).collect();
        let size = domains.iter().map(|d| d.len()).product();
        DistTable::unchecked(vars, names, domains, vec![T::zero(); size]).expect("consistent shape")
    }

    /// Joint of the non-intervened vertices under `regime`, using a
    /// precomputed world list.
    pub fn interventional_in(&self, worlds: &Worlds<T>, regime: &Regime) -> Result<DistTable<T>, ScmError> {
        self.check_regime(regime)?;
        let order = self.order();
        let vars: Vec<Vertex> = self.graph.vertices().iter().copied().filter(|v| !regime.contains_key(v)).collect();
        let mut out = self.empty_table(vars.clone());
        let mut probs = vec![T::zero(); out.len()];
        let mut val = vec![0usize; self.graph.universe()];
        for (noise, w) in worlds.noise.iter().zip(&worlds.weight) {
            for &v in &order {
                val[v] = match regime.get(&v) {
                    Some(&x) => x,
                    None => self.mech(v, |p| val[p], noise),
                };
            }
            let a: Vec<usize> = vars.iter().map(|&v| val[v]).collect();
            let i = out.index_of(&a);
            probs[i] = probs[i].clone() + w.clone();
        }
        out = DistTable::unchecked(vars, out.names().to_vec(), out.domains().to_vec(), probs)?;
        Ok(out)
    }

    pub fn observational_dist(&self) -> Result<DistTable<T>, ScmError> {
        self.interventional_dist(&Regime::new())
    }

    /// Distribution of the mutilated model: intervened mechanisms replaced
    /// by constants. The table covers the non-intervened vertices.
    pub fn interventional_dist(&self, regime: &Regime) -> Result<DistTable<T>, ScmError> {
        self.interventional_in(&self.worlds()?, regime)
    }

    /// Conditional table p(v | pa(v)) with the own noise summed out, indexed
    /// like the parent part of the mechanism table. Only meaningful for
    /// vertices with no bidirected edge.
    fn cpt(&self, v: Vertex) -> Vec<Vec<T>> {
        let np: usize = self.graph.pa(v).iter().map(|&p| self.domains[p].len()).product();
        let own = &self.noises[self.attached[v][0]].probs;
        let mut out = vec![vec![T::zero(); self.domains[v].len()]; np];
        for (row, dist) in out.iter_mut().enumerate() {
            for (e, p) in own.iter().enumerate() {
                let x = self.tables[v][row * own.len() + e];
                dist[x] = dist[x].clone() + p.clone();
            }
        }
        out
    }

    /// The truncation formula Π_{v ∉ R} p(x_v | x_pa(v)) with intervened
    /// values substituted, for models without bidirected edges.
    pub fn truncated_factorization(&self, regime: &Regime) -> Result<DistTable<T>, ScmError> {
        if !self.graph.bidirected_edges().is_empty() {
            return Err(ScmError::HasBidirected);
        }
        self.check_regime(regime)?;
        let free: Vec<Vertex> = self.graph.vertices().iter().copied().filter(|v| !regime.contains_key(v)).collect();
        let cpts: BTreeMap<Vertex, Vec<Vec<T>>> = free.iter().map(|&v| (v, self.cpt(v))).collect();
        let shell = self.empty_table(free.clone());
        let mut probs = Vec::with_capacity(shell.len());
        let mut val = vec![0usize; self.graph.universe()];
        for (&v, &x) in regime {
            val[v] = x;
        }
        for i in 0..shell.len() {
            for (k, x) in shell.assignment(i).into_iter().enumerate() {
                val[free[k]] = x;
            }
            let mut p = T::one();
            for &v in &free {
                let row = self.graph.pa(v).iter().fold(0, |acc, &q| acc * self.domains[q].len() + val[q]);
                p = p * cpts[&v][row][val[v]].clone();
                if p.is_zero() {
                    break;
                }
            }
            probs.push(p);
        }
        DistTable::unchecked(free, shell.names().to_vec(), shell.domains().to_vec(), probs)
    }

    fn resolve_args(&self, term: &NestedCounterfactual) -> Result<Vec<Vec<Option<usize>>>, ScmError> {
        let mut out = Vec::with_capacity(term.nodes.len());
        for node in &term.nodes {
            let pa: Vec<Vertex> = self.graph.pa(node.target).iter().copied().collect();
            let given: Vec<Vertex> = node.args.iter().map(|(p, _)| *p).collect();
            if pa != given {
                return Err(ScmError::Invalid(format!(
                    "counterfactual node for `{}` does not list exactly its parents",
                    self.graph.name(node.target)
                )));
            }
            let mut fixed = Vec::with_capacity(node.args.len());
            for (p, arg) in &node.args {
                fixed.push(match arg {
                    CfArg::Active => Some(self.value_index(*p, term.values.active(*p))?),
                    CfArg::Baseline => Some(self.value_index(*p, term.values.baseline(*p))?),
                    CfArg::Const(c) => Some(self.value_index(*p, c)?),
                    CfArg::Sub(_) => None,
                });
            }
            out.push(fixed);
        }
        Ok(out)
    }

    /// Joint distribution of the root terms of a nested counterfactual. Each
    /// arena node is evaluated once per noise draw, so shared subterms take
    /// the same value wherever they occur.
    pub fn counterfactual_dist(&self, term: &NestedCounterfactual) -> Result<DistTable<T>, ScmError> {
        let worlds = self.worlds()?;
        self.counterfactual_in(&worlds, term)
    }

    pub fn counterfactual_in(&self, worlds: &Worlds<T>, term: &NestedCounterfactual) -> Result<DistTable<T>, ScmError> {
        let fixed = self.resolve_args(term)?;
        let vars: Vec<Vertex> = term.roots.iter().map(|&(v, _)| v).collect();
        let shell = self.empty_table(vars.clone());
        let mut probs = vec![T::zero(); shell.len()];
        let mut val = vec![0usize; term.nodes.len()];
        for (noise, w) in worlds.noise.iter().zip(&worlds.weight) {
            for (i, node) in term.nodes.iter().enumerate() {
                let mut idx = 0;
                for ((p, arg), f) in node.args.iter().zip(&fixed[i]) {
                    let x = match (arg, f) {
                        (CfArg::Sub(j), _) => val[*j],
                        (_, Some(x)) => *x,
                        _ => unreachable!("resolved above"),
                    };
                    idx = idx * self.domains[*p].len() + x;
                }
                for &k in &self.attached[node.target] {
                    idx = idx * self.noises[k].probs.len() + noise[k];
                }
                val[i] = self.tables[node.target][idx];
            }
            let a: Vec<usize> = term.roots.iter().map(|&(_, i)| val[i]).collect();
            let k = shell.index_of(&a);
            probs[k] = probs[k].clone() + w.clone();
        }
        DistTable::unchecked(vars, shell.names().to_vec(), shell.domains().to_vec(), probs)
    }

    /// Every regime over the observed vertices: each vertex is either left
    /// alone or set to one of its values.
    pub fn all_regimes(&self) -> Vec<Regime> {
        let mut out = vec![Regime::new()];
        for &v in self.graph.vertices() {
            let mut next = Vec::with_capacity(out.len() * (self.domains[v].len() + 1));
            for r in &out {
                next.push(r.clone());
                for x in 0..self.domains[v].len() {
                    let mut r2 = r.clone();
                    r2.insert(v, x);
                    next.push(r2);
                }
            }
            out = next;
        }
        out
    }
}

/// First regime (in [`DiscreteScm::all_regimes`] order) on which the two
/// models' interventional distributions differ, if any.
pub fn first_interventional_disagreement<T: Scalar>(
    m1: &DiscreteScm<T>,
    m2: &DiscreteScm<T>,
) -> Result<Option<Regime>, ScmError> {
    if m1.graph.vertices() != m2.graph.vertices() || (0..m1.graph.universe()).any(|v| m1.domains[v] != m2.domains[v]) {
        return Err(ScmError::Invalid("models differ in vertices or domains".into()));
    }
    let (w1, w2) = (m1.worlds()?, m2.worlds()?);
    for r in m1.all_regimes() {
        if m1.interventional_in(&w1, &r)? != m2.interventional_in(&w2, &r)? {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests;
