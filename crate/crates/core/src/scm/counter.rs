//! Bit-parity model pairs that agree on every interventional distribution
//! but disagree on a path-specific effect.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::admg::{Admg, VSet, Vertex};
use crate::pse::{relevant_nodes, ArenaBuilder, CfArg, CfNode, NestedCounterfactual, PathBundle, RecantingReport, TreatmentValues};
use crate::scalar::Scalar;

use super::{DiscreteScm, ScmError};

fn binary() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

fn fair<T: Scalar>() -> Vec<T> {
    vec![T::from_ratio(1, 2), T::from_ratio(1, 2)]
}

/// Two models on a single district plus one treatment `a`: every variable
/// is the parity of its parents and incident bidirected sources (fair
/// bits). In the second model `green_child` and `blue_child` ignore `a`;
/// every other edge out of `a` is vacuous in both.
pub fn parity_models<T: Scalar>(
    d_graph: &Admg,
    a: Vertex,
    green_child: Vertex,
    blue_child: Vertex,
) -> Result<(DiscreteScm<T>, DiscreteScm<T>), ScmError> {
    let bad = |m: &str| Err(ScmError::Construction(m.to_string()));
    if !d_graph.contains(a) || !d_graph.sib(a).is_empty() {
        return bad("the treatment must be in the graph and outside the district");
    }
    let d: VSet = d_graph.vertices().iter().copied().filter(|&v| v != a).collect();
    if d.is_empty() || d_graph.subgraph(&d).districts().len() != 1 {
        return bad("the vertices other than the treatment must form one district");
    }
    if green_child == blue_child || !d_graph.has_edge(a, green_child) || !d_graph.has_edge(a, blue_child) {
        return bad("the treatment needs edges into two distinct district vertices");
    }
    let build = |ignore_a: bool| {
        let n = d_graph.universe();
        let domains = (0..n).map(|_| binary()).collect();
        let own = (0..n).map(|v| if v == a { fair() } else { vec![T::one()] }).collect();
        let bi = d_graph.bidirected_edges().iter().map(|_| fair()).collect();
        DiscreteScm::<T>::from_fn(d_graph.clone(), domains, own, bi, |v, pa, noise| {
            if v == a {
                return noise[0];
            }
            let reads_a = !ignore_a && (v == green_child || v == blue_child);
            let mut x = 0;
            for (&p, &val) in d_graph.pa(v).iter().zip(pa) {
                if p != a || reads_a {
                    x ^= val;
                }
            }
            noise[1..].iter().fold(x, |acc, b| acc ^ b)
        })
    };
    Ok((build(false)?, build(true)?))
}

/// The district counterfactual of the parity construction: one copy of each
/// district vertex, with `green_child` reading `a` at its active value and
/// `blue_child` at its baseline value. Roots are the district's sinks.
pub fn split_treatment_term(
    d_graph: &Admg,
    a: Vertex,
    green_child: Vertex,
) -> NestedCounterfactual {
    let d: VSet = d_graph.vertices().iter().copied().filter(|&v| v != a).collect();
    let mut arena = ArenaBuilder::default();
    let mut at: BTreeMap<Vertex, usize> = BTreeMap::new();
    for v in d_graph.topological_order() {
        if v == a {
            continue;
        }
        let args = d_graph
            .pa(v)
            .iter()
            .map(|&p| {
                let arg = if p == a {
                    if v == green_child {
                        CfArg::Active
                    } else {
                        CfArg::Baseline
                    }
                } else {
                    CfArg::Sub(at[&p])
                };
                (p, arg)
            })
            .collect();
        at.insert(v, arena.intern(CfNode { target: v, args }));
    }
    let sinks = d_graph.district_sinks(&d).unwrap_or_default();
    let roots = sinks.iter().map(|&v| (v, at[&v])).collect();
    arena.finish(roots, TreatmentValues::binary(&VSet::from([a])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bit {
    /// Bit `k` of the vertex's own noise.
    Own(usize),
    /// A bidirected-edge source, by edge index.
    Bi(usize),
}

#[derive(Debug, Clone)]
enum SlotDef {
    Payload { bits: Vec<Bit>, reads_a: bool },
    Copy { parent: Vertex, slot: usize },
}

#[derive(Debug, Clone)]
struct Slot {
    def: SlotDef,
    /// Own-noise bit flipping this slot with probability ε.
    flip: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct Plan {
    slots: Vec<Slot>,
    /// Inputs XOR-ed into the outcome bit: (vertex, slot); the vertex may be
    /// the outcome itself.
    sink: Vec<(Vertex, usize)>,
    sink_flip: Option<usize>,
    /// Own-noise bits: `true` for ε bits, `false` for fair bits.
    own_bits: Vec<bool>,
}

impl Plan {
    fn fresh_bit(&mut self, eps: bool) -> usize {
        self.own_bits.push(eps);
        self.own_bits.len() - 1
    }

    fn width(&self) -> usize {
        self.slots.len() + usize::from(!self.sink.is_empty())
    }
}

fn bidirected_path(g: &Admg, d: &VSet, from: Vertex, to: Vertex) -> Option<Vec<Vertex>> {
    let mut prev: HashMap<Vertex, Vertex> = HashMap::from([(from, from)]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in g.sib(v) {
            if d.contains(&w) && !prev.contains_key(&w) {
                prev.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    None
}

fn directed_to_outcome(g: &Admg, reach: &VSet, y: &VSet, from: Vertex) -> Option<Vec<Vertex>> {
    let mut prev: HashMap<Vertex, Vertex> = HashMap::from([(from, from)]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if y.contains(&v) {
            let mut path = vec![v];
            let mut cur = v;
            while cur != from {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &c in g.ch(v) {
            if reach.contains(&c) && !prev.contains_key(&c) {
                prev.insert(c, v);
                queue.push_back(c);
            }
        }
    }
    None
}

/// Two models on all of `g` that agree on every interventional
/// distribution, have strictly positive observed joints, and disagree on
/// the effect of `bundle` along the recanting district in `report`.
///
/// Construction: the district contributes a chain of fair parity bits
/// between the starts of the two witness paths, so their payloads XOR to a
/// constant in any single intervention but to 1 (first model) or 0 (second)
/// when one start reads the treatment at its active value and the other at
/// baseline. Each witness path (and a path from every interior chain
/// vertex) carries its payload in a dedicated bit down to an outcome, where
/// the arriving bits are XOR-ed. Every copied bit and outcome bit is flipped
/// by an independent ε-noise, which makes the observed joint positive and
/// leaves a total variation of (1 − 2ε)^N between the effect distributions,
/// N the number of flips on the routes. Everything else is an independent
/// fair coin.
pub fn counterexample_models<T: Scalar>(
    g: &Admg,
    bundle: &PathBundle,
    report: &RecantingReport,
    values: &TreatmentValues,
    epsilon: &T,
) -> Result<(DiscreteScm<T>, DiscreteScm<T>), ScmError> {
    let fail = |m: String| Err(ScmError::Construction(m));
    if !(*epsilon > T::zero() && *epsilon < T::from_ratio(1, 2)) {
        return fail("epsilon must lie strictly between 0 and 1/2".into());
    }
    let a = report.treatment;
    let y = &bundle.outcomes;
    let reach = relevant_nodes(g, &bundle.treatments, y);
    let (p1, p2) = (report.path_in_pi.vertices(), report.path_not_in_pi.vertices());
    if p1.len() < 2 || p2.len() < 2 || p1[0] != a || p2[0] != a {
        return fail("witness paths must start at the report's treatment".into());
    }
    let (z1, z2) = (p1[1], p2[1]);
    let d = &report.district;
    if !d.contains(&z1) || !d.contains(&z2) {
        return fail("witness paths must enter the recanting district".into());
    }
    let Some(chain) = bidirected_path(g, d, z1, z2) else {
        return fail("witness starts are not joined by bidirected edges".into());
    };
    for &t in &bundle.treatments {
        if values.active(t) == values.baseline(t) {
            return fail(format!("active and baseline values of `{}` coincide", g.name(t)));
        }
    }

    let n = g.universe();
    let mut plan: Vec<Plan> = vec![Plan::default(); n];
    let edge_index: HashMap<(Vertex, Vertex), usize> =
        g.bidirected_edges().iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let bi = |x: Vertex, w: Vertex| edge_index[&(x.min(w), x.max(w))];
    let mut fair_bi = vec![false; g.bidirected_edges().len()];

    // payload slots: (vertex, slot, route tail after the vertex)
    let mut sources: Vec<(Vertex, usize, Vec<Vertex>)> = Vec::new();
    if chain.len() == 1 {
        let z = z1;
        let u = plan[z].fresh_bit(false);
        plan[z].slots.push(Slot { def: SlotDef::Payload { bits: vec![Bit::Own(u)], reads_a: true }, flip: None });
        sources.push((z, 0, p1[2..].to_vec()));
        sources.push((z, 0, p2[2..].to_vec()));
    } else {
        let k = chain.len() - 1;
        for (i, &w) in chain.iter().enumerate() {
            let mut bits = Vec::new();
            if i > 0 {
                bits.push(Bit::Bi(bi(chain[i - 1], w)));
            }
            if i < k {
                bits.push(Bit::Bi(bi(w, chain[i + 1])));
            }
            for b in &bits {
                if let Bit::Bi(e) = b {
                    fair_bi[*e] = true;
                }
            }
            let reads_a = i == 0 || i == k;
            // the chain payloads satisfy one parity constraint; one flip
            // lifts it so the observed joint stays positive
            let flip = if i == 0 { Some(plan[w].fresh_bit(true)) } else { None };
            let s = plan[w].slots.len();
            plan[w].slots.push(Slot { def: SlotDef::Payload { bits, reads_a }, flip });
            let tail = if i == 0 {
                p1[2..].to_vec()
            } else if i == k {
                p2[2..].to_vec()
            } else {
                match directed_to_outcome(g, &reach, y, w) {
                    Some(p) => p[1..].to_vec(),
                    None => return fail(format!("`{}` has no directed path to an outcome", g.name(w))),
                }
            };
            sources.push((w, s, tail));
        }
    }

    for (v0, s0, tail) in sources {
        let mut prev = (v0, s0);
        for (j, &x) in tail.iter().enumerate() {
            if !g.has_edge(prev.0, x) {
                return fail("route is not a directed path".into());
            }
            if j + 1 == tail.len() {
                break;
            }
            let flip = Some(plan[x].fresh_bit(true));
            plan[x].slots.push(Slot { def: SlotDef::Copy { parent: prev.0, slot: prev.1 }, flip });
            prev = (x, plan[x].slots.len() - 1);
        }
        let t = tail.last().copied().unwrap_or(v0);
        if !y.contains(&t) {
            return fail(format!("route ends at `{}`, not an outcome", g.name(t)));
        }
        plan[t].sink.push(prev);
    }
    for p in plan.iter_mut() {
        if !p.sink.is_empty() {
            p.sink_flip = Some(p.fresh_bit(true));
        }
    }

    let treatments = &bundle.treatments;
    let domains: Vec<Vec<String>> = (0..n)
        .map(|v| {
            if !g.contains(v) {
                return vec![];
            }
            if treatments.contains(&v) {
                return vec![values.baseline(v).to_string(), values.active(v).to_string()];
            }
            let w = plan[v].width();
            if w == 0 {
                return binary();
            }
            (0..1usize << w).map(|x| format!("{x:0w$b}")).collect()
        })
        .collect();
    let one_minus = T::one() - epsilon.clone();
    let own: Vec<Vec<T>> = (0..n)
        .map(|v| {
            let bits = &plan[v].own_bits;
            if treatments.contains(&v) || plan[v].width() == 0 {
                return fair();
            }
            (0..1usize << bits.len())
                .map(|x| {
                    bits.iter().enumerate().fold(T::one(), |acc, (i, &eps)| {
                        let bit = (x >> (bits.len() - 1 - i)) & 1;
                        let p = match (eps, bit) {
                            (false, _) => T::from_ratio(1, 2),
                            (true, 1) => epsilon.clone(),
                            (true, _) => one_minus.clone(),
                        };
                        acc * p
                    })
                })
                .collect()
        })
        .collect();
    let bi_noise: Vec<Vec<T>> = fair_bi.iter().map(|&f| if f { fair() } else { vec![T::one()] }).collect();
    let widths: Vec<usize> = plan.iter().map(|p| p.width()).collect();
    // position of each bidirected edge among a vertex's attached noises
    let mut bi_pos: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n];
    for (k, &(x, w)) in g.bidirected_edges().iter().enumerate() {
        for v in [x, w] {
            let next = bi_pos[v].len() + 1;
            bi_pos[v].insert(k, next);
        }
    }
    let active_index = 1;

    let build = |first: bool| {
        DiscreteScm::<T>::from_fn(g.clone(), domains.clone(), own.clone(), bi_noise.clone(), |v, pa, noise| {
            let p = &plan[v];
            if treatments.contains(&v) || p.width() == 0 {
                return noise[0];
            }
            let nown = p.own_bits.len();
            let own_bit = |i: usize| (noise[0] >> (nown - 1 - i)) & 1;
            let parent_val: BTreeMap<Vertex, usize> = g.pa(v).iter().copied().zip(pa.iter().copied()).collect();
            let bit_of = |u: Vertex, x: usize, s: usize| (x >> (widths[u] - 1 - s)) & 1;
            let mut out = Vec::with_capacity(p.width());
            for slot in &p.slots {
                let mut b = match &slot.def {
                    SlotDef::Payload { bits, reads_a } => {
                        let mut b = bits.iter().fold(0, |acc, bit| {
                            acc ^ match *bit {
                                Bit::Own(i) => own_bit(i),
                                Bit::Bi(e) => noise[bi_pos[v][&e]],
                            }
                        });
                        if first && *reads_a {
                            b ^= usize::from(parent_val[&a] == active_index);
                        }
                        b
                    }
                    SlotDef::Copy { parent, slot } => bit_of(*parent, parent_val[parent], *slot),
                };
                if let Some(f) = slot.flip {
                    b ^= own_bit(f);
                }
                out.push(b);
            }
            if !p.sink.is_empty() {
                let mut b = 0;
                for &(u, s) in &p.sink {
                    b ^= if u == v { out[s] } else { bit_of(u, parent_val[&u], s) };
                }
                if let Some(f) = p.sink_flip {
                    b ^= own_bit(f);
                }
                out.push(b);
            }
            out.iter().fold(0, |acc, b| (acc << 1) | b)
        })
    };
    Ok((build(true)?, build(false)?))
}
