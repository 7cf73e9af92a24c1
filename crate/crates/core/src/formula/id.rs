//! Identification of interventional terms from the observed joint.
//!
//! The recursive district-factorisation algorithm (lines 1–7 of the usual
//! formulation). The working distribution `P` is kept symbolic: the
//! observed marginal, an ordered chain of single-vertex factors, or a
//! general expression. Inside the recursion every vertex is written with the
//! placeholder symbol `Index(0)`; binders shadow, and a final pass renames
//! binders apart and ties free placeholders to the caller's bindings.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::admg::{Admg, VSet, Vertex};

use super::expr::{FormulaExpr, ValueKind, ValueSymbol, ANY_VALUE};

/// Witness of non-identifiability: `f` is the current graph (a single
/// district), `f_prime` the district of `G \ X` it fails to split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hedge {
    pub f: VSet,
    pub f_prime: VSet,
}

impl Hedge {
    pub fn render(&self, g: &Admg) -> String {
        format!("hedge F = {}, F' = {}", g.fmt_set(&self.f), g.fmt_set(&self.f_prime))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("not identifiable: hedge")]
    Hedge(Hedge),
    #[error("malformed term: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone)]
enum Dist {
    /// Marginal of the observed joint over these vertices.
    Obs,
    /// Product of factors, each the conditional of its vertex given the
    /// earlier ones (and context).
    Chain(Vec<(Vertex, FormulaExpr)>),
    /// Arbitrary expression; a distribution over the current vertex set.
    Expr(FormulaExpr),
}

fn vars(s: impl IntoIterator<Item = Vertex>) -> Vec<ValueSymbol> {
    s.into_iter().map(ValueSymbol::var).collect()
}

struct Id<'a> {
    order: &'a [Vertex],
}

impl Id<'_> {
    fn ordered(&self, s: &VSet) -> Vec<Vertex> {
        self.order.iter().copied().filter(|v| s.contains(v)).collect()
    }

    fn preds(&self, v: Vertex, within: &VSet) -> Vec<Vertex> {
        self.order.iter().copied().take_while(|&u| u != v).filter(|u| within.contains(u)).collect()
    }

    /// Σ_{V \ keep} P as an expression.
    fn marginal_expr(&self, p: &Dist, all: &VSet, keep: &VSet) -> FormulaExpr {
        match p {
            Dist::Obs => FormulaExpr::obs(vars(self.ordered(keep)), vec![]),
            Dist::Chain(fs) => {
                let mut fs = fs.clone();
                while fs.last().is_some_and(|(v, _)| !keep.contains(v)) {
                    fs.pop();
                }
                let drop: Vec<Vertex> = fs.iter().map(|(v, _)| *v).filter(|v| !keep.contains(v)).collect();
                FormulaExpr::sum(vars(drop), FormulaExpr::product(fs.into_iter().map(|(_, f)| f).collect()))
            }
            Dist::Expr(e) => {
                let drop: Vec<Vertex> = self.ordered(all).into_iter().filter(|v| !keep.contains(v)).collect();
                FormulaExpr::sum(vars(drop), e.clone())
            }
        }
    }

    fn marginal(&self, p: &Dist, all: &VSet, keep: &VSet) -> Dist {
        match p {
            Dist::Obs => Dist::Obs,
            Dist::Chain(fs) => {
                let mut fs = fs.clone();
                while fs.last().is_some_and(|(v, _)| !keep.contains(v)) {
                    fs.pop();
                }
                if fs.iter().all(|(v, _)| keep.contains(v)) {
                    Dist::Chain(fs)
                } else {
                    Dist::Expr(self.marginal_expr(&Dist::Chain(fs), all, keep))
                }
            }
            Dist::Expr(_) => Dist::Expr(self.marginal_expr(p, all, keep)),
        }
    }

    /// P(v | predecessors of v in the current vertex set).
    fn conditional(&self, p: &Dist, all: &VSet, v: Vertex) -> FormulaExpr {
        let pred = self.preds(v, all);
        match p {
            Dist::Obs => FormulaExpr::obs(vec![ValueSymbol::var(v)], vars(pred)),
            Dist::Chain(fs) => {
                debug_assert_eq!(fs.iter().map(|(u, _)| *u).collect::<VSet>(), *all);
                fs.iter().find(|(u, _)| *u == v).map(|(_, f)| f.clone()).expect("chain covers vertex")
            }
            Dist::Expr(e) => {
                let mut upto: VSet = pred.iter().copied().collect();
                upto.insert(v);
                let num_drop: Vec<Vertex> = self.ordered(all).into_iter().filter(|u| !upto.contains(u)).collect();
                let num = FormulaExpr::sum(vars(num_drop), e.clone());
                if pred.is_empty() {
                    return num;
                }
                let den_drop: Vec<Vertex> =
                    self.ordered(all).into_iter().filter(|u| !pred.contains(u)).collect();
                FormulaExpr::ratio(num, FormulaExpr::sum(vars(den_drop), e.clone()))
            }
        }
    }

    fn run(&self, y: &VSet, x: &VSet, p: &Dist, g: &Admg) -> Result<FormulaExpr, Hedge> {
        let v_all = g.vertices().clone();
        // 1
        if x.is_empty() {
            return Ok(self.marginal_expr(p, &v_all, y));
        }
        // 2
        let an = g.ancestors(y);
        if an != v_all {
            let x2: VSet = x.intersection(&an).copied().collect();
            let p2 = self.marginal(p, &v_all, &an);
            return self.run(y, &x2, &p2, &g.subgraph(&an));
        }
        // 3
        let mut an_cut = y.clone();
        let mut stack: Vec<Vertex> = y.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if x.contains(&v) {
                continue;
            }
            for &u in g.pa(v) {
                if an_cut.insert(u) {
                    stack.push(u);
                }
            }
        }
        let w: VSet = v_all.iter().copied().filter(|v| !x.contains(v) && !an_cut.contains(v)).collect();
        if !w.is_empty() {
            let x2: VSet = x.union(&w).copied().collect();
            return self.run(y, &x2, p, g);
        }
        // 4
        let rest: VSet = v_all.difference(x).copied().collect();
        let cs = g.subgraph(&rest).districts();
        if cs.len() > 1 {
            let mut factors = Vec::new();
            for s in &cs {
                let xs: VSet = v_all.difference(s).copied().collect();
                factors.push(self.run(s, &xs, p, g)?);
            }
            let bound: Vec<Vertex> = self.ordered(&rest).into_iter().filter(|v| !y.contains(v)).collect();
            return Ok(FormulaExpr::sum(vars(bound), FormulaExpr::product(factors)));
        }
        let s = cs.into_iter().next().expect("y nonempty");
        let ds = g.districts();
        // 5
        if ds.len() == 1 {
            return Err(Hedge { f: v_all, f_prime: s });
        }
        // 6
        if ds.contains(&s) {
            let factors: Vec<FormulaExpr> =
                self.ordered(&s).into_iter().map(|v| self.conditional(p, &v_all, v)).collect();
            let bound: Vec<Vertex> = self.ordered(&s).into_iter().filter(|v| !y.contains(v)).collect();
            return Ok(FormulaExpr::sum(vars(bound), FormulaExpr::product(factors)));
        }
        // 7
        let s2 = ds.into_iter().find(|d| s.is_subset(d)).expect("district containing s");
        let chain: Vec<(Vertex, FormulaExpr)> =
            self.ordered(&s2).into_iter().map(|v| (v, self.conditional(p, &v_all, v))).collect();
        let x2: VSet = x.intersection(&s2).copied().collect();
        self.run(y, &x2, &Dist::Chain(chain), &g.subgraph(&s2))
    }
}

/// Ties free placeholders to `env` (anything unbound becomes the arbitrary
/// literal `*`) and renames every binder to a fresh index that avoids
/// `env`'s symbols.
fn resolve(e: &FormulaExpr, env: &BTreeMap<Vertex, ValueSymbol>) -> FormulaExpr {
    let mut used: BTreeSet<ValueSymbol> = env.values().cloned().collect();
    let mut scope: Vec<(Vertex, ValueSymbol)> = Vec::new();
    fn fresh(v: Vertex, used: &mut BTreeSet<ValueSymbol>) -> ValueSymbol {
        let mut k = 0;
        while used.contains(&ValueSymbol::idx(v, k)) {
            k += 1;
        }
        let s = ValueSymbol::idx(v, k);
        used.insert(s.clone());
        s
    }
    fn lookup(
        s: &ValueSymbol,
        scope: &[(Vertex, ValueSymbol)],
        env: &BTreeMap<Vertex, ValueSymbol>,
    ) -> ValueSymbol {
        if s.kind != ValueKind::Index(0) {
            return s.clone();
        }
        if let Some((_, b)) = scope.iter().rev().find(|(v, _)| *v == s.vertex) {
            return b.clone();
        }
        env.get(&s.vertex).cloned().unwrap_or_else(|| ValueSymbol::lit(s.vertex, ANY_VALUE))
    }
    fn go(
        e: &FormulaExpr,
        env: &BTreeMap<Vertex, ValueSymbol>,
        scope: &mut Vec<(Vertex, ValueSymbol)>,
        used: &mut BTreeSet<ValueSymbol>,
    ) -> FormulaExpr {
        use FormulaExpr::*;
        let m = |ss: &[ValueSymbol], scope: &[(Vertex, ValueSymbol)]| -> Vec<ValueSymbol> {
            ss.iter().map(|s| lookup(s, scope, env)).collect()
        };
        match e {
            Sum { vars, body } => {
                let n = scope.len();
                let new: Vec<ValueSymbol> = vars.iter().map(|s| fresh(s.vertex, used)).collect();
                scope.extend(vars.iter().map(|s| s.vertex).zip(new.iter().cloned()));
                let body = go(body, env, scope, used);
                scope.truncate(n);
                Sum { vars: new, body: Box::new(body) }
            }
            Expectation { var, body } => {
                let nv = fresh(var.vertex, used);
                scope.push((var.vertex, nv.clone()));
                let body = go(body, env, scope, used);
                scope.pop();
                Expectation { var: nv, body: Box::new(body) }
            }
            Product(fs) => Product(fs.iter().map(|f| go(f, env, scope, used)).collect()),
            Add(fs) => Add(fs.iter().map(|f| go(f, env, scope, used)).collect()),
            ObsTerm { targets, given } => ObsTerm { targets: m(targets, scope), given: m(given, scope) },
            DoTerm { targets, regime } => DoTerm { targets: m(targets, scope), regime: m(regime, scope) },
            Difference(a, b) => Difference(Box::new(go(a, env, scope, used)), Box::new(go(b, env, scope, used))),
            Ratio(a, b) => Ratio(Box::new(go(a, env, scope, used)), Box::new(go(b, env, scope, used))),
            Scalar(c) => Scalar(c.clone()),
        }
    }
    go(e, env, &mut scope, &mut used)
}

/// Identifies `p(targets | do(regime))` in `g` from the observed joint over
/// `g`'s vertices. The result uses the term's own value symbols for its
/// targets and regime.
pub fn identify_interventional(g: &Admg, term: &FormulaExpr) -> Result<FormulaExpr, IdError> {
    let FormulaExpr::DoTerm { targets, regime } = term else {
        return Err(IdError::Malformed("expected p(. | do(.))".into()));
    };
    let y: VSet = targets.iter().map(|s| s.vertex).collect();
    let x: VSet = regime.iter().map(|s| s.vertex).collect();
    if y.is_empty() || y.len() != targets.len() || x.len() != regime.len() {
        return Err(IdError::Malformed("repeated or empty vertex in term".into()));
    }
    if !y.is_disjoint(&x) {
        return Err(IdError::Malformed("target and regime overlap".into()));
    }
    if g.check_set(&y).is_err() || g.check_set(&x).is_err() {
        return Err(IdError::Malformed("vertex outside the graph".into()));
    }
    let order = g.topological_order();
    let raw = Id { order: &order }.run(&y, &x, &Dist::Obs, g).map_err(IdError::Hedge)?;
    let env: BTreeMap<Vertex, ValueSymbol> =
        targets.iter().chain(regime.iter()).map(|s| (s.vertex, s.clone())).collect();
    Ok(resolve(&raw, &env))
}
