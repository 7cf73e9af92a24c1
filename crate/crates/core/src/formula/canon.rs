//! Canonical forms.
//!
//! An expression is expanded into a linear combination of monomials
//! `c · Σ_{vars} f1 f2 ...`, simplified with a few probability identities,
//! and rebuilt with bound indices renamed by first appearance. Two
//! expressions are considered equal when their canonical forms are
//! structurally equal.
//!
//! Identities used:
//! - chain rule split: `p(t1,t2 | C) = p(t1 | C) p(t2 | t1, C)`;
//! - normalisation: `Σ_x p(x | C) = 1` when `x` occurs nowhere else, and
//!   `Σ_x p(x, T | do(R)) = p(T | do(R))`;
//! - marginalisation: `Σ_x p(v | x, C) p(x | C) = p(v | C)`;
//! - with a graph: conditioning on `w` is dropped from `p(v | C)` when `v`
//!   and `w` are m-separated given the rest of `C`, and the marginalisation
//!   rule also fires when the two conditioning sets differ by variables that
//!   are m-separated from the summed one (or from `v`).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::admg::{m_separated, Admg, VSet, Vertex};

use super::expr::{FormulaExpr, ValueKind, ValueSymbol};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Factor {
    Score(ValueSymbol),
    Do { targets: Vec<ValueSymbol>, regime: Vec<ValueSymbol> },
    Obs { targets: Vec<ValueSymbol>, given: Vec<ValueSymbol> },
    Opaque(FormulaExpr),
}

impl Factor {
    fn symbols(&self) -> Vec<ValueSymbol> {
        match self {
            Factor::Score(s) => vec![s.clone()],
            Factor::Do { targets, regime: given } | Factor::Obs { targets, given } => {
                targets.iter().chain(given.iter()).cloned().collect()
            }
            Factor::Opaque(e) => {
                let mut v = Vec::new();
                e.visit_symbols(&mut |s| v.push(s.clone()));
                v
            }
        }
    }

    fn mentions(&self, s: &ValueSymbol) -> bool {
        match self {
            Factor::Opaque(e) => e.free_symbols().contains(s),
            f => f.symbols().contains(s),
        }
    }

    fn rename(&self, f: &impl Fn(&ValueSymbol) -> ValueSymbol) -> Factor {
        let m = |v: &[ValueSymbol]| v.iter().map(f).collect::<Vec<_>>();
        match self {
            Factor::Score(s) => Factor::Score(f(s)),
            Factor::Do { targets, regime } => Factor::Do { targets: m(targets), regime: m(regime) },
            Factor::Obs { targets, given } => Factor::Obs { targets: m(targets), given: m(given) },
            Factor::Opaque(e) => {
                // keep inner binders clear of every name the outer rename can produce
                let mut c = Ctx { g: None, order: vec![], fresh: 2 * FRESH_BASE };
                Factor::Opaque(c.freshen(e).substitute_free(&|s| Some(f(s))))
            }
        }
    }

    fn normalise(self) -> Factor {
        match self {
            Factor::Do { mut targets, mut regime } => {
                targets.sort();
                regime.sort();
                Factor::Do { targets, regime }
            }
            Factor::Obs { mut targets, mut given } => {
                targets.sort();
                given.sort();
                Factor::Obs { targets, given }
            }
            f => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Mono {
    coef: BigRational,
    sums: Vec<ValueSymbol>,
    factors: Vec<Factor>,
}

impl Mono {
    fn unit() -> Self {
        Mono { coef: BigRational::one(), sums: vec![], factors: vec![] }
    }

    fn mul(&self, o: &Mono) -> Mono {
        let mut sums = self.sums.clone();
        sums.extend(o.sums.iter().cloned());
        let mut factors = self.factors.clone();
        factors.extend(o.factors.iter().cloned());
        Mono { coef: &self.coef * &o.coef, sums, factors }
    }
}

struct Ctx<'a> {
    g: Option<&'a Admg>,
    order: Vec<Vertex>,
    fresh: u32,
}

const FRESH_BASE: u32 = 1 << 20;

impl Ctx<'_> {
    fn fresh_symbol(&mut self, v: Vertex) -> ValueSymbol {
        self.fresh += 1;
        ValueSymbol::idx(v, FRESH_BASE + self.fresh)
    }

    /// Alpha-renames every binder to a unique symbol.
    fn freshen(&mut self, e: &FormulaExpr) -> FormulaExpr {
        use FormulaExpr::*;
        match e {
            Sum { vars, body } => {
                let renamed: Vec<(ValueSymbol, ValueSymbol)> =
                    vars.iter().map(|s| (s.clone(), self.fresh_symbol(s.vertex))).collect();
                let body = self.freshen(body);
                let body = body.substitute_free(&|s| renamed.iter().find(|(o, _)| o == s).map(|(_, n)| n.clone()));
                Sum { vars: renamed.into_iter().map(|(_, n)| n).collect(), body: Box::new(body) }
            }
            Expectation { var, body } => {
                let n = self.fresh_symbol(var.vertex);
                let body = self.freshen(body);
                let body = body.substitute_free(&|s| (s == var).then(|| n.clone()));
                Expectation { var: n, body: Box::new(body) }
            }
            Product(fs) => Product(fs.iter().map(|f| self.freshen(f)).collect()),
            Add(fs) => Add(fs.iter().map(|f| self.freshen(f)).collect()),
            Difference(a, b) => Difference(Box::new(self.freshen(a)), Box::new(self.freshen(b))),
            Ratio(a, b) => Ratio(Box::new(self.freshen(a)), Box::new(self.freshen(b))),
            e => e.clone(),
        }
    }

    fn expand(&mut self, e: &FormulaExpr) -> Vec<Mono> {
        use FormulaExpr::*;
        match e {
            Scalar(c) => vec![Mono { coef: c.clone(), ..Mono::unit() }],
            ObsTerm { targets, given } => {
                vec![Mono { factors: vec![Factor::Obs { targets: targets.clone(), given: given.clone() }], ..Mono::unit() }]
            }
            // p(x | do()) is the observed marginal
            DoTerm { targets, regime } if regime.is_empty() => {
                vec![Mono { factors: vec![Factor::Obs { targets: targets.clone(), given: vec![] }], ..Mono::unit() }]
            }
            DoTerm { targets, regime } => {
                vec![Mono { factors: vec![Factor::Do { targets: targets.clone(), regime: regime.clone() }], ..Mono::unit() }]
            }
            Product(fs) => {
                let mut acc = vec![Mono::unit()];
                for f in fs {
                    let ms = self.expand(f);
                    acc = acc.iter().flat_map(|a| ms.iter().map(move |m| a.mul(m))).collect();
                }
                acc
            }
            Sum { vars, body } => self
                .expand(body)
                .into_iter()
                .map(|mut m| {
                    m.sums.extend(vars.iter().cloned());
                    m
                })
                .collect(),
            Expectation { var, body } => self
                .expand(body)
                .into_iter()
                .map(|mut m| {
                    m.sums.push(var.clone());
                    m.factors.push(Factor::Score(var.clone()));
                    m
                })
                .collect(),
            Add(fs) => fs.iter().flat_map(|f| self.expand(f)).collect(),
            Difference(a, b) => {
                let mut out = self.expand(a);
                out.extend(self.expand(b).into_iter().map(|mut m| {
                    m.coef = -m.coef;
                    m
                }));
                out
            }
            Ratio(a, b) => {
                let num = canon_with(self.g, a);
                let den = canon_with(self.g, b);
                if num.is_zero() {
                    return vec![];
                }
                vec![Mono { factors: vec![Factor::Opaque(FormulaExpr::ratio(num, den))], ..Mono::unit() }]
            }
        }
    }

    fn rank(&self, v: Vertex) -> usize {
        self.order.iter().position(|&u| u == v).unwrap_or(usize::MAX)
    }

    /// Chain-rule split of joint observed terms, earliest vertex first.
    fn split(&self, m: &mut Mono) {
        let mut out = Vec::new();
        for f in m.factors.drain(..) {
            match f {
                Factor::Obs { mut targets, given } if targets.len() > 1 => {
                    targets.sort_by_key(|s| self.rank(s.vertex));
                    let mut cond = given;
                    for t in targets {
                        out.push(Factor::Obs { targets: vec![t.clone()], given: cond.clone() });
                        cond.push(t);
                    }
                }
                f => out.push(f),
            }
        }
        m.factors = out;
    }

    fn separated(&self, a: Vertex, b: &VSet, given: &VSet) -> bool {
        match self.g {
            Some(g) => !b.contains(&a) && m_separated(g, &VSet::from([a]), b, given),
            None => false,
        }
    }

    /// Drops conditioning variables independent of the target.
    fn reduce(&self, m: &mut Mono) -> bool {
        if self.g.is_none() {
            return false;
        }
        let mut changed = false;
        for f in m.factors.iter_mut() {
            if let Factor::Obs { targets, given } = f {
                if targets.len() != 1 {
                    continue;
                }
                let v = targets[0].vertex;
                let mut i = 0;
                let mut cur = given.clone();
                cur.sort();
                while i < cur.len() {
                    let w = cur[i].vertex;
                    let rest: VSet = cur.iter().filter(|s| s.vertex != w).map(|s| s.vertex).collect();
                    if w != v && self.separated(v, &VSet::from([w]), &rest) {
                        cur.remove(i);
                        changed = true;
                    } else {
                        i += 1;
                    }
                }
                *given = cur;
            }
        }
        changed
    }

    fn drop_normalised(&self, m: &mut Mono) -> bool {
        let mut changed = false;
        let mut k = 0;
        while k < m.sums.len() {
            let x = m.sums[k].clone();
            let users: Vec<usize> = (0..m.factors.len()).filter(|&i| m.factors[i].mentions(&x)).collect();
            let mut hit = false;
            if users.len() == 1 {
                let i = users[0];
                match &mut m.factors[i] {
                    Factor::Obs { targets, given } if targets.len() == 1 && targets[0] == x && !given.contains(&x) => {
                        m.factors.remove(i);
                        hit = true;
                    }
                    Factor::Do { targets, regime } if targets.contains(&x) && !regime.contains(&x) => {
                        targets.retain(|t| t != &x);
                        if targets.is_empty() {
                            m.factors.remove(i);
                        }
                        hit = true;
                    }
                    _ => {}
                }
            }
            if hit {
                m.sums.remove(k);
                changed = true;
            } else {
                k += 1;
            }
        }
        changed
    }

    fn marginalise(&self, m: &mut Mono) -> bool {
        for k in 0..m.sums.len() {
            let x = m.sums[k].clone();
            let users: Vec<usize> = (0..m.factors.len()).filter(|&i| m.factors[i].mentions(&x)).collect();
            if users.len() != 2 {
                continue;
            }
            for (i, j) in [(users[0], users[1]), (users[1], users[0])] {
                let (Factor::Obs { targets: t1, given: g1 }, Factor::Obs { targets: t2, given: g2 }) =
                    (&m.factors[i], &m.factors[j])
                else {
                    continue;
                };
                if t1.len() != 1 || t2.len() != 1 || t2[0] != x || !g1.contains(&x) || t1[0] == x {
                    continue;
                }
                let v = &t1[0];
                let c1: BTreeSet<ValueSymbol> = g1.iter().filter(|s| **s != x).cloned().collect();
                let c2: BTreeSet<ValueSymbol> = g2.iter().cloned().collect();
                if c2.iter().any(|s| s.vertex == v.vertex) || c1.iter().any(|s| s.vertex == x.vertex) {
                    continue;
                }
                let verts = |s: &BTreeSet<ValueSymbol>| s.iter().map(|x| x.vertex).collect::<VSet>();
                let result = if c1 == c2 {
                    Some(c1)
                } else if c2.is_subset(&c1) {
                    let extra: BTreeSet<_> = c1.difference(&c2).cloned().collect();
                    self.separated(x.vertex, &verts(&extra), &verts(&c2)).then_some(c1)
                } else if c1.is_subset(&c2) {
                    let extra: BTreeSet<_> = c2.difference(&c1).cloned().collect();
                    let mut cond = verts(&c1);
                    cond.insert(x.vertex);
                    self.separated(v.vertex, &verts(&extra), &cond).then_some(c2)
                } else {
                    None
                };
                if let Some(c) = result {
                    let nf = Factor::Obs { targets: vec![v.clone()], given: c.into_iter().collect() };
                    let (lo, hi) = (i.min(j), i.max(j));
                    m.factors.remove(hi);
                    m.factors.remove(lo);
                    m.factors.push(nf);
                    m.sums.remove(k);
                    return true;
                }
            }
        }
        false
    }

    fn simplify(&self, m: &mut Mono) {
        self.split(m);
        loop {
            let mut changed = self.reduce(m);
            changed |= self.drop_normalised(m);
            changed |= self.marginalise(m);
            if !changed {
                break;
            }
        }
        m.factors = m.factors.drain(..).map(Factor::normalise).collect();
    }

    fn shape(&self, f: &Factor, bound: &BTreeSet<ValueSymbol>, names: &BTreeMap<ValueSymbol, u32>) -> (u8, Reverse<usize>, Vec<(Vertex, u8, u32, String)>) {
        let key = |s: &ValueSymbol| -> (Vertex, u8, u32, String) {
            if bound.contains(s) {
                (s.vertex, 0, names.get(s).copied().unwrap_or(u32::MAX), String::new())
            } else {
                match &s.kind {
                    ValueKind::Active => (s.vertex, 1, 0, String::new()),
                    ValueKind::Baseline => (s.vertex, 2, 0, String::new()),
                    ValueKind::Index(k) => (s.vertex, 3, *k, String::new()),
                    ValueKind::Literal(l) => (s.vertex, 4, 0, l.clone()),
                }
            }
        };
        let (rank, lead) = match f {
            Factor::Score(s) => (0, s.vertex),
            Factor::Do { targets, .. } => (1, targets.iter().map(|s| s.vertex).max().unwrap_or(0)),
            Factor::Obs { targets, .. } => (2, targets.iter().map(|s| s.vertex).max().unwrap_or(0)),
            Factor::Opaque(_) => (3, 0),
        };
        (rank, Reverse(lead), f.symbols().iter().map(key).collect())
    }

    /// Renames bound symbols by first appearance in shape-sorted factor
    /// order. Run twice so ties in the first pass are broken by names.
    fn rename(&self, m: &mut Mono) {
        let mut names: BTreeMap<ValueSymbol, u32> = BTreeMap::new();
        for _ in 0..2 {
            let bound: BTreeSet<ValueSymbol> = m.sums.iter().cloned().collect();
            let mut free: BTreeSet<ValueSymbol> = BTreeSet::new();
            for f in &m.factors {
                for s in f.symbols() {
                    if s.is_index() && !bound.contains(&s) {
                        free.insert(s);
                    }
                }
            }
            let mut order: Vec<usize> = (0..m.factors.len()).collect();
            order.sort_by_cached_key(|&i| (self.shape(&m.factors[i], &bound, &names), i));
            let mut map: BTreeMap<ValueSymbol, ValueSymbol> = BTreeMap::new();
            let mut used: BTreeSet<ValueSymbol> = free.clone();
            let mut assign = |s: &ValueSymbol, map: &mut BTreeMap<ValueSymbol, ValueSymbol>| {
                if !bound.contains(s) || map.contains_key(s) {
                    return;
                }
                let mut k = 0;
                while used.contains(&ValueSymbol::idx(s.vertex, k)) {
                    k += 1;
                }
                let n = ValueSymbol::idx(s.vertex, k);
                used.insert(n.clone());
                map.insert(s.clone(), n);
            };
            for &i in &order {
                for s in m.factors[i].symbols() {
                    assign(&s, &mut map);
                }
            }
            let mut rest = m.sums.clone();
            rest.sort();
            for s in &rest {
                assign(s, &mut map);
            }
            // two-step rename through fresh symbols avoids swaps colliding
            let tmp: BTreeMap<ValueSymbol, ValueSymbol> = map
                .iter()
                .enumerate()
                .map(|(i, (o, _))| (o.clone(), ValueSymbol::idx(o.vertex, 2 * FRESH_BASE + i as u32)))
                .collect();
            let back: BTreeMap<ValueSymbol, ValueSymbol> =
                map.iter().map(|(o, n)| (tmp[o].clone(), n.clone())).collect();
            for step in [&tmp, &back] {
                let f = |s: &ValueSymbol| step.get(s).cloned().unwrap_or_else(|| s.clone());
                m.factors = m.factors.iter().map(|x| x.rename(&f)).collect();
                m.sums = m.sums.iter().map(f).collect();
            }
            m.factors = m.factors.drain(..).map(|f| self.recanon_opaque(f)).collect();
            names = m.sums.iter().map(|s| (s.clone(), match s.kind { ValueKind::Index(k) => k, _ => 0 })).collect();
            let bound: BTreeSet<ValueSymbol> = m.sums.iter().cloned().collect();
            m.factors.sort_by_cached_key(|f| (self.shape(f, &bound, &names), f.clone()));
            m.sums.sort();
        }
    }

    fn recanon_opaque(&self, f: Factor) -> Factor {
        match f {
            Factor::Opaque(FormulaExpr::Ratio(a, b)) => {
                Factor::Opaque(FormulaExpr::ratio(canon_with(self.g, &a), canon_with(self.g, &b)))
            }
            f => f,
        }
    }
}

fn factor_expr(f: &Factor) -> FormulaExpr {
    match f {
        Factor::Score(s) => FormulaExpr::expectation(s.clone(), FormulaExpr::one()),
        Factor::Do { targets, regime } => FormulaExpr::do_term(targets.clone(), regime.clone()),
        Factor::Obs { targets, given } => FormulaExpr::obs(targets.clone(), given.clone()),
        Factor::Opaque(e) => e.clone(),
    }
}

fn mono_expr(m: &Mono) -> FormulaExpr {
    let mut sums = m.sums.clone();
    let mut factors: Vec<Factor> = m.factors.clone();
    let mut pre: Vec<FormulaExpr> = Vec::new();
    let mag = m.coef.abs();
    if !mag.is_one() {
        pre.push(FormulaExpr::Scalar(mag));
    }
    // Score(y) with a single p(y | C) carrying y: E[y | C]
    let mut expectations = Vec::new();
    let scores: Vec<ValueSymbol> = factors
        .iter()
        .filter_map(|f| if let Factor::Score(s) = f { Some(s.clone()) } else { None })
        .collect();
    let mut wrapped: Option<ValueSymbol> = None;
    for y in scores {
        let users: Vec<usize> = (0..factors.len()).filter(|&i| factors[i].mentions(&y)).collect();
        let obs: Vec<usize> = users.iter().copied().filter(|&i| !matches!(factors[i], Factor::Score(_))).collect();
        if obs.len() == 1 {
            if let Factor::Obs { targets, given } = &factors[obs[0]] {
                if targets.len() == 1 && targets[0] == y && sums.contains(&y) {
                    expectations.push(FormulaExpr::expectation(y.clone(), FormulaExpr::obs(targets.clone(), given.clone())));
                    let (a, b) = (users[0].max(users[1]), users[0].min(users[1]));
                    factors.remove(a);
                    factors.remove(b);
                    sums.retain(|s| s != &y);
                    continue;
                }
            }
        }
        wrapped = Some(y);
        break;
    }
    if let Some(y) = wrapped {
        // general E_y[ ... ] over the remaining monomial
        factors.retain(|f| f != &Factor::Score(y.clone()));
        sums.retain(|s| s != &y);
        let mut inner: Vec<FormulaExpr> = expectations;
        inner.extend(factors.iter().map(factor_expr));
        let body = FormulaExpr::sum(sums, FormulaExpr::product(inner));
        return FormulaExpr::product(pre.into_iter().chain([FormulaExpr::expectation(y, body)]).collect());
    }
    let mut all = pre;
    all.extend(expectations);
    all.extend(factors.iter().map(factor_expr));
    FormulaExpr::sum(sums, FormulaExpr::product(all))
}

fn canon_with(g: Option<&Admg>, e: &FormulaExpr) -> FormulaExpr {
    let order = match g {
        Some(g) => g.topological_order(),
        None => {
            let mut vs: Vec<Vertex> = e.vertices().into_iter().collect();
            vs.sort();
            vs
        }
    };
    let mut ctx = Ctx { g, order, fresh: 0 };
    let e = ctx.freshen(e);
    let mut monos = ctx.expand(&e);
    let mut merged: BTreeMap<(Vec<ValueSymbol>, Vec<Factor>), BigRational> = BTreeMap::new();
    for m in monos.iter_mut() {
        ctx.simplify(m);
        ctx.rename(m);
        let key = (m.sums.clone(), m.factors.clone());
        *merged.entry(key).or_insert_with(BigRational::zero) += &m.coef;
    }
    let mut terms: Vec<Mono> = merged
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((sums, factors), coef)| Mono { coef, sums, factors })
        .collect();
    // positive terms first, otherwise key order
    terms.sort_by_key(|m| m.coef.is_negative());
    let mut acc: Option<FormulaExpr> = None;
    for m in &terms {
        let body = mono_expr(m);
        acc = Some(match acc {
            None if m.coef.is_negative() => FormulaExpr::product(vec![FormulaExpr::Scalar(-BigRational::one()), body]),
            None => body,
            Some(a) if m.coef.is_negative() => FormulaExpr::diff(a, body),
            Some(FormulaExpr::Add(mut v)) => {
                v.push(body);
                FormulaExpr::Add(v)
            }
            Some(a) => FormulaExpr::Add(vec![a, body]),
        });
    }
    acc.unwrap_or_else(FormulaExpr::zero)
}

/// Graph-free canonical form.
pub fn canonicalize(e: &FormulaExpr) -> FormulaExpr {
    canon_with(None, e)
}

/// Canonical form that also uses m-separation in `g` to drop redundant
/// conditioning and to marginalise through differing conditioning sets.
pub fn canonicalize_in(e: &FormulaExpr, g: &Admg) -> FormulaExpr {
    canon_with(Some(g), e)
}
