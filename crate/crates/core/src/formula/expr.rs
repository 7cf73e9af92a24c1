//! The probability-expression IR.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::admg::{VSet, Vertex};

/// How a vertex's value is pinned inside a term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKind {
    /// The treatment's active value x_a.
    Active,
    /// The treatment's baseline value x*_a.
    Baseline,
    /// A variable: bound by an enclosing `Sum`/`Expectation`, or free (the
    /// expression is then a distribution over it). `Index(0)` prints as the
    /// bare vertex name, `Index(k)` as `name#k`.
    Index(u32),
    /// A fixed domain label. `*` means "any fixed value" and evaluates to
    /// the first domain value.
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueSymbol {
    pub vertex: Vertex,
    pub kind: ValueKind,
}

pub const ANY_VALUE: &str = "*";

impl ValueSymbol {
    pub fn var(vertex: Vertex) -> Self {
        ValueSymbol { vertex, kind: ValueKind::Index(0) }
    }

    pub fn idx(vertex: Vertex, k: u32) -> Self {
        ValueSymbol { vertex, kind: ValueKind::Index(k) }
    }

    pub fn active(vertex: Vertex) -> Self {
        ValueSymbol { vertex, kind: ValueKind::Active }
    }

    pub fn baseline(vertex: Vertex) -> Self {
        ValueSymbol { vertex, kind: ValueKind::Baseline }
    }

    pub fn lit(vertex: Vertex, label: &str) -> Self {
        ValueSymbol { vertex, kind: ValueKind::Literal(label.to_string()) }
    }

    pub fn is_index(&self) -> bool {
        matches!(self.kind, ValueKind::Index(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulaExpr {
    /// Σ over the listed index symbols. Domains come from the evaluation
    /// environment.
    Sum { vars: Vec<ValueSymbol>, body: Box<FormulaExpr> },
    Product(Vec<FormulaExpr>),
    /// p(targets | do(regime)).
    DoTerm { targets: Vec<ValueSymbol>, regime: Vec<ValueSymbol> },
    /// p(targets | given) of the observed joint.
    ObsTerm { targets: Vec<ValueSymbol>, given: Vec<ValueSymbol> },
    /// Σ_var score(var) · body.
    Expectation { var: ValueSymbol, body: Box<FormulaExpr> },
    Difference(Box<FormulaExpr>, Box<FormulaExpr>),
    Add(Vec<FormulaExpr>),
    Ratio(Box<FormulaExpr>, Box<FormulaExpr>),
    Scalar(BigRational),
}

impl FormulaExpr {
    pub fn zero() -> Self {
        FormulaExpr::Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        FormulaExpr::Scalar(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FormulaExpr::Scalar(c) if c.is_zero())
    }

    pub fn sum(vars: Vec<ValueSymbol>, body: FormulaExpr) -> Self {
        if vars.is_empty() {
            return body;
        }
        match body {
            FormulaExpr::Sum { vars: inner, body } => {
                let mut all = vars;
                all.extend(inner);
                FormulaExpr::Sum { vars: all, body }
            }
            body => FormulaExpr::Sum { vars, body: Box::new(body) },
        }
    }

    /// Flattens nested products and drops unit scalars.
    pub fn product(factors: Vec<FormulaExpr>) -> Self {
        let mut out = Vec::new();
        for f in factors {
            match f {
                FormulaExpr::Product(inner) => out.extend(inner),
                FormulaExpr::Scalar(c) if c.is_one() => {}
                f => out.push(f),
            }
        }
        match out.len() {
            0 => FormulaExpr::one(),
            1 => out.pop().unwrap(),
            _ => FormulaExpr::Product(out),
        }
    }

    pub fn obs(targets: Vec<ValueSymbol>, given: Vec<ValueSymbol>) -> Self {
        FormulaExpr::ObsTerm { targets, given }
    }

    pub fn do_term(targets: Vec<ValueSymbol>, regime: Vec<ValueSymbol>) -> Self {
        FormulaExpr::DoTerm { targets, regime }
    }

    pub fn diff(a: FormulaExpr, b: FormulaExpr) -> Self {
        FormulaExpr::Difference(Box::new(a), Box::new(b))
    }

    pub fn ratio(a: FormulaExpr, b: FormulaExpr) -> Self {
        FormulaExpr::Ratio(Box::new(a), Box::new(b))
    }

    pub fn expectation(var: ValueSymbol, body: FormulaExpr) -> Self {
        FormulaExpr::Expectation { var, body: Box::new(body) }
    }

    /// Symbols of `Index` kind not bound by any enclosing binder.
    pub fn free_symbols(&self) -> BTreeSet<ValueSymbol> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    /// Vertices of every ObsTerm/DoTerm symbol in the expression.
    pub fn vertices(&self) -> VSet {
        let mut out = VSet::new();
        self.visit_symbols(&mut |s| {
            out.insert(s.vertex);
        });
        out
    }

    pub fn visit_symbols(&self, f: &mut impl FnMut(&ValueSymbol)) {
        use FormulaExpr::*;
        match self {
            Sum { vars, body } => {
                vars.iter().for_each(&mut *f);
                body.visit_symbols(f);
            }
            Product(fs) | Add(fs) => fs.iter().for_each(|e| e.visit_symbols(f)),
            DoTerm { targets, regime: given } | ObsTerm { targets, given } => {
                targets.iter().chain(given.iter()).for_each(&mut *f)
            }
            Expectation { var, body } => {
                f(var);
                body.visit_symbols(f);
            }
            Difference(a, b) | Ratio(a, b) => {
                a.visit_symbols(f);
                b.visit_symbols(f);
            }
            Scalar(_) => {}
        }
    }

    /// Rewrites every symbol occurrence (binders included).
    pub fn map_symbols(&self, f: &mut impl FnMut(&ValueSymbol) -> ValueSymbol) -> FormulaExpr {
        use FormulaExpr::*;
        match self {
            Sum { vars, body } => Sum {
                vars: vars.iter().map(&mut *f).collect(),
                body: Box::new(body.map_symbols(f)),
            },
            Product(fs) => Product(fs.iter().map(|e| e.map_symbols(f)).collect()),
            Add(fs) => Add(fs.iter().map(|e| e.map_symbols(f)).collect()),
            DoTerm { targets, regime } => DoTerm {
                targets: targets.iter().map(&mut *f).collect(),
                regime: regime.iter().map(&mut *f).collect(),
            },
            ObsTerm { targets, given } => ObsTerm {
                targets: targets.iter().map(&mut *f).collect(),
                given: given.iter().map(&mut *f).collect(),
            },
            Expectation { var, body } => Expectation {
                var: f(var),
                body: Box::new(body.map_symbols(f)),
            },
            Difference(a, b) => Difference(Box::new(a.map_symbols(f)), Box::new(b.map_symbols(f))),
            Ratio(a, b) => Ratio(Box::new(a.map_symbols(f)), Box::new(b.map_symbols(f))),
            Scalar(c) => Scalar(c.clone()),
        }
    }

    /// Replaces free occurrences of index symbols through `f`, respecting
    /// shadowing by inner binders.
    pub fn substitute_free(&self, f: &impl Fn(&ValueSymbol) -> Option<ValueSymbol>) -> FormulaExpr {
        subst(self, f, &mut Vec::new())
    }

    pub fn count_terms(&self) -> usize {
        use FormulaExpr::*;
        match self {
            Sum { body, .. } | Expectation { body, .. } => body.count_terms(),
            Product(fs) | Add(fs) => fs.iter().map(|e| e.count_terms()).sum(),
            DoTerm { .. } | ObsTerm { .. } => 1,
            Difference(a, b) | Ratio(a, b) => a.count_terms() + b.count_terms(),
            Scalar(_) => 0,
        }
    }
}

fn collect_free(e: &FormulaExpr, bound: &mut Vec<ValueSymbol>, out: &mut BTreeSet<ValueSymbol>) {
    use FormulaExpr::*;
    let mut note = |s: &ValueSymbol, bound: &Vec<ValueSymbol>| {
        if s.is_index() && !bound.contains(s) {
            out.insert(s.clone());
        }
    };
    match e {
        Sum { vars, body } => {
            let n = bound.len();
            bound.extend(vars.iter().cloned());
            collect_free(body, bound, out);
            bound.truncate(n);
        }
        Expectation { var, body } => {
            bound.push(var.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        Product(fs) | Add(fs) => fs.iter().for_each(|f| collect_free(f, bound, out)),
        DoTerm { targets, regime: given } | ObsTerm { targets, given } => {
            for s in targets.iter().chain(given.iter()) {
                note(s, bound);
            }
        }
        Difference(a, b) | Ratio(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Scalar(_) => {}
    }
}

fn subst(
    e: &FormulaExpr,
    f: &impl Fn(&ValueSymbol) -> Option<ValueSymbol>,
    bound: &mut Vec<ValueSymbol>,
) -> FormulaExpr {
    use FormulaExpr::*;
    let map = |s: &ValueSymbol, bound: &Vec<ValueSymbol>| -> ValueSymbol {
        if s.is_index() && !bound.contains(s) {
            f(s).unwrap_or_else(|| s.clone())
        } else {
            s.clone()
        }
    };
    match e {
        Sum { vars, body } => {
            let n = bound.len();
            bound.extend(vars.iter().cloned());
            let body = subst(body, f, bound);
            bound.truncate(n);
            Sum { vars: vars.clone(), body: Box::new(body) }
        }
        Expectation { var, body } => {
            bound.push(var.clone());
            let body = subst(body, f, bound);
            bound.pop();
            Expectation { var: var.clone(), body: Box::new(body) }
        }
        Product(fs) => Product(fs.iter().map(|x| subst(x, f, bound)).collect()),
        Add(fs) => Add(fs.iter().map(|x| subst(x, f, bound)).collect()),
        DoTerm { targets, regime } => DoTerm {
            targets: targets.iter().map(|s| map(s, bound)).collect(),
            regime: regime.iter().map(|s| map(s, bound)).collect(),
        },
        ObsTerm { targets, given } => ObsTerm {
            targets: targets.iter().map(|s| map(s, bound)).collect(),
            given: given.iter().map(|s| map(s, bound)).collect(),
        },
        Difference(a, b) => Difference(Box::new(subst(a, f, bound)), Box::new(subst(b, f, bound))),
        Ratio(a, b) => Ratio(Box::new(subst(a, f, bound)), Box::new(subst(b, f, bound))),
        Scalar(c) => Scalar(c.clone()),
    }
}
