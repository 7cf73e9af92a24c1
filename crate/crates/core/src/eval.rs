//! Exact evaluation of formulas against distribution tables, and the
//! effect-scale summaries built on it.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::admg::{Admg, VSet, Vertex};
use crate::formula::{
    mediation_effects, total_effect_functional, FormulaError, FormulaExpr, ValueKind, ValueSymbol, ANY_VALUE,
};
use crate::pse::{PathBundle, TreatmentValues};
use crate::scalar::Scalar;
use crate::scm::{DiscreteScm, DistTable, Regime, ScmError, Worlds};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("cannot resolve {0}")]
    Unresolvable(String),
    #[error("positivity violation: p({0}) = 0 in a conditioning event")]
    Positivity(String),
    #[error("value `{label}` is not in the domain of `{vertex}`")]
    UnknownValue { vertex: String, label: String },
    #[error("free variables repeat vertex `{0}`")]
    RepeatedFree(String),
    #[error("expected a number, the expression is a distribution over free variables")]
    NotScalar,
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Where observational and interventional tables come from.
pub trait Source<T: Scalar> {
    fn name(&self, v: Vertex) -> String;
    fn domain(&self, v: Vertex) -> Result<Vec<String>, EvalError>;
    fn observational(&self) -> Result<Rc<DistTable<T>>, EvalError>;
    fn interventional(&self, regime: &Regime) -> Result<Rc<DistTable<T>>, EvalError>;
}

/// A single observed joint; interventional terms are unresolvable.
pub struct TableSource<T> {
    table: Rc<DistTable<T>>,
}

impl<T: Scalar> TableSource<T> {
    pub fn new(table: DistTable<T>) -> Self {
        TableSource { table: Rc::new(table) }
    }
}

impl<T: Scalar> Source<T> for TableSource<T> {
    fn name(&self, v: Vertex) -> String {
        match self.table.position(v) {
            Some(k) => self.table.names()[k].clone(),
            None => format!("#{v}"),
        }
    }

    fn domain(&self, v: Vertex) -> Result<Vec<String>, EvalError> {
        match self.table.position(v) {
            Some(k) => Ok(self.table.domains()[k].clone()),
            None => Err(EvalError::Unresolvable(format!("vertex {}: not in the table", self.name(v)))),
        }
    }

    fn observational(&self) -> Result<Rc<DistTable<T>>, EvalError> {
        Ok(self.table.clone())
    }

    fn interventional(&self, regime: &Regime) -> Result<Rc<DistTable<T>>, EvalError> {
        if regime.is_empty() {
            return Ok(self.table.clone());
        }
        let r: Vec<String> = regime.keys().map(|&v| self.name(v)).collect();
        Err(EvalError::Unresolvable(format!("p(· | do({})) from an observational table", r.join(", "))))
    }
}

/// Tables computed on demand from a model, cached per regime.
pub struct ModelSource<'m, T> {
    model: &'m DiscreteScm<T>,
    worlds: Worlds<T>,
    cache: RefCell<HashMap<Regime, Rc<DistTable<T>>>>,
}

impl<'m, T: Scalar> ModelSource<'m, T> {
    pub fn new(model: &'m DiscreteScm<T>) -> Result<Self, EvalError> {
        Ok(ModelSource { model, worlds: model.worlds()?, cache: RefCell::new(HashMap::new()) })
    }
}

impl<T: Scalar> Source<T> for ModelSource<'_, T> {
    fn name(&self, v: Vertex) -> String {
        self.model.graph().name(v).to_string()
    }

    fn domain(&self, v: Vertex) -> Result<Vec<String>, EvalError> {
        if !self.model.graph().contains(v) {
            return Err(EvalError::Unresolvable(format!("vertex #{v}")));
        }
        Ok(self.model.domain(v).to_vec())
    }

    fn observational(&self) -> Result<Rc<DistTable<T>>, EvalError> {
        self.interventional(&Regime::new())
    }

    fn interventional(&self, regime: &Regime) -> Result<Rc<DistTable<T>>, EvalError> {
        if let Some(t) = self.cache.borrow().get(regime) {
            return Ok(t.clone());
        }
        let t = Rc::new(self.model.interventional_in(&self.worlds, regime)?);
        self.cache.borrow_mut().insert(regime.clone(), t.clone());
        Ok(t)
    }
}

/// Either a number or a distribution over the free variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Scalar(T),
    Dist(DistTable<T>),
}

impl<T: Scalar> Value<T> {
    pub fn scalar(self) -> Result<T, EvalError> {
        match self {
            Value::Scalar(x) => Ok(x),
            Value::Dist(_) => Err(EvalError::NotScalar),
        }
    }
}

type MarginalKey = (Option<Regime>, Vec<Vertex>);

pub struct Evaluator<'s, T: Scalar> {
    source: &'s dyn Source<T>,
    values: TreatmentValues,
    scores: BTreeMap<Vertex, Vec<T>>,
    marginals: RefCell<HashMap<MarginalKey, Rc<DistTable<T>>>>,
}

impl<'s, T: Scalar> Evaluator<'s, T> {
    pub fn new(source: &'s dyn Source<T>, values: &TreatmentValues) -> Self {
        Evaluator { source, values: values.clone(), scores: BTreeMap::new(), marginals: RefCell::new(HashMap::new()) }
    }

    /// Scores used for expectations over `v` (default: domain index).
    pub fn with_scores(mut self, v: Vertex, scores: Vec<T>) -> Self {
        self.scores.insert(v, scores);
        self
    }

    fn label_index(&self, v: Vertex, label: &str) -> Result<usize, EvalError> {
        let dom = self.source.domain(v)?;
        if label == ANY_VALUE {
            return Ok(0);
        }
        dom.iter()
            .position(|l| l == label)
            .ok_or_else(|| EvalError::UnknownValue { vertex: self.source.name(v), label: label.to_string() })
    }

    fn resolve(&self, s: &ValueSymbol, env: &[(ValueSymbol, usize)]) -> Result<usize, EvalError> {
        match &s.kind {
            ValueKind::Index(_) => env
                .iter()
                .rev()
                .find(|(b, _)| b == s)
                .map(|(_, x)| *x)
                .ok_or_else(|| EvalError::Unresolvable(format!("unbound variable {}", self.source.name(s.vertex)))),
            ValueKind::Active => self.label_index(s.vertex, self.values.active(s.vertex)),
            ValueKind::Baseline => self.label_index(s.vertex, self.values.baseline(s.vertex)),
            ValueKind::Literal(l) => self.label_index(s.vertex, l),
        }
    }

    /// Probability of a conjunction of (vertex, value) pairs under `regime`
    /// (`None` = observational). Conflicting values give 0.
    fn event(&self, regime: Option<&Regime>, pairs: &[(Vertex, usize)]) -> Result<T, EvalError> {
        let mut fixed: BTreeMap<Vertex, usize> = BTreeMap::new();
        for &(v, x) in pairs {
            if let Some(&old) = fixed.get(&v) {
                if old != x {
                    return Ok(T::zero());
                }
            }
            fixed.insert(v, x);
        }
        let vars: Vec<Vertex> = fixed.keys().copied().collect();
        let key = (regime.cloned(), vars.clone());
        let cached = self.marginals.borrow().get(&key).cloned();
        let marg = match cached {
            Some(m) => m,
            None => {
                let table = match regime {
                    None => self.source.observational()?,
                    Some(r) => self.source.interventional(r)?,
                };
                if let Some(&v) = vars.iter().find(|v| table.position(**v).is_none()) {
                    return Err(EvalError::Unresolvable(format!("vertex {} in the supplied table", self.source.name(v))));
                }
                let m = Rc::new(table.marginal(&vars)?);
                self.marginals.borrow_mut().insert(key, m.clone());
                m
            }
        };
        let a: Vec<usize> = fixed.values().copied().collect();
        Ok(marg.prob(&a).clone())
    }

    fn describe(&self, pairs: &[(Vertex, usize)]) -> String {
        pairs
            .iter()
            .map(|&(v, x)| {
                let label = self.source.domain(v).ok().and_then(|d| d.get(x).cloned()).unwrap_or_default();
                format!("{}={}", self.source.name(v), label)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn pairs(&self, ss: &[ValueSymbol], env: &[(ValueSymbol, usize)]) -> Result<Vec<(Vertex, usize)>, EvalError> {
        ss.iter().map(|s| Ok((s.vertex, self.resolve(s, env)?))).collect()
    }

    fn domain_size(&self, v: Vertex) -> Result<usize, EvalError> {
        Ok(self.source.domain(v)?.len())
    }

    fn scalar(&self, e: &FormulaExpr, env: &mut Vec<(ValueSymbol, usize)>) -> Result<T, EvalError> {
        use FormulaExpr::*;
        match e {
            Scalar(c) => Ok(T::from_big(c)),
            ObsTerm { targets, given } => {
                let g = self.pairs(given, env)?;
                let mut joint = self.pairs(targets, env)?;
                joint.extend(g.iter().copied());
                let num = self.event(None, &joint)?;
                if g.is_empty() {
                    return Ok(num);
                }
                let den = self.event(None, &g)?;
                if den.is_zero() {
                    return Err(EvalError::Positivity(self.describe(&g)));
                }
                Ok(num / den)
            }
            DoTerm { targets, regime } => {
                let r: Regime = self.pairs(regime, env)?.into_iter().collect();
                let t = self.pairs(targets, env)?;
                // targets that are also intervened on are indicators
                let mut free = Vec::new();
                for (v, x) in t {
                    match r.get(&v) {
                        Some(&y) if y != x => return Ok(T::zero()),
                        Some(_) => {}
                        None => free.push((v, x)),
                    }
                }
                self.event(Some(&r), &free)
            }
            Sum { vars, body } => {
                let sizes: Vec<usize> = vars.iter().map(|s| self.domain_size(s.vertex)).collect::<Result<_, _>>()?;
                let total: usize = sizes.iter().product();
                let mut acc = T::zero();
                let mark = env.len();
                for mut i in 0..total {
                    env.truncate(mark);
                    let mut digits = vec![0; vars.len()];
                    for k in (0..vars.len()).rev() {
                        digits[k] = i % sizes[k];
                        i /= sizes[k];
                    }
                    for (s, x) in vars.iter().zip(digits) {
                        env.push((s.clone(), x));
                    }
                    acc = acc + self.scalar(body, env)?;
                }
                env.truncate(mark);
                Ok(acc)
            }
            Product(fs) => {
                // a zero factor absorbs undefined conditionals elsewhere in
                // the product
                let mut acc = T::one();
                let mut pending = None;
                for f in fs {
                    match self.scalar(f, env) {
                        Ok(x) if x.is_zero() => return Ok(T::zero()),
                        Ok(x) => acc = acc * x,
                        Err(e @ EvalError::Positivity(_)) => {
                            pending.get_or_insert(e);
                        }
                        Err(e) => return Err(e),
                    }
                }
                match pending {
                    Some(e) => Err(e),
                    None => Ok(acc),
                }
            }
            Expectation { var, body } => {
                let n = self.domain_size(var.vertex)?;
                let mut acc = T::zero();
                for x in 0..n {
                    env.push((var.clone(), x));
                    let r = self.scalar(body, env);
                    env.pop();
                    let score = match self.scores.get(&var.vertex) {
                        Some(s) => s.get(x).cloned().ok_or_else(|| {
                            EvalError::Unresolvable(format!("score for value {x} of {}", self.source.name(var.vertex)))
                        })?,
                        None => T::from_ratio(x as i64, 1),
                    };
                    if score.is_zero() {
                        continue;
                    }
                    acc = acc + score * r?;
                }
                Ok(acc)
            }
            Difference(a, b) => Ok(self.scalar(a, env)? - self.scalar(b, env)?),
            Add(fs) => {
                let mut acc = T::zero();
                for f in fs {
                    acc = acc + self.scalar(f, env)?;
                }
                Ok(acc)
            }
            Ratio(a, b) => {
                let den = self.scalar(b, env)?;
                if den.is_zero() {
                    return Err(EvalError::Positivity(format!("denominator of a ratio at {}", self.describe(&env_pairs(env)))));
                }
                Ok(self.scalar(a, env)? / den)
            }
        }
    }

    /// Evaluates `e`; a distribution over its free variables when it has any.
    pub fn evaluate(&self, e: &FormulaExpr) -> Result<Value<T>, EvalError> {
        let free: Vec<ValueSymbol> = e.free_symbols().into_iter().collect();
        if free.is_empty() {
            return Ok(Value::Scalar(self.scalar(e, &mut Vec::new())?));
        }
        let mut seen = VSet::new();
        for s in &free {
            if !seen.insert(s.vertex) {
                return Err(EvalError::RepeatedFree(self.source.name(s.vertex)));
            }
        }
        let vars: Vec<Vertex> = free.iter().map(|s| s.vertex).collect();
        let names = vars.iter().map(|&v| self.source.name(v)).collect();
        let domains: Vec<Vec<String>> = vars.iter().map(|&v| self.source.domain(v)).collect::<Result<_, _>>()?;
        let shell = DistTable::<T>::unchecked(vars.clone(), names, domains.clone(), vec![T::zero(); domains.iter().map(|d| d.len()).product()])?;
        let mut probs = Vec::with_capacity(shell.len());
        for i in 0..shell.len() {
            let mut env: Vec<(ValueSymbol, usize)> = free.iter().cloned().zip(shell.assignment(i)).collect();
            probs.push(self.scalar(e, &mut env)?);
        }
        Ok(Value::Dist(DistTable::unchecked(vars, shell.names().to_vec(), domains, probs)?))
    }
}

fn env_pairs(env: &[(ValueSymbol, usize)]) -> Vec<(Vertex, usize)> {
    env.iter().map(|(s, x)| (s.vertex, *x)).collect()
}

/// Evaluates `e` with default scoring.
pub fn evaluate<T: Scalar>(e: &FormulaExpr, source: &dyn Source<T>, values: &TreatmentValues) -> Result<Value<T>, EvalError> {
    Evaluator::new(source, values).evaluate(e)
}

fn mean_of(y: Vertex, f: FormulaExpr) -> FormulaExpr {
    FormulaExpr::expectation(ValueSymbol::var(y), f)
}

/// E[Y(active)] − E[Y(baseline)] through the identified total-effect
/// functionals, outcome values scored by domain index.
pub fn total_effect<T: Scalar>(
    g: &Admg,
    a: &VSet,
    y: Vertex,
    values: &TreatmentValues,
    source: &dyn Source<T>,
) -> Result<T, EvalError> {
    let ys = VSet::from([y]);
    let e = FormulaExpr::diff(
        mean_of(y, total_effect_functional(g, a, &ys, true)?),
        mean_of(y, total_effect_functional(g, a, &ys, false)?),
    );
    evaluate(&e, source, values)?.scalar()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub total: T,
    pub in_pi: T,
    pub not_in_pi: T,
}

/// Total effect and its split into the part along π and the rest.
pub fn decompose<T: Scalar>(
    g: &Admg,
    bundle: &PathBundle,
    values: &TreatmentValues,
    source: &dyn Source<T>,
) -> Result<Decomposition<T>, EvalError> {
    let (in_pi, not_in_pi) = mediation_effects(g, bundle)?;
    let y = *bundle.outcomes.iter().next().expect("single outcome checked above");
    let ev = Evaluator::new(source, values);
    let total = total_effect(g, &bundle.treatments, y, values, source)?;
    Ok(Decomposition { total, in_pi: ev.evaluate(&in_pi)?.scalar()?, not_in_pi: ev.evaluate(&not_in_pi)?.scalar()? })
}
