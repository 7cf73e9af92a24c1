//! Exact joint distribution tables.

use std::collections::BTreeMap;

use crate::admg::Vertex;
use crate::scalar::Scalar;

use super::ScmError;

/// A joint distribution over an ordered list of variables. Entries are
/// stored in lexicographic (mixed-radix, first variable most significant)
/// order of domain indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTable<T> {
    vars: Vec<Vertex>,
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    probs: Vec<T>,
}

impl<T: Scalar> DistTable<T> {
    /// Checks sizes, nonnegativity and that the entries sum to one (exactly
    /// for exact scalars, within 1e-6 otherwise).
    pub fn new(
        vars: Vec<Vertex>,
        names: Vec<String>,
        domains: Vec<Vec<String>>,
        probs: Vec<T>,
    ) -> Result<Self, ScmError> {
        let t = Self::unchecked(vars, names, domains, probs)?;
        if t.probs.iter().any(|p| *p < T::zero()) {
            return Err(ScmError::Invalid("negative probability in table".into()));
        }
        let total = t.total();
        let ok = if T::is_exact() { total == T::one() } else { (total.to_f64() - 1.0).abs() < 1e-6 };
        if !ok {
            return Err(ScmError::Invalid(format!("table sums to {}, not 1", total.to_text())));
        }
        Ok(t)
    }

    /// Shape checks only; used for intermediate (unnormalised) results.
    pub fn unchecked(
        vars: Vec<Vertex>,
        names: Vec<String>,
        domains: Vec<Vec<String>>,
        probs: Vec<T>,
    ) -> Result<Self, ScmError> {
        if vars.len() != names.len() || vars.len() != domains.len() {
            return Err(ScmError::Invalid("variable, name and domain lists differ in length".into()));
        }
        let size: usize = domains.iter().map(|d| d.len()).product();
        if size != probs.len() {
            return Err(ScmError::Invalid(format!("table has {} entries, domains need {size}", probs.len())));
        }
        Ok(DistTable { vars, names, domains, probs })
    }

    pub fn vars(&self) -> &[Vertex] {
        &self.vars
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |acc, p| acc + p.clone())
    }

    pub fn position(&self, v: Vertex) -> Option<usize> {
        self.vars.iter().position(|&x| x == v)
    }

    /// Flat index of a full assignment of domain indices.
    pub fn index_of(&self, assignment: &[usize]) -> usize {
        assignment
            .iter()
            .zip(&self.domains)
            .fold(0, |acc, (&x, d)| acc * d.len() + x)
    }

    /// Inverse of [`Self::index_of`].
    pub fn assignment(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for (k, d) in self.domains.iter().enumerate().rev() {
            out[k] = index % d.len();
            index /= d.len();
        }
        out
    }

    pub fn prob(&self, assignment: &[usize]) -> &T {
        &self.probs[self.index_of(assignment)]
    }

    /// Total probability of a partial assignment (vertex → domain index).
    /// Vertices not in the table are ignored.
    pub fn event(&self, partial: &BTreeMap<Vertex, usize>) -> T {
        let fixed: Vec<Option<usize>> = self.vars.iter().map(|v| partial.get(v).copied()).collect();
        let mut acc = T::zero();
        for (i, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let a = self.assignment(i);
            if a.iter().zip(&fixed).all(|(x, f)| f.map_or(true, |f| f == *x)) {
                acc = acc + p.clone();
            }
        }
        acc
    }

    /// Marginal over `keep` (in the given order). Every kept vertex must be
    /// in the table.
    pub fn marginal(&self, keep: &[Vertex]) -> Result<DistTable<T>, ScmError> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|&v| self.position(v).ok_or(ScmError::MissingVariable(v)))
            .collect::<Result<_, _>>()?;
        let domains: Vec<Vec<String>> = pos.iter().map(|&k| self.domains[k].clone()).collect();
        let names = pos.iter().map(|&k| self.names[k].clone()).collect();
        let size: usize = domains.iter().map(|d| d.len()).product();
        let mut probs = vec![T::zero(); size];
        for (i, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let a = self.assignment(i);
            let j = pos.iter().zip(&domains).fold(0, |acc, (&k, d)| acc * d.len() + a[k]);
            probs[j] = probs[j].clone() + p.clone();
        }
        Ok(DistTable { vars: keep.to_vec(), names, domains, probs })
    }

    /// Half the L1 distance. Tables must share variables and domains.
    pub fn tvd(&self, other: &DistTable<T>) -> Result<T, ScmError> {
        if self.vars != other.vars || self.domains != other.domains {
            return Err(ScmError::Invalid("total variation needs tables over the same variables".into()));
        }
        let l1 = self
            .probs
            .iter()
            .zip(&other.probs)
            .fold(T::zero(), |acc, (p, q)| acc + (p.clone() - q.clone()).abs_value());
        Ok(l1 / T::from_ratio(2, 1))
    }

    /// Reorders the variables into `order` (a permutation of the current
    /// variables).
    pub fn reorder(&self, order: &[Vertex]) -> Result<DistTable<T>, ScmError> {
        if order.len() != self.vars.len() {
            return Err(ScmError::Invalid("reorder needs a permutation of the table variables".into()));
        }
        self.marginal(order)
    }

    /// Distinct-assignment iterator in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<usize>, &T)> + '_ {
        self.probs.iter().enumerate().map(|(i, p)| (self.assignment(i), p))
    }

    /// Mean of the variable at `v`, scoring domain values by index.
    pub fn mean_index(&self, v: Vertex) -> Result<T, ScmError> {
        let k = self.position(v).ok_or(ScmError::MissingVariable(v))?;
        let mut acc = T::zero();
        for (a, p) in self.rows() {
            acc = acc + p.clone() * T::from_ratio(a[k] as i64, 1);
        }
        Ok(acc)
    }
}
