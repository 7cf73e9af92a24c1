//! Identification functionals for path-specific effects.

use thiserror::Error;

use crate::admg::{Admg, VSet, Vertex};
use crate::pse::{
    find_recanting_districts, relevant_nodes, PathBundle, PseError, RecantingReport,
};

use super::expr::{FormulaExpr, ValueSymbol, ANY_VALUE};
use super::id::{identify_interventional, Hedge, IdError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error(transparent)]
    Pse(#[from] PseError),
    #[error("{} recanting district(s)", .0.len())]
    Recanting(Vec<RecantingReport>),
    #[error("not identifiable from the observed joint")]
    Hedge(Hedge),
    #[error("{0}")]
    Malformed(String),
    #[error("a single outcome is required")]
    SingleOutcome,
}

impl From<IdError> for FormulaError {
    fn from(e: IdError) -> Self {
        match e {
            IdError::Hedge(h) => FormulaError::Hedge(h),
            IdError::Malformed(m) => FormulaError::Malformed(m),
        }
    }
}

fn ordered_vars(s: &VSet) -> Vec<ValueSymbol> {
    s.iter().map(|&v| ValueSymbol::var(v)).collect()
}

/// Binding of treatment `a` for a district term: active when its arrows
/// into `d` are green, baseline otherwise.
fn treatment_binding(bundle: &PathBundle, a: Vertex, d: &VSet) -> ValueSymbol {
    if d.iter().any(|&z| bundle.is_green(a, z)) {
        ValueSymbol::active(a)
    } else {
        ValueSymbol::baseline(a)
    }
}

/// Σ_{V* \ Y} Π_D p(x_D | do(x_{Pa(D) \ D})) over the districts D of the
/// subgraph on the relevant nodes V*. Outcomes stay free.
pub fn interventional_functional(g: &Admg, bundle: &PathBundle) -> Result<FormulaExpr, FormulaError> {
    let reports = find_recanting_districts(g, bundle);
    if !reports.is_empty() {
        return Err(FormulaError::Recanting(reports));
    }
    let a = &bundle.treatments;
    let vstar = relevant_nodes(g, a, &bundle.outcomes);
    let mut factors = Vec::new();
    for d in g.subgraph(&vstar).districts() {
        let regime: Vec<ValueSymbol> = g
            .parents(&d)
            .difference(&d)
            .map(|&p| if a.contains(&p) { treatment_binding(bundle, p, &d) } else { ValueSymbol::var(p) })
            .collect();
        factors.push(FormulaExpr::do_term(ordered_vars(&d), regime));
    }
    let bound: VSet = vstar.difference(&bundle.outcomes).copied().collect();
    Ok(FormulaExpr::sum(ordered_vars(&bound), FormulaExpr::product(factors)))
}

fn replace_do_terms(
    e: &FormulaExpr,
    f: &mut impl FnMut(&FormulaExpr) -> Result<FormulaExpr, FormulaError>,
) -> Result<FormulaExpr, FormulaError> {
    use FormulaExpr::*;
    Ok(match e {
        DoTerm { .. } => f(e)?,
        Sum { vars, body } => Sum { vars: vars.clone(), body: Box::new(replace_do_terms(body, f)?) },
        Product(fs) => Product(fs.iter().map(|x| replace_do_terms(x, f)).collect::<Result<_, _>>()?),
        Add(fs) => Add(fs.iter().map(|x| replace_do_terms(x, f)).collect::<Result<_, _>>()?),
        Expectation { var, body } => Expectation { var: var.clone(), body: Box::new(replace_do_terms(body, f)?) },
        Difference(a, b) => Difference(Box::new(replace_do_terms(a, f)?), Box::new(replace_do_terms(b, f)?)),
        Ratio(a, b) => Ratio(Box::new(replace_do_terms(a, f)?), Box::new(replace_do_terms(b, f)?)),
        other => other.clone(),
    })
}

/// Replaces every interventional term by its observed-data identification.
pub fn identify_all(g: &Admg, e: &FormulaExpr) -> Result<FormulaExpr, FormulaError> {
    replace_do_terms(e, &mut |t| Ok(identify_interventional(g, t)?))
}

/// Observed-data functional of the π-specific effect, obtained by
/// identifying each term of [`interventional_functional`].
///
/// Valid under the functional-model semantics assumed throughout (the
/// cross-world independences implied by independent exogenous noise).
pub fn identify_pse(g: &Admg, bundle: &PathBundle) -> Result<FormulaExpr, FormulaError> {
    identify_all(g, &interventional_functional(g, bundle)?)
}

/// The same functional by the second route: identify each district of the
/// total effect p(Y | do(A)) inside the ancestral graph of Y, then switch
/// treatments to baseline in the district terms their arrows reach only
/// through blue edges.
pub fn identify_pse_by_substitution(g: &Admg, bundle: &PathBundle) -> Result<FormulaExpr, FormulaError> {
    let reports = find_recanting_districts(g, bundle);
    if !reports.is_empty() {
        return Err(FormulaError::Recanting(reports));
    }
    let a = &bundle.treatments;
    let y = &bundle.outcomes;
    let an = g.ancestors(y);
    let g_an = g.subgraph(&an);
    let vstar = relevant_nodes(g, a, y);
    let mut factors = Vec::new();
    for d in g.subgraph(&vstar).districts() {
        let has_arrow = |t: Vertex| d.iter().any(|&z| g.has_edge(t, z));
        let regime: Vec<ValueSymbol> = an
            .difference(&d)
            .map(|&v| {
                if a.contains(&v) {
                    if has_arrow(v) {
                        treatment_binding(bundle, v, &d)
                    } else {
                        ValueSymbol::active(v)
                    }
                } else if vstar.contains(&v) {
                    ValueSymbol::var(v)
                } else {
                    ValueSymbol::lit(v, ANY_VALUE)
                }
            })
            .collect();
        let term = FormulaExpr::do_term(ordered_vars(&d), regime);
        factors.push(identify_interventional(&g_an, &term)?);
    }
    let bound: VSet = vstar.difference(y).copied().collect();
    Ok(FormulaExpr::sum(ordered_vars(&bound), FormulaExpr::product(factors)))
}

/// p(Y | do(A = active)) (or baseline) as an observed-data functional.
pub fn total_effect_functional(g: &Admg, a: &VSet, y: &VSet, active: bool) -> Result<FormulaExpr, FormulaError> {
    let regime = a
        .iter()
        .map(|&v| if active { ValueSymbol::active(v) } else { ValueSymbol::baseline(v) })
        .collect();
    Ok(identify_interventional(g, &FormulaExpr::do_term(ordered_vars(y), regime))?)
}

fn single_outcome(y: &VSet) -> Result<Vertex, FormulaError> {
    match y.len() {
        1 => Ok(*y.iter().next().unwrap()),
        _ => Err(FormulaError::SingleOutcome),
    }
}

fn mean(y: Vertex, dist: FormulaExpr) -> FormulaExpr {
    FormulaExpr::expectation(ValueSymbol::var(y), dist)
}

/// Mean-difference effects along π and along the proper paths outside π:
/// `(E_π − E_do(baseline), E_do(active) − E_π)`.
pub fn mediation_effects(g: &Admg, bundle: &PathBundle) -> Result<(FormulaExpr, FormulaExpr), FormulaError> {
    let y = single_outcome(&bundle.outcomes)?;
    let f_pi = identify_pse(g, bundle)?;
    let f_act = total_effect_functional(g, &bundle.treatments, &bundle.outcomes, true)?;
    let f_base = total_effect_functional(g, &bundle.treatments, &bundle.outcomes, false)?;
    Ok((
        FormulaExpr::diff(mean(y, f_pi.clone()), mean(y, f_base)),
        FormulaExpr::diff(mean(y, f_act), mean(y, f_pi)),
    ))
}

/// E[Y(active, M(baseline))] = Σ_m p(y | do(a, m)) p(m | do(a')), each
/// term identified from the observed joint. This product form relies on
/// Y(a, m) being independent of M(a'), which holds in models with
/// independent noise and no confounding between the two terms.
pub fn cross_world_mean_functional(g: &Admg, a: &VSet, y: Vertex, m: &VSet) -> Result<FormulaExpr, FormulaError> {
    if a.contains(&y) || m.contains(&y) || !a.is_disjoint(m) {
        return Err(FormulaError::Malformed("treatment, mediator and outcome sets must be disjoint".into()));
    }
    let mut regime: Vec<ValueSymbol> = a.iter().map(|&v| ValueSymbol::active(v)).collect();
    regime.extend(ordered_vars(m));
    regime.sort();
    let outcome = identify_interventional(g, &FormulaExpr::do_term(vec![ValueSymbol::var(y)], regime))?;
    let mediator = identify_interventional(
        g,
        &FormulaExpr::do_term(ordered_vars(m), a.iter().map(|&v| ValueSymbol::baseline(v)).collect()),
    )?;
    Ok(mean(y, FormulaExpr::sum(ordered_vars(m), FormulaExpr::product(vec![outcome, mediator]))))
}

/// Natural direct and indirect effects of `a` on `y` with mediator set `m`:
/// `(E[Y(1, M(0))] − E[Y(0)], E[Y(1)] − E[Y(1, M(0))])`.
pub fn natural_effects(g: &Admg, a: &VSet, y: Vertex, m: &VSet) -> Result<(FormulaExpr, FormulaExpr), FormulaError> {
    let cross = cross_world_mean_functional(g, a, y, m)?;
    let ys = VSet::from([y]);
    let e1 = mean(y, total_effect_functional(g, a, &ys, true)?);
    let e0 = mean(y, total_effect_functional(g, a, &ys, false)?);
    Ok((FormulaExpr::diff(cross.clone(), e0), FormulaExpr::diff(e1, cross)))
}
