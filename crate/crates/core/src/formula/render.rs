//! Text and LaTeX rendering.
//!
//! Text grammar (what [`super::parse`] reads back):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor+                       juxtaposition = product
//! factor := 'Σ_' binders term             a sum swallows the rest of its term
//!         | 'p(' syms ['|' (syms | 'do(' syms? ')')] ')'
//!         | 'E[' sym ['|' syms] ']'  |  'E_' sym '[' expr ']'
//!         | '(' expr ')' ['/' '(' expr ')']
//!         | rational
//! sym    := name | name '#' k | name '=' label
//! ```

use crate::admg::Admg;
use crate::pse::TreatmentValues;

use super::expr::{FormulaExpr, ValueKind, ValueSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Text,
    Latex,
}

pub struct Renderer<'a> {
    pub g: &'a Admg,
    pub values: &'a TreatmentValues,
    pub style: Style,
}

pub fn render(e: &FormulaExpr, g: &Admg, values: &TreatmentValues, style: Style) -> String {
    Renderer { g, values, style }.expr(e)
}

impl Renderer<'_> {
    pub fn symbol(&self, s: &ValueSymbol) -> String {
        let name = self.g.name(s.vertex);
        let latex = self.style == Style::Latex;
        match &s.kind {
            ValueKind::Index(0) => name.to_string(),
            ValueKind::Index(k) if latex => format!("{name}^{{({k})}}"),
            ValueKind::Index(k) => format!("{name}#{k}"),
            ValueKind::Active => format!("{name}={}", self.values.active(s.vertex)),
            ValueKind::Baseline => format!("{name}={}", self.values.baseline(s.vertex)),
            ValueKind::Literal(x) => format!("{name}={x}"),
        }
    }

    fn syms(&self, ss: &[ValueSymbol]) -> String {
        ss.iter().map(|s| self.symbol(s)).collect::<Vec<_>>().join(", ")
    }

    fn bar(&self) -> &'static str {
        match self.style {
            Style::Text => " | ",
            Style::Latex => " \\mid ",
        }
    }

    pub fn expr(&self, e: &FormulaExpr) -> String {
        use FormulaExpr::*;
        match e {
            Add(fs) => {
                let mut out = String::new();
                for (i, f) in fs.iter().enumerate() {
                    let needs = matches!(f, Add(_)) || (i > 0 && matches!(f, Difference(..)));
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    out.push_str(&self.wrap(f, needs));
                }
                out
            }
            Difference(a, b) => {
                let rb = matches!(**b, Add(_) | Difference(..));
                format!("{} - {}", self.expr(a), self.wrap(b, rb))
            }
            _ => self.term(e),
        }
    }

    fn wrap(&self, e: &FormulaExpr, parens: bool) -> String {
        if parens {
            match self.style {
                Style::Text => format!("({})", self.expr(e)),
                Style::Latex => format!("\\left({}\\right)", self.expr(e)),
            }
        } else {
            self.expr(e)
        }
    }

    fn term(&self, e: &FormulaExpr) -> String {
        use FormulaExpr::*;
        match e {
            Product(fs) => {
                let mut flat = Vec::new();
                flatten(fs, &mut flat);
                let n = flat.len();
                flat.iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let needs = match f {
                            Add(_) | Difference(..) => true,
                            Sum { .. } => i + 1 < n,
                            _ => false,
                        };
                        self.wrap_factor(f, needs)
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            }
            _ => self.factor(e),
        }
    }

    fn wrap_factor(&self, e: &FormulaExpr, parens: bool) -> String {
        if parens {
            self.wrap(e, true)
        } else {
            self.factor(e)
        }
    }

    fn factor(&self, e: &FormulaExpr) -> String {
        use FormulaExpr::*;
        let latex = self.style == Style::Latex;
        match e {
            Sum { vars, body } => {
                let head = if vars.len() == 1 && !latex {
                    format!("Σ_{}", self.symbol(&vars[0]))
                } else if latex {
                    format!("\\sum_{{{}}}", self.syms(vars))
                } else {
                    format!("Σ_{{{}}}", self.syms(vars))
                };
                let body_needs = matches!(**body, Add(_) | Difference(..));
                format!("{} {}", head, self.wrap_term(body, body_needs))
            }
            ObsTerm { targets, given } => {
                if given.is_empty() {
                    format!("p({})", self.syms(targets))
                } else {
                    format!("p({}{}{})", self.syms(targets), self.bar(), self.syms(given))
                }
            }
            DoTerm { targets, regime } => {
                let d = if latex { "\\mathrm{do}" } else { "do" };
                format!("p({}{}{}({}))", self.syms(targets), self.bar(), d, self.syms(regime))
            }
            Expectation { var, body } => {
                let e = if latex { "\\mathbb{E}" } else { "E" };
                if let ObsTerm { targets, given } = &**body {
                    if targets.len() == 1 && &targets[0] == var {
                        return if given.is_empty() {
                            format!("{e}[{}]", self.symbol(var))
                        } else {
                            format!("{e}[{}{}{}]", self.symbol(var), self.bar(), self.syms(given))
                        };
                    }
                }
                if latex {
                    format!("{e}_{{{}}}\\left[{}\\right]", self.symbol(var), self.expr(body))
                } else {
                    format!("E_{}[ {} ]", self.symbol(var), self.expr(body))
                }
            }
            Ratio(a, b) => {
                if latex {
                    format!("\\frac{{{}}}{{{}}}", self.expr(a), self.expr(b))
                } else {
                    format!("({}) / ({})", self.expr(a), self.expr(b))
                }
            }
            Scalar(c) => {
                let t = crate::scalar::Scalar::to_text(c);
                if c < &num_traits::Zero::zero() {
                    format!("({t})")
                } else {
                    t
                }
            }
            Product(_) | Add(_) | Difference(..) => self.wrap(e, true),
        }
    }

    fn wrap_term(&self, e: &FormulaExpr, parens: bool) -> String {
        if parens {
            self.wrap(e, true)
        } else {
            self.term(e)
        }
    }
}

fn flatten<'a>(fs: &'a [FormulaExpr], out: &mut Vec<&'a FormulaExpr>) {
    for f in fs {
        match f {
            FormulaExpr::Product(inner) => flatten(inner, out),
            f => out.push(f),
        }
    }
}
