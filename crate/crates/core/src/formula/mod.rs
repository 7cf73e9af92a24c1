//! Symbolic identification formulas: IR, construction, identification,
//! canonical forms, rendering and parsing.

pub mod build;
pub mod canon;
pub mod expr;
pub mod id;
pub mod parse;
pub mod render;

pub use build::{
    cross_world_mean_functional, identify_all, identify_pse, identify_pse_by_substitution,
    interventional_functional, mediation_effects, natural_effects, total_effect_functional, FormulaError,
};
pub use canon::{canonicalize, canonicalize_in};
pub use expr::{FormulaExpr, ValueKind, ValueSymbol, ANY_VALUE};
pub use id::{identify_interventional, Hedge, IdError};
pub use parse::{parse_formula, FormulaParseError};
pub use render::{render, Style};
