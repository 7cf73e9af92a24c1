pub mod admg;
pub mod scalar;
pub mod pse;
pub mod formula;
pub mod scm;
pub mod eval;
pub mod cli;

/// Exact rational probabilities.
pub type Rational = num_rational::BigRational;
pub type ExactScm = scm::DiscreteScm<Rational>;
pub type ExactTable = scm::DistTable<Rational>;
pub type FloatScm = scm::DiscreteScm<f64>;
pub type FloatTable = scm::DistTable<f64>;
