//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A space, field, or rule was given parameters that violate its contract.
    #[error("invalid construction: {0}")]
    Construction(String),

    /// An exact computation was requested on a space without an atom table.
    #[error("operation requires an atomic space with an enumerable support, got {0}")]
    AtomicRequired(String),

    /// The exact engine has no closed form for this tie-breaking rule on a
    /// sphere holding more than two atoms.
    #[error("no closed form for rule `{rule}` on a sphere with {atoms} atoms; only ties between two atoms are solvable for this rule")]
    UnsupportedRule { rule: String, atoms: usize },

    /// A ratio was requested over a ball of measure zero.
    #[error("ball of radius {radius} around the anchor has measure zero")]
    ZeroMassBall { radius: String },

    /// Limit object does not exist for the requested quantity.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// Brute-force enumeration would exceed the configured budget.
    #[error("enumeration needs {needed} tuples, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },

    /// The scale sequence is not defined: the anchor carries an atom or the
    /// deviation integral vanishes at some positive radius.
    #[error("scale sequence undefined: {0}")]
    TrivialAlphaCase(String),

    /// The requested index lies past the resolution of a truncated space.
    #[error("scale index {m} needs radii below the smallest representable radius {smallest} (threshold {threshold:e})")]
    BeyondTruncation { m: u64, smallest: String, threshold: f64 },

    /// A sample-based estimate was asked of an empty sample.
    #[error("empty sample: {0}")]
    EmptySample(String),

    /// Generic invalid argument.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
