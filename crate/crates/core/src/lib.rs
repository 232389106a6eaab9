//! Exact and Monte-Carlo laboratory for nearest-neighbor estimates on metric
//! measure spaces.
//!
//! The library studies how the value of a scalar field at a point is
//! recovered by its nearest neighbor among `m` independent draws, and how
//! local averages of the field behave as the ball radius shrinks. It provides
//!
//! * spaces with exactly representable metric structure ([`space`]),
//! * tie-breaking rules for equidistant neighbors ([`tiebreak`]),
//! * exact and Monte-Carlo nearest-neighbor error laws ([`nn`]),
//! * local averages, shrinking-scale sequences, and the regularity
//!   conditions controlling them ([`lebesgue`]),
//! * binary classification risk of the 1-nearest-neighbor rule
//!   ([`classify`]),
//! * a brute-force enumeration oracle for small cases ([`oracle`]),
//! * the end-to-end verification suite ([`suite`]).
//!
//! Probabilities are carried as [`wide::WideFloat`] (double mantissa, 64-bit
//! exponent) so that masses like `2^(-2^60)` survive arithmetic that would
//! flush an `f64` to zero.

pub mod error;
pub mod nn;
pub mod oracle;
pub mod space;
pub mod tiebreak;
pub mod wide;

pub use error::{CoreError, Result};
pub use wide::WideFloat;
