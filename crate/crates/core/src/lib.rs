//! Multi-tupled fixed and coincidence points of `F: X^n -> X` and `g: X -> X`
//! on ordered metric spaces.
//!
//! The index pattern of a tupled problem is a binary operation `*` on
//! `{1..n}` ([`index_algebra`]). The problem is lifted to the product space
//! `X^n` ([`product_lift`]), checked against a contraction condition
//! ([`contractions`]) and solved by a monotone Picard iteration ([`solver`]).
//! On finite spaces every answer can be cross-checked by exhaustive search
//! ([`oracle`]).

pub mod cli;
pub mod contractions;
pub mod index_algebra;
pub mod instance;
pub mod oracle;
pub mod product_lift;
pub mod scalar;
pub mod solver;
pub mod spaces;

pub use index_algebra::{BinaryOp, Partition, UpsilonTuple};
pub use scalar::Scalar;
pub use spaces::{Elem, FiniteSpace, OrderedMetricSpace, RealSpace};

/// Exact rational scalar used by finite spaces and the oracle.
pub type Exact = num_rational::Rational64;

/// Finite ordered metric space with exact distances.
pub type ExactSpace = FiniteSpace<Exact>;

/// The real line (or an interval of it) with `f64` arithmetic.
pub type RealLine = RealSpace<f64>;

/// The real line with `f32` arithmetic.
pub type RealLine32 = RealSpace<f32>;

/// Problem instance on a finite space with exact arithmetic.
pub type FiniteInstance = solver::ProblemInstance<ExactSpace>;

/// Problem instance on the real line.
pub type RealInstance = solver::ProblemInstance<RealLine>;
