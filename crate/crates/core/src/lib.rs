//! Exact-arithmetic toolkit for interval Markov decision processes.
//!
//! The crate minimises IMDPs under two probabilistic bisimulations — a
//! cooperative one, where action choice and uncertainty resolution work
//! together, and a competitive one, where they oppose each other — by
//! partition refinement over polytopes of successor distributions. A robust
//! bounded value-iteration engine evaluates bounded PCTL queries under the
//! four scheduler/nature quantifier modes and doubles as the oracle for the
//! preservation properties of the quotients.
//!
//! Everything is computed over arbitrary-precision rationals: polytope
//! vertex sets, hull equality, LP feasibility and value vectors are exact,
//! so equality checks are decisions rather than tolerance comparisons.

pub mod bisim;
pub mod compose;
pub mod format;
pub mod geometry;
pub mod interval;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod rational;
pub mod semantics;
pub mod workbench;

pub use interval::Interval;
pub use model::{metrics, validate, Imdp, ImdpBuilder, ModelMetrics, ValidationReport};
pub use partition::Partition;
pub use rational::Rat;
