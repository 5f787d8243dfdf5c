//! Maximum-entropy abstractions of finite and gridded probabilistic systems.
//!
//! An abstraction is a vector of feature-expectation targets `a`; its meaning
//! is the maxent distribution `m(a)` it induces. Abstractions are scored by how
//! much query answers computed from `m(a)` leak away from the true system.

pub mod abstractability;
pub mod bridge;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod learn;
pub mod maxent;
pub mod query;
pub mod space;

pub use error::{Error, Result};
pub use eval::{abstraction_loss, queryset_loss, AbstractionModel, LossReport};
pub use maxent::{solve_maxent, solve_maxent_on, MaxEntSolution, SolverOptions};
pub use query::{apply_query, DivergenceSpec, Query, QueryKind, QuerySet};
pub use space::{ConstraintSet, DiscreteDistribution, FeatureFunction, StateSpace};
