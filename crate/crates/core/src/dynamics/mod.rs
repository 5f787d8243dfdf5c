//! Dynamical abstractions over finite Markov systems.

mod contrastive;
mod loss;
mod markov;
mod maxcal;

pub use contrastive::{
    contrastive_loss, learn_abstract_dynamics, AbstractDynamics, DynamicsFit, ExpectationEncoder, RegressedEncoder,
    StateEncoder,
};
pub use loss::{dynamical_loss, DynamicalLoss};
pub use markov::{rollout_ensemble, rollout_ensemble_capped, MarkovSystem, Trajectory, DEFAULT_HORIZON_CAP};
pub use maxcal::{solve_maxcal, MaxCalSolution, PathConstraintSet, PathSpace, PATH_ENUMERATION_CAP};
