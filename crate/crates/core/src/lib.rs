//! Selfish-mining analysis: the truncated attack MDP, average-reward solvers,
//! revenue bounds, profit thresholds, a Monte Carlo simulator and the
//! network-delay deviation bound.

pub mod chain;
pub mod delay;
pub mod error;
pub mod evaluate;
pub mod mdp;
pub mod model;
pub mod optimizer;
pub mod policy;
pub mod simulator;
pub mod transitions;
pub mod validate;

pub use chain::{
    build_base_model, build_honest_disabled, build_truncated, BoundaryMode, Compensation,
    ThresholdVariant,
};
pub use delay::{
    catchup_probability, deviation_gain, min_profitable_k, DelayParams, DelayReport,
};
pub use error::{Error, Result};
pub use evaluate::{evaluate_policy_exact, evaluate_policy_with, BoundaryRule, Evaluation};
pub use mdp::{solve_average_reward, MiningModel, RelativeValueIteration, ScalarModel, SolveResult};
pub use model::{
    feasible_actions, honest_policy, sm1_policy, upper_bound_revenue, Action, ActionSet,
    ChainState, Fork, MiningParams, RewardPair, StateIndex, StateSpace, Variant, ATTACKER_START,
    HONEST_START,
};
pub use optimizer::{
    find_optimal, profit_threshold, sweep, BoundsReport, OptimizeConfig, SweepRow,
    ThresholdConfig, ThresholdReport, Verdict,
};
pub use policy::{Policy, PolicyFile};
pub use simulator::{simulate_batch, simulate_policy, BatchResult, SimConfig, SimResult};
pub use validate::{validate_model, ValidationReport};
