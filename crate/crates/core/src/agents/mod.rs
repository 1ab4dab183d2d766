//! Baseline policies, tabular Q-learning and the exact lexicographic solver.

mod policy;
mod qlearn;
mod solver;

pub use policy::{
    greedy, parse_action_script, random_policy, scripted_policy, Policy, PolicyInput, RandomPolicy, ScriptedPolicy,
    TableFile, TabularPolicy, TABLE_FORMAT, TABLE_VERSION,
};
pub use qlearn::{q_learn, RewardMode, TrainConfig, TrainResult, HEAVY_SHAPING_LAMBDA};
pub use solver::{exact_solve, SolveOptions, SolveResult, DEFAULT_STATE_CAP};
