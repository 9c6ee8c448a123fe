//! Finite-horizon dynamic programming under the entropic risk criterion.
//!
//! The continuous plant is discretized into a [`FiniteMdp`]: grid nodes,
//! a finite action list and a state-independent disturbance distribution.
//! [`solve`] runs the backward recursion
//!
//! ```text
//! V_N = c_N
//! V_t(x) = min_u  c_t(x,u) + (1/γ)·log Σ_w p(w)·exp(γ·V_{t+1}(f(x,u,w)))     γ = −θ/2
//! ```
//!
//! and [`evaluate_policy_w`] computes the multiplicative objects `W_t^π` of a
//! fixed policy. [`brute_force_optimal`] enumerates all Markov policies of a
//! tiny instance and is the reference the recursion is tested against.
//!
//! Under [`Projection::Nearest`] the discretized problem is an exact finite
//! MDP; [`Projection::Multilinear`] interpolates values and is meant for
//! control quality only.

mod grid;
mod mdp;
mod regularize;
mod solve;

pub use grid::{Grid, Projection};
pub use mdp::{CostSpec, DisturbanceModel, FiniteMdp, StageCosts};
pub use regularize::{exactness_threshold, lipschitz_regularize, DistanceMatrix};
pub use solve::{
    brute_force_optimal, entropic_backup, enumerate_policies, evaluate_policy_w, log_sum_exp,
    risk_functional, solve, BruteForce, Criterion, PolicyTable, RiskParams, ValueTable, WTable,
    MAX_ENUMERATED_POLICIES,
};

/// Default action list `u = 0, 0.1, …, 1`.
pub fn uniform_actions(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
