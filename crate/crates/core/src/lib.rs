//! Control of a rainwater cistern feeding a green roof.
//!
//! - [`model`]: the exact two-tank plant and its clamped Euler step.
//! - [`smooth`]: a differentiable surrogate `f^ε` of the plant.
//! - [`linearize`]: Jacobians of `f^ε`, the condensed horizon and its QP.
//! - [`riskdp`]: finite-horizon dynamic programming under the entropic risk
//!   criterion, brute-force references and Lipschitz regularization.
//! - [`control`]: MPC, on/off and tabled DP controllers.
//! - [`sim`]: weather input, closed-loop runs and controller comparison.
//!
//! ```
//! use stormdp::model::{Disturbance, PlantParams, State};
//!
//! let p = PlantParams::default();
//! let x = p.step(State::new(100.0, 10.0), 0.5, Disturbance::new(1e-6, 4e-5)).unwrap();
//! assert!(p.contains(x));
//! ```

// `!(x > 0.0)` is the NaN-rejecting form used by every validator
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod linearize;
pub mod model;
pub mod riskdp;
pub mod sim;
pub mod smooth;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/smoothing.md")]
    mod smoothing {}
    #[doc = include_str!("../../../book/src/mpc.md")]
    mod mpc {}
    #[doc = include_str!("../../../book/src/entropic-dp.md")]
    mod entropic_dp {}
    #[doc = include_str!("../../../book/src/regularization.md")]
    mod regularization {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
