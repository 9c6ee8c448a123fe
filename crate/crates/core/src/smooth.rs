//! Differentiable approximation `f^ε` of the plant.
//!
//! The outlet kink is replaced by a C¹ square root and every case split
//! (pump suction, soil moisture, soil capacity) by a logistic gate of width
//! `ε` measured in m³. Away from the transition bands the smooth flows
//! coincide with the exact ones to machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_control, Disturbance, PlantParams, State};

/// Largest magnitude passed to `exp` inside a gate.
const EXP_CLAMP: f64 = 500.0;

/// Which side of the threshold switches the gate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateSense {
    ActivateAbove,
    ActivateBelow,
}

/// Smoothing scale together with the plant it smooths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothParams {
    pub epsilon: f64,
    pub plant: PlantParams,
}

impl SmoothParams {
    pub const DEFAULT_EPSILON: f64 = 0.5;

    pub fn new(epsilon: f64, plant: PlantParams) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        plant.validate()?;
        Ok(SmoothParams { epsilon, plant })
    }

    /// Argument of the outlet square root, `x1/a1 − z_o`.
    pub fn outlet_head(&self, x1: f64) -> f64 {
        x1 / self.plant.a1 - self.plant.z_o
    }

    /// Argument of the pump square root, `x1/a1 + ĉ − d`.
    pub fn pump_radicand(&self, x1: f64) -> f64 {
        x1 / self.plant.a1 + self.plant.c_hat - self.plant.d
    }

    /// Suction gate σ₁: on when the cistern holds enough water to pump.
    pub fn suction_gate(&self, x1: f64) -> f64 {
        sigmoid_gate(
            x1,
            self.plant.x1_pump_threshold(),
            GateSense::ActivateAbove,
            self.epsilon,
        )
    }

    /// Moisture gate σ₂: on while the soil is drier than desired.
    pub fn moisture_gate(&self, x2: f64) -> f64 {
        sigmoid_gate(
            x2,
            self.plant.x2_target(),
            GateSense::ActivateBelow,
            self.epsilon,
        )
    }

    /// Capacity gate σ₃: on once the soil is saturated.
    pub fn capacity_gate(&self, x2: f64) -> f64 {
        sigmoid_gate(x2, self.plant.z_cap, GateSense::ActivateAbove, self.epsilon)
    }

    pub fn q_out_eps(&self, x1: f64) -> f64 {
        self.plant.c_out() * psi(self.outlet_head(x1), self.epsilon)
    }

    /// `u·b·ψ^ε(x1/a1 + ĉ − d)·σ₁(x1)·σ₂(x2)`.
    pub fn q_pump_eps(&self, x: State, u: f64) -> Result<f64> {
        check_control(u)?;
        let eta = u * self.plant.pump_coefficient() * psi(self.pump_radicand(x.x1), self.epsilon);
        Ok(eta * self.suction_gate(x.x1) * self.moisture_gate(x.x2))
    }

    /// Darcy rate times σ₃.
    pub fn q_drain_eps(&self, x2: f64) -> f64 {
        self.darcy_rate(x2) * self.capacity_gate(x2)
    }

    /// Ungated Darcy rate `K·a2·(x2/a2 + z_soil)/z_soil`.
    pub(crate) fn darcy_rate(&self, x2: f64) -> f64 {
        let p = &self.plant;
        p.k_sat * p.a2 * (x2 / p.a2 + p.z_soil) / p.z_soil
    }

    pub fn f_eps_rhs(&self, x: State, u: f64, w: Disturbance) -> Result<[f64; 2]> {
        let p = &self.plant;
        let pump = self.q_pump_eps(x, u)?;
        Ok([
            w.w_r * p.a_in - self.q_out_eps(x.x1) - pump,
            w.w_r * p.a2 + pump - w.w_e - self.q_drain_eps(x.x2),
        ])
    }
}

/// Smooth square root: constant `(2/3)√ε` for `y ≤ 0`, a `y^{3/2}` blend on
/// `(0, ε]`, and `√y` beyond.
pub fn smooth_sqrt(y: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(psi(y, epsilon))
}

pub(crate) fn psi(y: f64, eps: f64) -> f64 {
    if y <= 0.0 {
        2.0 / 3.0 * eps.sqrt()
    } else if y <= eps {
        y * y.sqrt() / (3.0 * eps) + 2.0 / 3.0 * eps.sqrt()
    } else {
        y.sqrt()
    }
}

/// Derivative of [`smooth_sqrt`] with respect to `y`.
pub fn smooth_sqrt_slope(y: f64, eps: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y <= eps {
        y.sqrt() / (2.0 * eps)
    } else {
        0.5 / y.sqrt()
    }
}

/// Logistic gate in `(0, 1)` (saturating to exactly 0 or 1 far from the threshold).
pub fn sigmoid_gate(z: f64, threshold: f64, sense: GateSense, epsilon: f64) -> f64 {
    debug_assert!(epsilon > 0.0);
    let arg = match sense {
        GateSense::ActivateAbove => (threshold - z) / epsilon,
        GateSense::ActivateBelow => (z - threshold) / epsilon,
    };
    1.0 / (1.0 + arg.clamp(-EXP_CLAMP, EXP_CLAMP).exp())
}

/// Derivative of [`sigmoid_gate`] with respect to `z`.
pub fn sigmoid_gate_slope(z: f64, threshold: f64, sense: GateSense, epsilon: f64) -> f64 {
    let s = sigmoid_gate(z, threshold, sense, epsilon);
    let mag = s * (1.0 - s) / epsilon;
    match sense {
        GateSense::ActivateAbove => mag,
        GateSense::ActivateBelow => -mag,
    }
}
