//! Controllers as step functions from (time, state, forecast) to a control in `[0, 1]`.

use std::collections::VecDeque;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::linearize::{condense, linearize_at, solve_mpc_qp, HorizonCost, OperatingPoint};
use crate::model::{Disturbance, PlantParams, State};
use crate::riskdp::{Grid, PolicyTable};
use crate::smooth::SmoothParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    /// Control weight λ.
    pub lambda: f64,
    /// Look-ahead M.
    pub horizon: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            lambda: 1e-3,
            horizon: 10,
        }
    }
}

/// Receding-horizon memory: last applied control, trailing disturbances and
/// the operating point of the most recent solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub u_bar: f64,
    history: VecDeque<Disturbance>,
    window: usize,
    pub op: OperatingPoint,
}

impl ControllerState {
    /// No pumping and no weather before the first step.
    pub fn new(x0: State, window: usize) -> Self {
        ControllerState {
            u_bar: 0.0,
            history: VecDeque::with_capacity(window),
            window,
            op: OperatingPoint {
                x: x0,
                u: 0.0,
                w: Disturbance::default(),
            },
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &Disturbance> {
        self.history.iter()
    }

    /// Mean of the trailing window; zero before anything is observed.
    pub fn w_bar(&self) -> Disturbance {
        let n = self.history.len();
        if n == 0 {
            return Disturbance::default();
        }
        let (r, e) = self
            .history
            .iter()
            .fold((0.0, 0.0), |(r, e), w| (r + w.w_r, e + w.w_e));
        Disturbance::new(r / n as f64, e / n as f64)
    }

    pub fn observe(&mut self, w: Disturbance) {
        if self.window == 0 {
            return;
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(w);
    }
}

/// One receding-horizon MPC step.
///
/// Linearizes at `(x, ū, w̄)`, condenses `M` stages, solves the quadratic and
/// applies the first control. The first forecast entry is the disturbance
/// realized over this step and enters the history.
pub fn mpc_step(
    _t: usize,
    x: State,
    forecast: &[Disturbance],
    cs: &ControllerState,
    cfg: &MpcConfig,
    sp: &SmoothParams,
) -> Result<(f64, ControllerState)> {
    if forecast.len() != cfg.horizon {
        return Err(Error::InvalidParameters(format!(
            "forecast has {} entries, horizon is {}",
            forecast.len(),
            cfg.horizon
        )));
    }
    let op = OperatingPoint {
        x,
        u: cs.u_bar,
        w: cs.w_bar(),
    };
    let lm = linearize_at(&op, sp)?;
    let w_tilde: Vec<f64> = forecast
        .iter()
        .flat_map(|w| [w.w_r - op.w.w_r, w.w_e - op.w.w_e])
        .collect();
    let cost = HorizonCost {
        lambda: cfg.lambda,
        a2: sp.plant.a2,
        x2_offset: sp.plant.x2_target() - x.x2,
        u_bar: cs.u_bar,
    };
    let ch = condense(&lm, cfg.horizon, Vector2::zeros(), &w_tilde, &cost)?;
    let sol = solve_mpc_qp(&ch)?;
    let u = sol.controls[0];

    let mut next = cs.clone();
    next.u_bar = u;
    next.op = op;
    next.op.x = x;
    next.observe(forecast[0]);
    Ok((u, next))
}

/// Pump at fraction `v` while the soil is below target and the pump has suction head.
pub fn onoff_step(x: State, v: f64, p: &PlantParams) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "on/off level must be positive, got {v}"
        )));
    }
    let wants_water = x.x2 < p.x2_target();
    let can_pump = x.x1 >= p.x1_pump_threshold();
    Ok(if wants_water && can_pump {
        v.min(1.0)
    } else {
        0.0
    })
}

/// Tabled DP action at the node nearest to `x`.
pub fn dp_step(
    t: usize,
    x: State,
    policy: &PolicyTable,
    grid: &Grid,
    actions: &[f64],
) -> Result<f64> {
    let row = policy.actions.get(t).ok_or(Error::InvalidHorizon(t))?;
    let node = grid.nearest(x)?;
    let a = row[node];
    actions
        .get(a)
        .copied()
        .ok_or_else(|| Error::InvalidParameters(format!("action index {a} out of range")))
}
