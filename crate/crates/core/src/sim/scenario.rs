use std::io::{Read, Write};
use std::sync::Arc;

use crate::config::RunConfig;
use crate::control::{dp_step, mpc_step, onoff_step, ControllerState, MpcConfig};
use crate::error::{Error, Result};
use crate::model::{Disturbance, PlantParams, State};
use crate::riskdp::{
    solve, uniform_actions, CostSpec, Criterion, DisturbanceModel, FiniteMdp, Grid, PolicyTable,
    ValueTable,
};

use super::weather::WeatherSeries;

/// Named initial states: `low`/`high` scale the reference level by `1/1.3` or `1.3`.
pub const SCENARIO_NAMES: [&str; 3] = ["low-low", "high-low", "high-high"];

pub fn initial_state(name: &str, p: &PlantParams) -> Result<State> {
    let x1_ref = p.a1 * p.z_o;
    let x2_ref = p.x2_target();
    let (x1, x2) = match name {
        "low-low" => (x1_ref / 1.3, x2_ref / 1.3),
        "high-low" => (x1_ref * 1.3, x2_ref / 1.3),
        "high-high" => (x1_ref * 1.3, x2_ref * 1.3),
        _ => {
            return Err(Error::InvalidParameters(format!(
                "unknown scenario `{name}`, expected one of {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    Ok(State::new(x1, x2))
}

/// Discretized plant ready for the risk-averse solver.
#[derive(Debug, Clone)]
pub struct PlantMdp {
    pub grid: Grid,
    pub actions: Vec<f64>,
    pub disturbances: DisturbanceModel,
    pub mdp: FiniteMdp,
}

impl PlantMdp {
    /// Atoms are fitted from `samples`; stage costs reuse the MPC weight.
    pub fn build(cfg: &RunConfig, samples: &[Disturbance]) -> Result<Self> {
        let grid = Grid::uniform(cfg.dp.grid[0], cfg.dp.grid[1], &cfg.plant)?;
        let actions = uniform_actions(cfg.dp.actions);
        let disturbances = DisturbanceModel::fit_quantiles(samples, cfg.dp.atoms)?;
        let cost = CostSpec::new(cfg.mpc.lambda, &cfg.plant);
        let mdp = FiniteMdp::from_plant(
            &cfg.plant,
            &grid,
            &actions,
            &disturbances,
            &cost,
            cfg.dp.projection,
        )?;
        Ok(PlantMdp {
            grid,
            actions,
            disturbances,
            mdp,
        })
    }

    pub fn solve(&self, horizon: usize, theta: f64) -> Result<(ValueTable, PolicyTable)> {
        solve(&self.mdp, horizon, Criterion::entropic(theta)?)
    }
}

/// Stationary feedback taken from the first stage of a finite-horizon solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPolicy {
    pub theta: f64,
    pub grid: Grid,
    pub actions: Vec<f64>,
    pub policy: PolicyTable,
}

impl DpPolicy {
    pub fn solve(cfg: &RunConfig, samples: &[Disturbance], theta: f64) -> Result<Self> {
        let pm = PlantMdp::build(cfg, samples)?;
        let (_, mut policy) = pm.solve(cfg.dp.horizon, theta)?;
        policy.actions.truncate(1);
        Ok(DpPolicy {
            theta,
            grid: pm.grid,
            actions: pm.actions,
            policy,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ControllerSpec {
    Mpc(MpcConfig),
    OnOff { v: f64 },
    Dp(Arc<DpPolicy>),
}

impl ControllerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllerSpec::Mpc(_) => "mpc",
            ControllerSpec::OnOff { .. } => "onoff",
            ControllerSpec::Dp(_) => "dp",
        }
    }

    pub fn params(&self) -> String {
        match self {
            ControllerSpec::Mpc(c) => format!("lambda={};M={}", c.lambda, c.horizon),
            ControllerSpec::OnOff { v } => format!("v={v}"),
            ControllerSpec::Dp(d) => format!("theta={}", d.theta),
        }
    }

    fn lookahead(&self) -> usize {
        match self {
            ControllerSpec::Mpc(c) => c.horizon,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub x0: State,
    pub n_steps: usize,
    pub controller: ControllerSpec,
    pub config: RunConfig,
    pub weather: Arc<WeatherSeries>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let p = &self.config.plant;
        if !p.contains(self.x0) {
            return Err(Error::OutOfBox {
                x1: self.x0.x1,
                x2: self.x0.x2,
            });
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        if (self.weather.period - p.tau).abs() > 1e-9 * p.tau {
            return Err(Error::Weather(format!(
                "weather period {} differs from the time step {}",
                self.weather.period, p.tau
            )));
        }
        let needed = self.n_steps + self.controller.lookahead();
        if self.weather.len() < needed {
            return Err(Error::Weather(format!(
                "series has {} samples, need {needed}",
                self.weather.len()
            )));
        }
        Ok(())
    }
}

/// Closed-loop record: `N+1` states and costs, `N` controls, disturbances, rates and clamp corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub tau: f64,
    pub states: Vec<State>,
    pub controls: Vec<f64>,
    pub disturbances: Vec<Disturbance>,
    /// Stage costs, then the terminal cost.
    pub costs: Vec<f64>,
    pub rates: Vec<[f64; 2]>,
    pub clamp_corrections: Vec<[f64; 2]>,
}

pub const TRACE_HEADER: [&str; 11] = [
    "t", "x1", "x2", "u", "w_r", "w_e", "cost", "f1", "f2", "clamp1", "clamp2",
];

/// Volume balance of a trace: `x(N) − x(0) − Σ(τ·f + clamp)` per tank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationAudit {
    pub residual: [f64; 2],
    /// Sum of absolute increments, for relative comparisons.
    pub scale: [f64; 2],
    pub clamped_steps: usize,
}

impl Trace {
    pub fn n_steps(&self) -> usize {
        self.controls.len()
    }

    pub fn sum_u2(&self) -> f64 {
        self.controls.iter().map(|u| u * u).sum()
    }

    pub fn audit(&self) -> ConservationAudit {
        let mut residual = [0.0; 2];
        let mut scale = [0.0; 2];
        let first = self.states[0];
        let last = self.states[self.states.len() - 1];
        residual[0] = last.x1 - first.x1;
        residual[1] = last.x2 - first.x2;
        for (f, c) in self.rates.iter().zip(&self.clamp_corrections) {
            for i in 0..2 {
                let inc = self.tau * f[i] + c[i];
                residual[i] -= inc;
                scale[i] += self.tau * f[i].abs() + c[i].abs();
            }
        }
        ConservationAudit {
            residual,
            scale,
            clamped_steps: self
                .clamp_corrections
                .iter()
                .filter(|c| c[0] != 0.0 || c[1] != 0.0)
                .count(),
        }
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        let n = self.n_steps();
        for k in 0..=n {
            let x = self.states[k];
            let t = k as f64 * self.tau;
            let mut row = vec![t.to_string(), x.x1.to_string(), x.x2.to_string()];
            if k < n {
                let d = self.disturbances[k];
                row.extend([
                    self.controls[k].to_string(),
                    d.w_r.to_string(),
                    d.w_e.to_string(),
                ]);
            } else {
                row.extend([String::new(), String::new(), String::new()]);
            }
            row.push(self.costs[k].to_string());
            if k < n {
                let (f, c) = (self.rates[k], self.clamp_corrections[k]);
                row.extend([f[0], f[1], c[0], c[1]].map(|v| v.to_string()));
            } else {
                row.extend(std::iter::repeat_n(String::new(), 4));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        if rdr.headers()?.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(Error::InvalidParameters("unexpected trace header".into()));
        }
        let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
        if records.len() < 2 {
            return Err(Error::InvalidParameters(
                "trace needs at least two rows".into(),
            ));
        }
        let num = |r: &csv::StringRecord, i: usize, line: usize| -> Result<f64> {
            r[i].parse::<f64>().map_err(|_| {
                Error::InvalidParameters(format!("trace line {line}: bad value `{}`", &r[i]))
            })
        };
        let n = records.len() - 1;
        let mut trace = Trace {
            tau: num(&records[1], 0, 3)?,
            states: Vec::with_capacity(n + 1),
            controls: Vec::with_capacity(n),
            disturbances: Vec::with_capacity(n),
            costs: Vec::with_capacity(n + 1),
            rates: Vec::with_capacity(n),
            clamp_corrections: Vec::with_capacity(n),
        };
        for (k, r) in records.iter().enumerate() {
            let line = k + 2;
            trace
                .states
                .push(State::new(num(r, 1, line)?, num(r, 2, line)?));
            trace.costs.push(num(r, 6, line)?);
            if k < n {
                trace.controls.push(num(r, 3, line)?);
                trace
                    .disturbances
                    .push(Disturbance::new(num(r, 4, line)?, num(r, 5, line)?));
                trace.rates.push([num(r, 7, line)?, num(r, 8, line)?]);
                trace
                    .clamp_corrections
                    .push([num(r, 9, line)?, num(r, 10, line)?]);
            }
        }
        Ok(trace)
    }
}

/// `Σ_k |x_{k,2} − x₂*|` over all recorded states.
pub fn cumulative_deviation(trace: &Trace, x2_target: f64) -> f64 {
    trace.states.iter().map(|x| (x.x2 - x2_target).abs()).sum()
}

/// Closed loop: controller, clamp to `[0, 1]`, exact plant step.
pub fn run_scenario(sc: &Scenario) -> Result<Trace> {
    sc.validate()?;
    let p = sc.config.plant;
    let sp = sc.config.smooth();
    let cost = CostSpec::new(sc.config.mpc.lambda, &p);
    let n = sc.n_steps;
    let mut trace = Trace {
        tau: p.tau,
        states: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n),
        disturbances: Vec::with_capacity(n),
        costs: Vec::with_capacity(n + 1),
        rates: Vec::with_capacity(n),
        clamp_corrections: Vec::with_capacity(n),
    };
    let mut mpc_state = match &sc.controller {
        ControllerSpec::Mpc(c) => Some(ControllerState::new(sc.x0, c.horizon)),
        _ => None,
    };
    let mut x = sc.x0;
    trace.states.push(x);
    for k in 0..n {
        let w = sc.weather.at(k);
        let raw = match &sc.controller {
            ControllerSpec::Mpc(cfg) => {
                let cs = mpc_state.as_ref().expect("mpc state exists for mpc runs");
                let forecast = sc.weather.window(k, cfg.horizon)?;
                let (u, next) =
                    mpc_step(k, x, &forecast, cs, cfg, &sp).map_err(|e| e.at_step(k))?;
                mpc_state = Some(next);
                u
            }
            ControllerSpec::OnOff { v } => onoff_step(x, *v, &p).map_err(|e| e.at_step(k))?,
            ControllerSpec::Dp(d) => {
                dp_step(0, x, &d.policy, &d.grid, &d.actions).map_err(|e| e.at_step(k))?
            }
        };
        let u = raw.clamp(0.0, 1.0);
        let out = p.step_detailed(x, u, w).map_err(|e| e.at_step(k))?;
        trace.controls.push(u);
        trace.disturbances.push(w);
        trace.costs.push(cost.stage(x, u));
        trace.rates.push(out.rate);
        trace.clamp_corrections.push(out.clamp_correction);
        x = out.state;
        trace.states.push(x);
    }
    trace.costs.push(cost.terminal(x));
    Ok(trace)
}
