use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::control::MpcConfig;
use crate::error::Result;
use crate::model::State;

use super::scenario::{
    cumulative_deviation, initial_state, run_scenario, ControllerSpec, DpPolicy, Scenario,
    SCENARIO_NAMES,
};
use super::weather::WeatherSeries;

pub const DEFAULT_LAMBDAS: [f64; 3] = [1e-5, 1e-3, 1e-1];
pub const DEFAULT_ONOFF_LEVELS: [f64; 5] = [0.2, 0.5, 1.0, 1.5, 2.0];

/// Scenarios × controllers sharing one weather series and horizon.
#[derive(Debug, Clone)]
pub struct CompareGrid {
    pub scenarios: Vec<(String, State)>,
    pub controllers: Vec<ControllerSpec>,
    pub n_steps: usize,
    pub config: RunConfig,
    pub weather: Arc<WeatherSeries>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scenario: String,
    pub controller: &'static str,
    pub params: String,
    pub seed: u64,
    /// `Err` carries the failure message; remaining cells still run.
    pub outcome: std::result::Result<CellMetrics, String>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub cumulative_deviation: f64,
    pub sum_u2: f64,
    pub max_u: f64,
}

impl CompareGrid {
    /// The three reference starts against MPC, on/off and one DP controller.
    pub fn standard(
        config: RunConfig,
        weather: Arc<WeatherSeries>,
        n_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        let scenarios = SCENARIO_NAMES
            .iter()
            .map(|&name| Ok((name.to_string(), initial_state(name, &config.plant)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut controllers: Vec<ControllerSpec> = DEFAULT_LAMBDAS
            .iter()
            .map(|&lambda| {
                ControllerSpec::Mpc(MpcConfig {
                    lambda,
                    horizon: config.mpc.horizon,
                })
            })
            .collect();
        controllers.extend(
            DEFAULT_ONOFF_LEVELS
                .iter()
                .map(|&v| ControllerSpec::OnOff { v }),
        );
        let samples: Vec<_> = weather.disturbances().take(n_steps).collect();
        let dp = DpPolicy::solve(&config, &samples, config.dp.theta)?;
        controllers.push(ControllerSpec::Dp(Arc::new(dp)));
        Ok(CompareGrid {
            scenarios,
            controllers,
            n_steps,
            config,
            weather,
            seed,
        })
    }

    /// Run every cell in parallel; rows come back in scenario-major order.
    pub fn run(&self) -> Vec<CompareRow> {
        let cells: Vec<(&(String, State), &ControllerSpec)> = self
            .scenarios
            .iter()
            .flat_map(|s| self.controllers.iter().map(move |c| (s, c)))
            .collect();
        cells
            .into_par_iter()
            .map(|((name, x0), controller)| {
                let start = Instant::now();
                let sc = Scenario {
                    name: name.clone(),
                    x0: *x0,
                    n_steps: self.n_steps,
                    controller: controller.clone(),
                    config: self.config,
                    weather: Arc::clone(&self.weather),
                };
                let target = self.config.plant.x2_target();
                let outcome = run_scenario(&sc)
                    .map(|t| CellMetrics {
                        cumulative_deviation: cumulative_deviation(&t, target),
                        sum_u2: t.sum_u2(),
                        max_u: t.controls.iter().copied().fold(0.0, f64::max),
                    })
                    .map_err(|e| e.to_string());
                CompareRow {
                    scenario: name.clone(),
                    controller: controller.kind(),
                    params: controller.params(),
                    seed: self.seed,
                    outcome,
                    runtime_s: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    }
}

/// Comparison table as CSV. Wall-clock runtime is emitted only with `timing`,
/// so the default output is reproducible byte for byte.
pub fn write_compare_csv(rows: &[CompareRow], writer: impl Write, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "scenario",
        "controller",
        "params",
        "seed",
        "cumulative_deviation",
        "sum_u2",
        "max_u",
        "status",
    ];
    if timing {
        header.push("runtime_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.scenario.clone(),
            r.controller.to_string(),
            r.params.clone(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(m) => rec.extend([
                m.cumulative_deviation.to_string(),
                m.sum_u2.to_string(),
                m.max_u.to_string(),
                "ok".to_string(),
            ]),
            Err(msg) => rec.extend([
                String::new(),
                String::new(),
                String::new(),
                format!("failed: {msg}"),
            ]),
        }
        if timing {
            rec.push(format!("{:.6}", r.runtime_s));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Disturbance;

    fn grid(controllers: Vec<ControllerSpec>, x0: State) -> CompareGrid {
        CompareGrid {
            scenarios: vec![("custom".into(), x0)],
            controllers,
            n_steps: 50,
            config: RunConfig::default(),
            weather: Arc::new(
                WeatherSeries::constant(Disturbance::new(0.0, 4e-5), 1.0, 100).unwrap(),
            ),
            seed: 7,
        }
    }

    #[test]
    fn single_cell_single_row() {
        let g = grid(
            vec![ControllerSpec::OnOff { v: 0.5 }],
            State::new(100.0, 1.0),
        );
        let rows = g.run();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].outcome.is_ok());
        let mut buf = Vec::new();
        write_compare_csv(&rows, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("custom,onoff,v=0.5,7,"));
    }

    #[test]
    fn failures_are_marked_and_others_continue() {
        let g = grid(
            vec![
                ControllerSpec::OnOff { v: -1.0 },
                ControllerSpec::OnOff { v: 1.0 },
            ],
            State::new(100.0, 1.0),
        );
        let rows = g.run();
        assert!(rows[0].outcome.is_err());
        assert!(rows[1].outcome.is_ok());
        let mut buf = Vec::new();
        write_compare_csv(&rows, &mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("failed: at step 0"));
        assert!(text.lines().next().unwrap().ends_with("runtime_s"));
    }
}
