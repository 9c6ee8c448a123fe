//! Weather inputs, closed-loop simulation and controller comparison.

mod compare;
mod scenario;
mod storm;
mod weather;

pub use compare::{
    write_compare_csv, CellMetrics, CompareGrid, CompareRow, DEFAULT_LAMBDAS, DEFAULT_ONOFF_LEVELS,
};
pub use scenario::{
    cumulative_deviation, initial_state, run_scenario, ConservationAudit, ControllerSpec, DpPolicy,
    PlantMdp, Scenario, Trace, SCENARIO_NAMES, TRACE_HEADER,
};
pub use storm::{synth_storm, Pulse, StormSpec};
pub use weather::{load_weather_csv, parse_weather_csv, WeatherSeries, WEATHER_HEADER};

/// Fast preset: one-minute steps over twelve hours.
pub const FAST_TAU: f64 = 60.0;
pub const FAST_STEPS: usize = 720;
/// Twelve hours at the reference one-second step.
pub const DEFAULT_STEPS: usize = 43_200;
