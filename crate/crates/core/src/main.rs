use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stormdp::config::{parse_grid_shape, RunConfig};
use stormdp::error::Result;
use stormdp::riskdp::Projection;
use stormdp::sim::{
    cumulative_deviation, initial_state, load_weather_csv, run_scenario, synth_storm,
    write_compare_csv, CompareGrid, ControllerSpec, DpPolicy, PlantMdp, Scenario, StormSpec,
    WeatherSeries, FAST_STEPS, FAST_TAU,
};

#[derive(Parser)]
#[command(
    name = "stormdp",
    version,
    about = "Cistern and green-roof irrigation control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write its trace as CSV.
    Simulate(SimulateArgs),
    /// Risk-averse dynamic programming on the discretized plant.
    Dp {
        #[command(subcommand)]
        command: DpCommand,
    },
    /// Run the scenario × controller grid and write a comparison table.
    Compare(CompareArgs),
    /// Validate a config file and/or a weather file.
    Lint(LintArgs),
}

#[derive(Subcommand)]
enum DpCommand {
    /// Solve the finite-horizon problem and dump value and policy tables.
    Solve(DpSolveArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weather CSV with header t_s,w_r_mps,w_e_m3ps.
    #[arg(long, conflicts_with = "preset")]
    weather: Option<PathBuf>,
    /// Built-in synthetic storm.
    #[arg(long, default_value = "wet-12h")]
    preset: String,
    /// One-minute steps over twelve hours.
    #[arg(long)]
    fast: bool,
    /// Number of simulation steps (default: twelve hours).
    #[arg(long)]
    steps: Option<usize>,
    /// Recorded in every output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smoothing scale ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = ControllerKind::Mpc)]
    controller: ControllerKind,
    /// Initial state: low-low, high-low or high-high.
    #[arg(long, default_value = "low-low")]
    scenario: String,
    /// On/off pumping level.
    #[arg(long, default_value_t = 0.5)]
    v: f64,
    /// MPC control weight λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// MPC look-ahead M.
    #[arg(long)]
    horizon: Option<usize>,
    /// Risk parameter θ < 0 for the DP controller.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// MPC look-ahead M.
    #[arg(long)]
    horizon: Option<usize>,
    /// Risk parameter θ < 0 for the DP controller.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Add a wall-clock runtime column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DpSolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Grid shape, e.g. 41x41.
    #[arg(long)]
    grid: Option<String>,
    /// Number of evenly spaced actions in [0, 1].
    #[arg(long)]
    actions: Option<usize>,
    /// DP horizon N.
    #[arg(long)]
    horizon: Option<usize>,
    /// Disturbance atoms fitted from the weather.
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long, value_enum)]
    projection: Option<ProjectionArg>,
    /// Dump every stage instead of stage 0 only.
    #[arg(long)]
    all_stages: bool,
}

#[derive(Args)]
struct LintArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    weather: Option<PathBuf>,
    /// Time step used to resample the weather file.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerKind {
    Mpc,
    Onoff,
    Dp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Nearest,
    Multilinear,
}

struct Prepared {
    config: RunConfig,
    weather: Arc<WeatherSeries>,
    steps: usize,
}

impl Common {
    fn prepare(&self, edit: impl FnOnce(&mut RunConfig) -> Result<()>) -> Result<Prepared> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(eps) = self.epsilon {
            config.epsilon = eps;
        }
        if self.fast {
            config.plant.tau = FAST_TAU;
        }
        edit(&mut config)?;
        config.validate()?;
        let steps = match (self.steps, self.fast) {
            (Some(n), _) => n,
            (None, true) => FAST_STEPS,
            (None, false) => (12.0 * 3600.0 / config.plant.tau).round() as usize,
        };
        let weather = match &self.weather {
            Some(path) => load_weather_csv(path, config.plant.tau)?,
            None => synth_storm(&StormSpec::preset(&self.preset)?, config.plant.tau)?,
        };
        Ok(Prepared {
            config,
            weather: Arc::new(weather),
            steps,
        })
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let prep = args.common.prepare(|c| {
        if let Some(l) = args.lambda {
            c.mpc.lambda = l;
        }
        if let Some(m) = args.horizon {
            c.mpc.horizon = m;
        }
        if let Some(t) = args.theta {
            c.dp.theta = t;
        }
        Ok(())
    })?;
    let cfg = prep.config;
    let controller = match args.controller {
        ControllerKind::Mpc => ControllerSpec::Mpc(cfg.mpc),
        ControllerKind::Onoff => ControllerSpec::OnOff { v: args.v },
        ControllerKind::Dp => {
            let samples: Vec<_> = prep.weather.disturbances().take(prep.steps).collect();
            ControllerSpec::Dp(Arc::new(DpPolicy::solve(&cfg, &samples, cfg.dp.theta)?))
        }
    };
    let sc = Scenario {
        name: args.scenario.clone(),
        x0: initial_state(&args.scenario, &cfg.plant)?,
        n_steps: prep.steps,
        controller,
        config: cfg,
        weather: prep.weather,
    };
    let trace = run_scenario(&sc)?;
    trace.write_csv(args.common.writer()?)?;
    let audit = trace.audit();
    let summary = serde_json::json!({
        "scenario": sc.name,
        "controller": sc.controller.kind(),
        "params": sc.controller.params(),
        "seed": args.common.seed,
        "steps": trace.n_steps(),
        "cumulative_deviation": cumulative_deviation(&trace, cfg.plant.x2_target()),
        "sum_u2": trace.sum_u2(),
        "clamped_steps": audit.clamped_steps,
    });
    eprintln!("{summary}");
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let prep = args.common.prepare(|c| {
        if let Some(m) = args.horizon {
            c.mpc.horizon = m;
        }
        if let Some(t) = args.theta {
            c.dp.theta = t;
        }
        Ok(())
    })?;
    let grid = CompareGrid::standard(prep.config, prep.weather, prep.steps, args.common.seed)?;
    let rows = grid.run();
    write_compare_csv(&rows, args.common.writer()?, args.timing)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", rows.len());
    }
    Ok(())
}

fn dp_solve(args: &DpSolveArgs) -> Result<()> {
    let prep = args.common.prepare(|c| {
        if let Some(t) = args.theta {
            c.dp.theta = t;
        }
        if let Some(g) = &args.grid {
            c.dp.grid = parse_grid_shape(g)?;
        }
        if let Some(a) = args.actions {
            c.dp.actions = a;
        }
        if let Some(n) = args.horizon {
            c.dp.horizon = n;
        }
        if let Some(k) = args.atoms {
            c.dp.atoms = k;
        }
        if let Some(p) = args.projection {
            c.dp.projection = match p {
                ProjectionArg::Nearest => Projection::Nearest,
                ProjectionArg::Multilinear => Projection::Multilinear,
            };
        }
        Ok(())
    })?;
    let cfg = prep.config;
    let samples: Vec<_> = prep.weather.disturbances().take(prep.steps).collect();
    let pm = PlantMdp::build(&cfg, &samples)?;
    let (values, policy) = pm.solve(cfg.dp.horizon, cfg.dp.theta)?;

    let mut w = csv::Writer::from_writer(args.common.writer()?);
    w.write_record(["t", "node", "x1", "x2", "V", "mu", "u", "theta", "seed"])?;
    let last = if args.all_stages { cfg.dp.horizon } else { 0 };
    for t in 0..=last {
        for node in 0..pm.grid.len() {
            let x = pm.grid.node(node);
            let (mu, u) = match policy.actions.get(t) {
                Some(row) => (row[node].to_string(), pm.actions[row[node]].to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                t.to_string(),
                node.to_string(),
                x.x1.to_string(),
                x.x2.to_string(),
                values.values[t][node].to_string(),
                mu,
                u,
                cfg.dp.theta.to_string(),
                args.common.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn lint(args: &LintArgs) -> Result<()> {
    let tau = match &args.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            println!("config {}: ok", path.display());
            cfg.plant.tau
        }
        None => args.tau,
    };
    if let Some(path) = &args.weather {
        let series = load_weather_csv(path, tau)?;
        println!(
            "weather {}: ok ({} samples at {} s)",
            path.display(),
            series.len(),
            series.period
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Dp {
            command: DpCommand::Solve(a),
        } => dp_solve(a),
        Command::Compare(a) => compare(a),
        Command::Lint(a) => lint(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
