use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use cavlock::analysis;
use cavlock::config::{DiscretizeMethod, PipelineConfig};
use cavlock::io;
use cavlock::linsys::logspace;
use cavlock::pipeline::{StageOutcome, Stages};
use cavlock::{Result, StateSpace};
use clap::{Parser, Subcommand, ValueEnum};

/// Integral LQG design pipeline for optical cavity locking.
///
/// Exit codes: 0 success, 2 input error, 3 numerical failure,
/// 4 verification failure.
#[derive(Debug, Parser)]
#[command(name = "cavlock", version)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the top-level seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Directory for stage artifacts.
    #[arg(long, global = true, value_name = "PATH", default_value = "out")]
    out_dir: PathBuf,
    /// Log verbosely.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the cavity quadrature model; print its corner and DC gain.
    Cavity,
    /// Identify the plant from frequency-response data.
    Identify {
        /// Frequency data CSV (overrides the config; default: shipped dataset).
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
        /// Model order (overrides the config).
        #[arg(long)]
        order: Option<usize>,
    },
    /// Synthesize the integral LQG controller for the identified plant.
    Design,
    /// Frequency-weighted reduction of the controller.
    Reduce {
        /// Target order (overrides the config).
        #[arg(long)]
        order: Option<usize>,
    },
    /// Loop Bode data and stability margins of the pipeline loop, or of a
    /// loop given as a transfer function with --num/--den.
    Analyze {
        /// Loop numerator coefficients, descending powers of s.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "den")]
        num: Option<Vec<f64>>,
        /// Loop denominator coefficients, descending powers of s.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "num")]
        den: Option<Vec<f64>>,
    },
    /// Sample the reduced controller.
    Discretize {
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Closed-loop step-disturbance simulation with the sampled controller.
    Simulate,
    /// Whole-pipeline commands.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
}

#[derive(Debug, Subcommand)]
enum PipelineAction {
    /// Run every stage in order and print a PASS/FAIL summary.
    Run,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Zoh,
    Tustin,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_outcome(o: &StageOutcome) {
    for line in &o.summary {
        println!("[{}] {}", o.stage, line);
    }
    for c in &o.checks {
        println!("[{}] {} {}: {}", o.stage, if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn textbook_loop(stages: &Stages, num: &[f64], den: &[f64]) -> Result<StageOutcome> {
    let l = StateSpace::from_transfer_function(num, den)?;
    let m = analysis::margins(&l)?;
    let lo = l.poles()?.iter().map(|p| p.norm()).filter(|&w| w > 1e-9).fold(1.0, f64::min) * 1e-3;
    let hi = l.poles()?.iter().map(|p| p.norm()).fold(1.0, f64::max) * 1e3;
    let bode = analysis::bode(&l, &logspace(lo / (2.0 * std::f64::consts::PI), hi / (2.0 * std::f64::consts::PI), 600))?;
    std::fs::create_dir_all(&stages.out_dir)?;
    io::write_text(&stages.out_dir.join("loop_tf_bode.csv"), &io::bode_to_csv(&bode)?)?;
    io::write_json(&stages.out_dir.join("loop_tf_margins.json"), &m)?;
    let show = |v: f64, unit: &str| if v.is_finite() { format!("{v:.4} {unit}") } else { "inf".into() };
    let rad = |f: Option<f64>| f.map_or("-".to_string(), |f| format!("{:.6} rad/s", 2.0 * std::f64::consts::PI * f));
    let mut o = StageOutcome { stage: "analyze".into(), checks: Vec::new(), summary: Vec::new() };
    o.summary.push(format!("gain margin {} at {}", show(m.gain_margin_db, "dB"), rad(m.phase_crossover_hz)));
    o.summary.push(format!("phase margin {} at {}", show(m.phase_margin_deg, "deg"), rad(m.gain_crossover_hz)));
    Ok(o)
}

fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = load_config(cli)?;
    let name = match &cli.command {
        Command::Cavity => "cavity",
        Command::Identify { data, order } => {
            if let Some(d) = data {
                cfg.paths.frequency_data = Some(d.clone());
            }
            if let Some(n) = order {
                cfg.sysid.model_order = *n;
            }
            "identify"
        }
        Command::Design => "design",
        Command::Reduce { order } => {
            if let Some(k) = order {
                cfg.reduction.target_order = *k;
            }
            "reduce"
        }
        Command::Analyze { .. } => "analyze",
        Command::Discretize { method } => {
            match method {
                Some(Method::Zoh) => cfg.discretize.method = DiscretizeMethod::Zoh,
                Some(Method::Tustin) => cfg.discretize.method = DiscretizeMethod::Tustin,
                None => {}
            }
            "discretize"
        }
        Command::Simulate => "simulate",
        Command::Pipeline { action: PipelineAction::Run } => "pipeline run",
    };
    cfg.validate()?;
    let stages = Stages::new(cfg, &cli.out_dir);
    let (started, clock) = (SystemTime::now(), Instant::now());
    let outcomes = match &cli.command {
        Command::Cavity => vec![stages.cavity()?],
        Command::Identify { .. } => vec![stages.identify()?],
        Command::Design => vec![stages.design()?],
        Command::Reduce { .. } => vec![stages.reduce()?],
        Command::Analyze { num: Some(num), den: Some(den) } => vec![textbook_loop(&stages, num, den)?],
        Command::Analyze { .. } => vec![stages.analyze()?],
        Command::Discretize { .. } => vec![stages.discretize()?],
        Command::Simulate => vec![stages.simulate()?],
        Command::Pipeline { .. } => stages.run_all()?.stages,
    };
    stages.write_metadata(name, started, clock.elapsed())?;
    for o in &outcomes {
        print_outcome(o);
    }
    let pass = outcomes.iter().all(StageOutcome::passed);
    if matches!(cli.command, Command::Pipeline { .. }) {
        println!("{}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
