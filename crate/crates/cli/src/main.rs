//! `vss` command line: run the simulated vehicle stack or check a trace.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use vss_core::launcher::{replay_file, ClockMode, LaunchConfig, LaunchError, Scenario, System};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "vss",
    version,
    about = "Vehicle summoning stack on a simulated drive-by-wire vehicle"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Launch the node graph, optionally running a scenario.
    Run(RunArgs),
    /// Verify a recorded trace.
    Replay { trace: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON launch configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON scenario; overrides the one named in the config.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_clock)]
    clock: Option<ClockMode>,
    /// HTTP port; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,
    /// Write the bus trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stop after this many simulated seconds (required in logical mode
    /// without a scenario).
    #[arg(long)]
    duration: Option<f64>,
    /// Do not start the HTTP service.
    #[arg(long)]
    no_http: bool,
}

fn parse_clock(s: &str) -> Result<ClockMode, String> {
    s.parse()
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn build_config(args: &RunArgs) -> Result<(LaunchConfig, Option<Scenario>), LaunchError> {
    let mut cfg = match &args.config {
        Some(p) => LaunchConfig::load(p)?,
        None => LaunchConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(c) = args.clock {
        cfg.clock = c;
    }
    if let Some(p) = args.port {
        cfg.http.port = p;
    }
    if args.no_http {
        cfg.http.enabled = false;
    }
    if let Some(t) = &args.trace {
        cfg.trace = Some(t.clone());
    }
    if let Some(s) = &args.scenario {
        cfg.scenario = Some(s.clone());
    }
    if let Some(d) = args.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(LaunchError::Config(format!(
                "--duration must be positive, got {d}"
            )));
        }
    }
    cfg.validate()?;
    let scenario = cfg.scenario.as_deref().map(Scenario::load).transpose()?;
    if scenario.is_none() && cfg.clock == ClockMode::Logical && args.duration.is_none() {
        return Err(LaunchError::Config(
            "logical clock without a scenario needs --duration".into(),
        ));
    }
    Ok((cfg, scenario))
}

fn run(args: RunArgs) -> ExitCode {
    let (cfg, scenario) = match build_config(&args) {
        Ok(v) => v,
        Err(e) => return config_error(e),
    };
    let mut sys = match System::launch(&cfg, scenario.as_ref()) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if let Some(addr) = sys.http_addr() {
        println!("listening on http://{addr}");
    }
    tracing::info!(seed = sys.seed(), clock = ?cfg.clock, "launched");

    let outcome = match (&scenario, cfg.clock) {
        (Some(s), _) => sys.run_scenario(s).map(Some),
        (None, ClockMode::Logical) => sys
            .run_until(args.duration.unwrap_or_default())
            .and_then(|_| sys.flush())
            .map(|_| None),
        (None, ClockMode::Wall) => sys
            .run_wall(args.duration)
            .and_then(|_| sys.flush())
            .map(|_| None),
    };
    match outcome {
        Ok(Some(report)) => {
            println!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Ok(None) => {
            println!(
                "ran {} ticks, {:.2} s simulated",
                sys.ticks(),
                sys.now() - sys.dt()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn replay(trace: PathBuf) -> ExitCode {
    match replay_file(&trace) {
        Ok(report) => {
            print!("{report}");
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Err(e) => config_error(e),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Run(args) => run(args),
        Cmd::Replay { trace } => replay(trace),
    }
}
