use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use brachiation::checks::invariant_suite;
use brachiation::config::{ControllerChoice, RunConfig, CONFIG_KEYS};
use brachiation::sim::{
    compute_metrics, monte_carlo, run_continuous, run_swing, Aggregate, Disturbance, EpisodeLog,
    Metrics, NodeDump, PlantKind,
};
use brachiation::Error;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_GRAB: u8 = 2;
const EXIT_SINGULAR: u8 = 3;

/// Two-link brachiating robot on a flexible cable: single swings, Monte
/// Carlo batches and continuous brachiation.
#[derive(Parser)]
#[command(name = "brachiation-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One swing per selected controller.
    Swing(RunArgs),
    /// Batch of single swings from random initial joint angles.
    MonteCarlo(MonteCarloArgs),
    /// Consecutive swings with braked pauses and gripper swaps.
    Continuous(RunArgs),
    /// Oracle and invariant checks of the model.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// spring-damper | full-cable
    #[arg(long, value_parser = parse_plant)]
    plant: Option<PlantKind>,
    /// adaptive-robust | feedback-linearization | both
    #[arg(long, value_parser = parse_controller)]
    controller: Option<ControllerChoice>,
    /// Initial state "theta1,theta2,z_g,dtheta1,dtheta2,dz_g" in deg, deg, m, deg/s, deg/s, m/s.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_ic)]
    ic: Option<[f64; 6]>,
    /// Disturbance "A,f": amplitude (N) and frequency (Hz).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_disturbance)]
    disturbance: Option<Disturbance>,
    #[arg(long)]
    swings: Option<usize>,
    /// Actuator limit (N m).
    #[arg(long)]
    torque_limit: Option<f64>,
    /// Log rate (Hz).
    #[arg(long)]
    log_rate: Option<f64>,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of initial conditions.
    #[arg(short = 'n')]
    n: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random states per check.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_plant(s: &str) -> Result<PlantKind, String> {
    match s {
        "spring-damper" => Ok(PlantKind::SpringDamper),
        "full-cable" => Ok(PlantKind::FullCable),
        _ => Err("expected spring-damper or full-cable".into()),
    }
}

fn parse_controller(s: &str) -> Result<ControllerChoice, String> {
    match s {
        "adaptive-robust" => Ok(ControllerChoice::AdaptiveRobust),
        "feedback-linearization" => Ok(ControllerChoice::FeedbackLinearization),
        "both" => Ok(ControllerChoice::Both),
        _ => Err("expected adaptive-robust, feedback-linearization or both".into()),
    }
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", x.trim())))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated values, got {}", v.len()))
}

fn parse_ic(s: &str) -> Result<[f64; 6], String> {
    parse_list::<6>(s)
}

fn parse_disturbance(s: &str) -> Result<Disturbance, String> {
    let [amplitude, frequency] = parse_list::<2>(s)?;
    Ok(Disturbance { amplitude, frequency })
}

fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML sections.keys, units):\n");
    for (k, unit) in CONFIG_KEYS {
        s.push_str(&format!("  {k:width$}  {unit}\n"));
    }
    s.push_str("\nExit codes: 0 success, 1 configuration or I/O error, 2 failed grab, 3 singularity abort.\n");
    s.push_str("BRACHIATION_THREADS caps the Monte Carlo worker count.");
    s
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Singular(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        match e.downcast_ref::<Error>() {
            Some(Error::ControlSingularity { .. } | Error::SingularMassMatrix { .. }) => Failure::Singular(e),
            _ => Failure::Config(e),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let run = &mut cfg.run;
    if let Some(v) = &args.out {
        run.out = v.clone();
    }
    if let Some(v) = args.seed {
        run.seed = v;
    }
    if let Some(v) = args.plant {
        run.plant = v;
    }
    if let Some(v) = args.controller {
        run.controller = v;
    }
    if let Some(v) = args.ic {
        run.initial_state = v;
    }
    if let Some(v) = args.swings {
        run.swings = v;
    }
    if let Some(v) = args.log_rate {
        run.log_rate = v;
    }
    if let Some(v) = args.disturbance {
        cfg.disturbance = Some(v);
    }
    if let Some(v) = args.torque_limit {
        cfg.gains.torque_limit = v;
    }
    Ok(cfg)
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn write_log(log: &EpisodeLog, path: &Path) -> anyhow::Result<()> {
    log.write(path)?;
    if !log.nodes.is_empty() {
        NodeDump::write(path.with_file_name(format!("{}_nodes.csv", stem(path))), &log.nodes)?;
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn summary(label: &str, m: &Metrics, log: &EpisodeLog) -> String {
    format!(
        "{label}: {} rmse_y={:.3} deg rmse_ydot={:.3} deg/s rms_u={:.3} N m final_error={:.3} deg",
        if log.aborted {
            "aborted"
        } else if log.success {
            "grab ok"
        } else {
            "grab failed"
        },
        m.rmse_y,
        m.rmse_ydot,
        m.rms_u,
        m.final_y_error
    )
}

fn status(log: &EpisodeLog) -> u8 {
    if log.aborted {
        EXIT_SINGULAR
    } else if !log.success {
        EXIT_GRAB
    } else {
        0
    }
}

fn cmd_swing(args: &RunArgs) -> Outcome {
    let mut cfg = load_config(args)?;
    cfg.run.swings = 1;
    cfg.validate()?;
    let scenarios = cfg
        .run
        .controller
        .kinds()
        .into_iter()
        .map(|k| cfg.scenario(k))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(&cfg.run.out)?;
    let mut code = 0;
    for sc in &scenarios {
        let log = run_swing(sc)?;
        write_log(&log, &cfg.run.out.join(format!("swing_{}.csv", sc.controller.label())))?;
        let m = compute_metrics(&log)?;
        println!("{}", summary(sc.controller.label(), &m, &log));
        code = code.max(status(&log));
    }
    Ok(code)
}

fn cmd_continuous(args: &RunArgs) -> Outcome {
    let cfg = load_config(args)?;
    cfg.validate()?;
    let scenarios = cfg
        .run
        .controller
        .kinds()
        .into_iter()
        .map(|k| cfg.scenario(k))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(&cfg.run.out)?;
    let mut code = 0;
    for sc in &scenarios {
        let label = sc.controller.label();
        let log = run_continuous(sc)?;
        write_log(&log, &cfg.run.out.join(format!("continuous_{label}.csv")))?;
        println!("{label}");
        println!("  swing  rmse_y[deg]  rmse_ydot[deg/s]  rms_u[N m]  grab");
        for (i, m) in log.per_swing.iter().enumerate() {
            let grabbed = i < log.swings_completed;
            println!("  {:>5}  {:>11.3}  {:>16.3}  {:>10.3}  {}", i + 1, m.rmse_y, m.rmse_ydot, m.rms_u, if grabbed { "ok" } else { "failed" });
        }
        println!("  progress {:.3} m over {} of {} swings", log.progress(), log.swings_completed, sc.swings);
        if log.aborted {
            eprintln!("{label}: singularity abort during swing {}", log.swings_completed + 1);
        } else if !log.success {
            eprintln!("{label}: grab failed on swing {}", log.swings_completed + 1);
        }
        code = code.max(status(&log));
    }
    Ok(code)
}

fn thread_cap() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("BRACHIATION_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| anyhow!("BRACHIATION_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        bail!("BRACHIATION_THREADS must be a positive integer, got `{v}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn cmd_monte_carlo(args: &MonteCarloArgs) -> Outcome {
    let mut cfg = load_config(&args.run)?;
    cfg.run.swings = 1;
    if let Some(n) = args.n {
        cfg.monte_carlo.n = n;
    }
    cfg.validate()?;
    thread_cap()?;
    let kinds = cfg.run.controller.kinds();
    let base = cfg.scenario(kinds[0])?;
    let out = &cfg.run.out;
    let result = monte_carlo(&base, &kinds, &cfg.monte_carlo.ranges, cfg.monte_carlo.n, cfg.run.seed)?;
    let runs_dir = out.join("runs");
    create_dir(&runs_dir)?;
    for r in &result.runs {
        if let Some(e) = &r.error {
            eprintln!("run {} {}: {e}", r.index, r.controller.label());
            continue;
        }
        write_log(&r.log, &runs_dir.join(format!("{}_{:03}.csv", r.controller.label(), r.index)))?;
    }
    Aggregate::write_csv(&result.aggregates, out.join("aggregate.csv"))?;
    println!("{:<24} {:>12} {:>13} {:>18} {:>9}", "controller", "RMS_u [N m]", "RMSE_y [deg]", "RMSE_ydot [deg/s]", "success");
    for a in &result.aggregates {
        println!(
            "{:<24} {:>12.3} {:>13.3} {:>18.3} {:>9}",
            a.controller,
            a.rms_u,
            a.rmse_y,
            a.rmse_ydot,
            format!("{}/{}", a.successes, a.runs)
        );
    }
    Ok(if result.runs.iter().any(|r| r.log.aborted) { EXIT_SINGULAR } else { 0 })
}

fn cmd_validate(args: &ValidateArgs) -> Outcome {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    let checks = invariant_suite(&cfg.robot, &cfg.cable, args.samples, args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { EXIT_CONFIG })
}

fn main() -> ExitCode {
    // usage errors share the configuration exit code; 2 is reserved for grabs
    let parsed = Cli::command()
        .after_help(keys_help())
        .mut_subcommands(|c| c.after_help(keys_help()))
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Swing(a) => cmd_swing(a),
        Command::MonteCarlo(a) => cmd_monte_carlo(a),
        Command::Continuous(a) => cmd_continuous(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Singular(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_SINGULAR)
        }
    }
}
