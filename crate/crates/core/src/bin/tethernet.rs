use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde::Serialize;

use tethernet::capture::evaluate_capture;
use tethernet::config::{CaptureMode, CONFIG_ENV};
use tethernet::episode::{LogOptions, Simulation, TrajectoryRecord};
use tethernet::harness::{
    calibrate_max_fuel, fit_surrogate, fuel_delta_csv, generate_dataset, paired_evaluation,
    reward_history_csv, tracking_error_csv, train_policy, ManifestRecord, ManifestWriter, RunInfo, RunManifest, Runner,
};
use tethernet::io::{read_jsonl, write_document, write_jsonl};
use tethernet::policy::{apply_action, nominal_aiming, stream_rng, AimingAction, Environment, PolicyModel, Scenario, ScenarioBounds};
use tethernet::surrogate::{Dataset, SurrogateModel};
use tethernet::{Config, Error, Result, Variant};

const CONTROL_FORMAT: &str = "tethernet-control";
const TRAJECTORY_FORMAT: &str = "tethernet-trajectory";
const EPISODE_FORMAT: &str = "tethernet-episode";
const REPORT_FORMAT: &str = "tethernet-evaluation";
const SURROGATE_REPORT_FORMAT: &str = "tethernet-surrogate-report";
const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "tethernet", version, about = "Tether-net debris capture simulation and aiming-policy training")]
struct Cli {
    /// Configuration file (TOML). Defaults apply when absent.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Override the configured variant (four-mu | eight-mu).
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode with full logs.
    Simulate(SimulateArgs),
    /// Simulate randomized episodes and store their trigger snapshots.
    GenDataset(GenDatasetArgs),
    /// Fit the capture-outcome surrogate and its residual model.
    TrainSurrogate(TrainSurrogateArgs),
    /// Score a surrogate against a dataset.
    EvalSurrogate(EvalSurrogateArgs),
    /// Train the aiming-offset policy.
    TrainPolicy(TrainPolicyArgs),
    /// Compare nominal and policy aiming on unseen scenarios.
    Evaluate(EvaluateArgs),
    /// Write delimited plot series from run directories.
    ExportPlots(ExportPlotsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Debris position `x,y,z` in m; defaults to the configured position.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    debris: Option<Vec<f64>>,
    /// Aiming offsets `dx1,dy1,dx2,dy2,...` in m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    offsets: Option<Vec<f64>>,
    /// Stop at the closing trigger.
    #[arg(long)]
    deploy_only: bool,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct GenDatasetArgs {
    #[arg(long)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSurrogateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Trailing samples held out for validation and the residual model.
    #[arg(long, default_value_t = 200)]
    holdout: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSurrogateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPolicyArgs {
    /// Surrogate model; required in surrogate capture mode.
    #[arg(long)]
    surrogate: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference fuel in kg; calibrated from nominal episodes when absent.
    #[arg(long)]
    max_fuel: Option<f64>,
    /// Use simulated capture instead of the surrogate.
    #[arg(long)]
    full_capture: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_fuel: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportPlotsArgs {
    /// Directories written by `simulate`, `train-policy` or `evaluate`.
    #[arg(long, required = true, num_args = 1..)]
    run: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(v) = cli.variant {
        config.variant = v;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(config: &Config, args: &SimulateArgs) -> Result<()> {
    let mut config = config.clone();
    if let Some(d) = &args.debris {
        if d.len() != 3 {
            return Err(Error::InvalidInput(format!("--debris takes x,y,z, got {} values", d.len())));
        }
        config.debris.position = [d[0], d[1], d[2]];
    }
    let sim = Simulation::new(&config)?;
    let scenario = Scenario {
        debris: config.debris.position,
        seed: args.seed,
        variant: config.variant,
    };
    scenario.validate(&ScenarioBounds::default())?;
    let action = match &args.offsets {
        Some(v) if v.len() != 2 * config.variant.mu_count() => {
            return Err(Error::WidthMismatch {
                expected: 2 * config.variant.mu_count(),
                actual: v.len(),
            })
        }
        Some(v) => AimingAction::from_flat(v),
        None => AimingAction::zeros(config.variant.mu_count()),
    };
    let (action, clipped) = action.legalize(ScenarioBounds::default().action, config.policy.evaluation_bounds)?;
    let nominal = nominal_aiming(&Vector3::from(scenario.debris), config.variant, config.policy.raw_nominal_table);
    let aiming = apply_action(&nominal, &action)?;
    let logs = LogOptions {
        trajectory: true,
        control: true,
    };
    let mut deployment = sim.deploy(aiming, stream_rng(scenario.seed, 0), logs)?;
    let log = if args.deploy_only {
        tethernet::capture::CaptureLog {
            trigger_time: deployment.trigger.fired_at,
            mouth_area_at_trigger: deployment.mouth_area_at_trigger,
            fuel_per_mu: deployment.controller.fuel_per_mu(),
            diverged: deployment.diverged.is_some(),
            ..Default::default()
        }
    } else {
        sim.capture(&mut deployment, logs)?
    };
    let metrics = evaluate_capture(&log, config.variant, sim.assembly.max_mouth_area(), config.capture.cqi_threshold);

    create_dir(&args.out)?;
    write_jsonl::<TrajectoryRecord, _>(
        &args.out.join("trajectory.jsonl"),
        TRAJECTORY_FORMAT,
        FORMAT_VERSION,
        &deployment.trajectory,
    )?;
    write_jsonl(&args.out.join("control.jsonl"), CONTROL_FORMAT, FORMAT_VERSION, deployment.control_log())?;
    #[derive(Serialize)]
    struct EpisodeResult<'a> {
        scenario: Scenario,
        action: &'a AimingAction,
        clipped: bool,
        com_distance: &'a [(f64, f64)],
        diverged: &'a Option<String>,
        metrics: &'a tethernet::capture::CaptureMetrics,
    }
    let result = EpisodeResult {
        scenario,
        action: &action,
        clipped,
        com_distance: &deployment.com_distance,
        diverged: &deployment.diverged,
        metrics: &metrics,
    };
    write_document(&args.out.join("result.json"), EPISODE_FORMAT, FORMAT_VERSION, &result)?;
    print_json(&serde_json::json!({
        "success": metrics.success,
        "failure": metrics.failure,
        "trigger_time": metrics.trigger_time,
        "settled_cqi": if metrics.settled_cqi.is_finite() { serde_json::json!(metrics.settled_cqi) } else { serde_json::json!("inf") },
        "locked_pairs": metrics.locked_pairs,
        "total_fuel": metrics.total_fuel(),
    }))
}

fn gen_dataset(config: &Config, runner: &Runner, args: &GenDatasetArgs) -> Result<()> {
    let start = Instant::now();
    let (dataset, summary) = generate_dataset(config, args.episodes, args.seed, runner)?;
    dataset.save(&args.out)?;
    eprintln!("generated {} samples in {:.1} s", dataset.samples.len(), start.elapsed().as_secs_f64());
    print_json(&summary)
}

fn train_surrogate(config: &Config, args: &TrainSurrogateArgs) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let start = Instant::now();
    let (model, report, error_model) = fit_surrogate(config, &dataset, args.holdout, args.seed)?;
    eprintln!("trained in {:.1} s", start.elapsed().as_secs_f64());
    model.save(&args.out)?;
    #[derive(Serialize)]
    struct Report<'a> {
        report: &'a tethernet::surrogate::TrainReport,
        error_model: tethernet::surrogate::ErrorModel,
    }
    let out = Report {
        report: &report,
        error_model,
    };
    if let Some(p) = &args.report {
        write_document(p, SURROGATE_REPORT_FORMAT, FORMAT_VERSION, &out)?;
    }
    print_json(&serde_json::json!({
        "train": report.train,
        "validation": report.validation,
        "error_model": error_model,
    }))
}

fn eval_surrogate(config: &Config, args: &EvalSurrogateArgs) -> Result<()> {
    let model = SurrogateModel::load(&args.model)?;
    let dataset = Dataset::load(&args.dataset)?;
    if dataset.spec != model.spec {
        return Err(Error::WidthMismatch {
            expected: model.spec.width(),
            actual: dataset.spec.width(),
        });
    }
    let scores = model.evaluate(&dataset.samples, config.capture.cqi_threshold)?;
    if let Some(p) = &args.out {
        write_document(p, SURROGATE_REPORT_FORMAT, FORMAT_VERSION, &scores)?;
    }
    print_json(&scores)
}

fn train_policy_cmd(config: &Config, runner: &Runner, args: &TrainPolicyArgs) -> Result<()> {
    let mut config = config.clone();
    if args.full_capture {
        config.policy.mode = CaptureMode::FullCapture;
    }
    let surrogate = match (&args.surrogate, config.policy.mode) {
        (Some(p), _) => Some(SurrogateModel::load(p)?),
        (None, CaptureMode::SurrogateCapture) => {
            return Err(Error::Config("surrogate capture mode needs --surrogate".into()));
        }
        (None, CaptureMode::FullCapture) => None,
    };
    create_dir(&args.out)?;
    let start = Instant::now();
    let max_fuel = match args.max_fuel.or(config.policy.max_fuel) {
        Some(f) => f,
        None => {
            let c = calibrate_max_fuel(&config, args.seed, runner)?;
            write_document(&args.out.join("calibration.json"), "tethernet-calibration", FORMAT_VERSION, &c)?;
            c.max_fuel
        }
    };
    config.policy.max_fuel = Some(max_fuel);
    let env = Environment::new(&config, Some(max_fuel), surrogate)?;
    let iterations = args.iterations.unwrap_or(config.policy.iterations);
    let mut manifest = ManifestWriter::create(
        &args.out.join("manifest.jsonl"),
        RunInfo {
            command: "train-policy".into(),
            root_seed: args.seed,
            variant: config.variant,
            mode: Some(config.policy.mode),
            config: config.clone(),
        },
    )?;
    let per_iter = config.policy.episodes_per_iteration;
    let (policy, history) = train_policy(&env, iterations, args.seed, runner, |stats, records| {
        for (j, r) in records.iter().enumerate() {
            manifest.append(&ManifestRecord::Episode {
                index: stats.iteration * per_iter + j,
                iteration: Some(stats.iteration),
                outcome: r.outcome.clone(),
            })?;
        }
        manifest.append(&ManifestRecord::Iteration(*stats))?;
        eprintln!(
            "iteration {:>4}  trailing reward {:>8.4}  success {:.2}",
            stats.iteration, stats.trailing_mean_reward, stats.success_fraction
        );
        Ok(())
    })?;
    let last = history.last().copied();
    manifest.summary(&serde_json::json!({ "iterations": history.len(), "max_fuel": max_fuel, "last": last }))?;
    manifest.finish()?;
    policy.save(&args.out.join("policy.json"))?;
    eprintln!("trained in {:.1} s", start.elapsed().as_secs_f64());
    print_json(&serde_json::json!({ "iterations": history.len(), "max_fuel": max_fuel, "last": last }))
}

fn evaluate_cmd(config: &Config, runner: &Runner, args: &EvaluateArgs) -> Result<()> {
    let policy = PolicyModel::load(&args.policy)?;
    let max_fuel = match args.max_fuel.or(config.policy.max_fuel) {
        Some(f) => f,
        None => calibrate_max_fuel(config, args.seed, runner)?.max_fuel,
    };
    let env = Environment::new(config, Some(max_fuel), None)?;
    let start = Instant::now();
    let report = paired_evaluation(&env, &policy, args.episodes, args.seed, runner)?;
    create_dir(&args.out)?;
    let mut manifest = ManifestWriter::create(
        &args.out.join("manifest.jsonl"),
        RunInfo {
            command: "evaluate".into(),
            root_seed: args.seed,
            variant: config.variant,
            mode: Some(CaptureMode::FullCapture),
            config: config.clone(),
        },
    )?;
    for p in &report.pairs {
        manifest.append(&ManifestRecord::Pair(p.clone()))?;
    }
    manifest.finish()?;
    write_document(&args.out.join("report.json"), REPORT_FORMAT, FORMAT_VERSION, &report)?;
    eprintln!("evaluated {} pairs in {:.1} s", report.episodes, start.elapsed().as_secs_f64());
    print_json(&serde_json::json!({
        "episodes": report.episodes,
        "success_rate": report.success_rate,
        "nominal_success_rate": report.nominal_success_rate,
        "fuel_nominal": report.fuel_nominal,
        "fuel_policy": report.fuel_policy,
        "mean_fuel_delta": report.mean_fuel_delta,
        "per_mu_fuel_nominal": report.per_mu_fuel_nominal,
        "per_mu_fuel_policy": report.per_mu_fuel_policy,
    }))
}

fn export_plots(args: &ExportPlotsArgs) -> Result<()> {
    create_dir(&args.out)?;
    let mut written = Vec::new();
    for (k, dir) in args.run.iter().enumerate() {
        let suffix = if args.run.len() > 1 { format!("_{k}") } else { String::new() };
        let control = dir.join("control.jsonl");
        if control.exists() {
            let log: Vec<tethernet::control::ControlRecord> = read_jsonl(&control, CONTROL_FORMAT, FORMAT_VERSION)?;
            let path = args.out.join(format!("tracking_error{suffix}.csv"));
            write_text(&path, &tracking_error_csv(&log))?;
            written.push(path);
        }
        let manifest = dir.join("manifest.jsonl");
        if manifest.exists() {
            let m = RunManifest::load(&manifest)?;
            let iterations = m.iterations();
            if !iterations.is_empty() {
                let path = args.out.join(format!("reward_history{suffix}.csv"));
                write_text(&path, &reward_history_csv(&iterations))?;
                written.push(path);
            }
            let pairs = m.pairs();
            if !pairs.is_empty() {
                let path = args.out.join(format!("fuel_delta{suffix}.csv"));
                write_text(&path, &fuel_delta_csv(&pairs))?;
                written.push(path);
            }
        }
    }
    if written.is_empty() {
        return Err(Error::InvalidInput("no control log or manifest found in the run directories".into()));
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    // The thread count is an execution detail; keep it out of recorded configs.
    let runner = Runner::new(cli.threads.unwrap_or(config.run.threads))?;
    match &cli.command {
        Command::Simulate(a) => simulate(&config, a),
        Command::GenDataset(a) => gen_dataset(&config, &runner, a),
        Command::TrainSurrogate(a) => train_surrogate(&config, a),
        Command::EvalSurrogate(a) => eval_surrogate(&config, a),
        Command::TrainPolicy(a) => train_policy_cmd(&config, &runner, a),
        Command::Evaluate(a) => evaluate_cmd(&config, &runner, a),
        Command::ExportPlots(a) => export_plots(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
