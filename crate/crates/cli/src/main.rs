use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cdf_mppi::audit::{audit_field, AuditOptions};
use cdf_mppi::benchmark::{
    generate_trials, run_benchmark, run_trial, BenchmarkOptions, TrialProtocol, TrialSpec,
};
use cdf_mppi::cdf::save_field;
use cdf_mppi::io::config::{load_or_build_field, load_params, load_scene, parse_vector};
use cdf_mppi::io::plot::{render_config_space, write_svg, Overlay, PlotOptions};
use cdf_mppi::io::trajectory::{read_trajectory_csv, write_trajectory_csv};
use cdf_mppi::io::{RunConfig, RunRequest};
use cdf_mppi::{CdfField, Configuration, Error, Method, MetricsReport, PlanStatus};

/// Configuration-space distance fields and one-step MPPI planning for planar arms.
#[derive(Parser)]
#[command(name = "cdfmppi", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or check a distance field.
    #[command(subcommand)]
    Cdf(CdfCommand),
    /// Plan one motion and write its trajectory.
    Plan(PlanArgs),
    /// Run planners over generated start/goal pairs.
    Bench(BenchArgs),
    /// Render the field and trajectories as SVG.
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum CdfCommand {
    Build(BuildArgs),
    Audit(AuditArgs),
}

#[derive(Args)]
struct SceneArg {
    /// Scene JSON; the built-in two-link scene when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Grid cells per joint.
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Contact refinement tolerance, radians.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    field: PathBuf,
    #[command(flatten)]
    scene: SceneArg,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid the field was built with (the oracle scans 4x finer).
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Field file; built from the scene when omitted.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Comma-separated start configuration, e.g. "2.1,1.2".
    #[arg(long, allow_hyphen_values = true)]
    start: String,
    #[arg(long, allow_hyphen_values = true)]
    goal: String,
    /// ours, mppi, qp or random.
    #[arg(long, default_value = "ours")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hyperparameter JSON (missing fields keep their defaults).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG of the plan over the field.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    plot_resolution: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Master seed for start/goal pairs and planner seeds.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Comma-separated methods.
    #[arg(long, default_value = "ours,mppi,qp,random")]
    methods: String,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Keep only pairs whose straight line collides.
    #[arg(long)]
    require_linear_collision: bool,
    #[arg(long, default_value_t = 0.1)]
    min_start_clearance: f64,
    /// Leave decision timings out of the report (byte-reproducible output).
    #[arg(long)]
    no_timing: bool,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial list JSON.
    #[arg(long)]
    trials_out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[arg(long)]
    field: Option<PathBuf>,
    /// Trajectory CSV (repeatable).
    #[arg(long = "trajectory")]
    trajectories: Vec<PathBuf>,
    /// Goal marker (repeatable, paired with trajectories in order).
    #[arg(long = "goal", allow_hyphen_values = true)]
    goals: Vec<String>,
    #[arg(long, default_value_t = 400)]
    resolution: usize,
    #[arg(long)]
    vmin: Option<f64>,
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
    Audit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Audit(_) => 3,
        }
    }
}

/// Input problems are usage errors; everything else happened while running.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidScene(_)
        | Error::DimensionMismatch { .. }
        | Error::FieldTruncated { .. }
        | Error::FieldVersion { .. }
        | Error::FieldMalformed(_)
        | Error::TrajectoryCsv(_)
        | Error::UnsupportedDimension(_)
        | Error::Json(_)
        | Error::Io { .. } => Failure::Usage(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

trait OrUsage<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T> OrUsage<T> for cdf_mppi::Result<T> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(classify)
    }
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into())
}

fn cdf_build(args: BuildArgs) -> Result<(), Failure> {
    let scene = load_scene(args.scene.scene.as_deref()).usage()?;
    let field = CdfField::build(&scene, args.resolution, args.tol).usage()?;
    if field.contacts().unreachable {
        log::warn!("no obstacle is reachable; the field is +inf everywhere");
    }
    save_field(&field, &args.out).usage()?;
    println!("{} contact configurations", field.contacts().len());
    Ok(())
}

fn cdf_audit(args: AuditArgs) -> Result<(), Failure> {
    let scene = load_scene(args.scene.scene.as_deref()).usage()?;
    let field = load_or_build_field(Some(&args.field), &scene).usage()?;
    let opts = AuditOptions {
        samples: args.samples,
        seed: args.seed,
        grid_resolution: args.resolution,
        ..AuditOptions::default()
    };
    let report = audit_field(&field, &scene, &opts).usage()?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", report.summary());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Audit("field audit found violations".into()))
    }
}

#[derive(Serialize)]
struct PlanSummary {
    method: Method,
    status: PlanStatus,
    steps: usize,
    path_length: f64,
}

fn plan(args: PlanArgs) -> Result<(), Failure> {
    let req = RunRequest {
        scene: args.scene.scene,
        field: args.field,
        method: args.method,
        params: args.params,
        seed: args.seed,
        start: args.start,
        goal: args.goal,
        out: args.out,
        plot: args.plot,
        plot_resolution: args.plot_resolution,
        value_range: None,
    };
    let cfg = RunConfig::resolve(&req).usage()?;
    eprintln!("resolved configuration:\n{}", cfg.echo());

    let trial = TrialSpec {
        index: 0,
        start: cfg.start.as_slice().to_vec(),
        goal: cfg.goal.as_slice().to_vec(),
        seed: cfg.seed,
        scene_id: "cli".into(),
        linear_path_collides: false,
    };
    let result = run_trial(cfg.method, &trial, &cfg.scene, &cfg.field, &cfg.params).usage()?;

    if let Some(out) = &cfg.out {
        write_trajectory_csv(&result.trajectory, &cfg.field, cfg.dt(), out).usage()?;
    }
    if let Some(out) = &cfg.plot {
        let overlay = Overlay {
            label: cfg.method.to_string(),
            path: result.trajectory.clone(),
            goal: Some(cfg.goal.clone()),
        };
        let fig =
            render_config_space(&cfg.field, &cfg.scene, &[overlay], &cfg.plot_options).usage()?;
        write_svg(&fig, out).usage()?;
    }
    let summary = PlanSummary {
        method: cfg.method,
        status: result.status,
        steps: result.steps,
        path_length: result.path_length,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    match result.status {
        PlanStatus::Reached => Ok(()),
        PlanStatus::InContactStart => Err(Failure::Runtime(anyhow!(
            "start configuration is in contact"
        ))),
        other => Err(Failure::Runtime(anyhow!(
            "goal not reached: {}",
            other.failure_cause().unwrap_or("?")
        ))),
    }
}

#[derive(Serialize)]
struct BenchReport<'a> {
    protocol: &'a TrialProtocol,
    reports: &'a [MetricsReport],
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let mut problems = Vec::new();
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .filter_map(|m| {
            m.trim()
                .parse()
                .map_err(|e: String| problems.push(format!("methods: {e}")))
                .ok()
        })
        .collect();
    let scene = load_scene(args.scene.scene.as_deref())
        .map_err(|e| problems.push(format!("scene: {e}")))
        .ok();
    let params = load_params(args.params.as_deref())
        .map_err(|e| problems.push(format!("params: {e}")))
        .ok();
    if args.trials == 0 {
        problems.push("trials: at least one trial is required".into());
    }
    let (Some(scene), Some(params), true) = (scene, params, problems.is_empty()) else {
        return Err(classify(Error::Config(problems)));
    };
    let field = load_or_build_field(args.field.as_deref(), &scene).usage()?;
    let protocol = TrialProtocol {
        n_trials: args.trials,
        master_seed: args.seed,
        require_linear_collision: args.require_linear_collision,
        min_start_clearance: args.min_start_clearance,
        ..TrialProtocol::default()
    };
    let trials = generate_trials(&scene, &field, "cli", &protocol)
        .map_err(|e| Failure::Runtime(e.into()))?;
    if let Some(out) = &args.trials_out {
        let text = serde_json::to_string_pretty(&trials).expect("trials serialize");
        std::fs::write(out, text)
            .with_context(|| out.display().to_string())
            .map_err(Failure::Usage)?;
    }
    let options = BenchmarkOptions {
        record_timing: !args.no_timing,
        keep_trajectories: false,
    };
    let reports = run_benchmark(&methods, &trials, &scene, &field, &params, options);

    println!(
        "{:<8} {:>8} {:>12} {:>10} {:>12}",
        "method", "success", "mean_length", "mean_steps", "step_us"
    );
    for r in &reports {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:<8} {:>8.3} {:>12} {:>10} {:>12}",
            r.method.name(),
            r.success_rate,
            opt(r.mean_path_length),
            opt(r.mean_steps),
            opt(r.step_time_us.map(|t| t.mean)),
        );
    }
    if let Some(out) = &args.out {
        let report = BenchReport {
            protocol: &protocol,
            reports: &reports,
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(out, text)
            .with_context(|| out.display().to_string())
            .map_err(Failure::Usage)?;
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<(), Failure> {
    let scene = load_scene(args.scene.scene.as_deref()).usage()?;
    let mut overlays = Vec::new();
    for path in &args.trajectories {
        let rows = read_trajectory_csv(path).usage()?;
        overlays.push(Overlay {
            label: file_label(path),
            path: rows.into_iter().map(|r| r.q).collect(),
            goal: None,
        });
    }
    if args.goals.len() > overlays.len().max(1) {
        return Err(Failure::Usage(anyhow!(
            "more --goal markers than trajectories"
        )));
    }
    for (i, g) in args.goals.iter().enumerate() {
        let goal = Configuration::from_vec(
            parse_vector(g).map_err(|e| Failure::Usage(anyhow!("goal: {e}")))?,
        );
        match overlays.get_mut(i) {
            Some(o) => o.goal = Some(goal),
            None => overlays.push(Overlay {
                label: "goal".into(),
                path: Vec::new(),
                goal: Some(goal),
            }),
        }
    }
    let value_range = match (args.vmin, args.vmax) {
        (None, None) => None,
        (lo, hi) => Some((
            lo.unwrap_or(0.0),
            hi.ok_or_else(|| Failure::Usage(anyhow!("--vmin needs --vmax")))?,
        )),
    };
    let field = load_or_build_field(args.field.as_deref(), &scene).usage()?;
    let opts = PlotOptions {
        resolution: args.resolution,
        value_range,
    };
    let fig = render_config_space(&field, &scene, &overlays, &opts).usage()?;
    for a in fig.colliding_vertices() {
        log::warn!(
            "{} vertex {} lies in the collision region (cdf {:.3e})",
            overlays[a.overlay].label,
            a.vertex,
            a.cdf_value
        );
    }
    write_svg(&fig, &args.out).usage()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Cdf(CdfCommand::Build(a)) => cdf_build(a),
        Command::Cdf(CdfCommand::Audit(a)) => cdf_audit(a),
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Audit(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
