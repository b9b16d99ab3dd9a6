//! `parapush`: runs the convergence, timing, open-loop and planning
//! experiments and writes plot-ready CSV files plus a run manifest.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use parapush::experiments::{
    canonical_controls, canonical_scene, run_bench, run_converge, run_openloop, OpenLoopProtocol,
    PushSide, Shape,
};
use parapush::io::{self, SceneFile};
use parapush::mpc::SceneGenerator;
use parapush::parareal::default_workers;
use parapush::{run_benchmark, ControlSequence, Error, ModelChoice, SceneF, Vec2};

#[derive(Parser, Debug)]
#[command(name = "parapush", version, about = "Hybrid coarse/fine pushing prediction and planning")]
struct Cli {
    /// Scene JSON file.
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Total worker thread budget. Defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Roll out one model and write its trajectory.
    Rollout(RolloutArgs),
    /// Error of every Parareal iterate against fine on a canonical push.
    Converge(ConvergeArgs),
    /// Time fine, coarse and Parareal rollouts.
    Bench(BenchArgs),
    /// Final-state differences over seeded open-loop pushes.
    Openloop(OpenloopArgs),
    /// Closed-loop planning episodes.
    Plan(PlanArgs),
    /// Check a scene file and print the validated document.
    Validate,
}

#[derive(Args, Debug, Serialize)]
struct RolloutArgs {
    /// coarse, fine or parareal:K.
    #[arg(long, default_value = "fine")]
    model: String,
    /// Pusher velocities in mm/s, e.g. "25,0;25,0". Defaults to four [25, 0].
    #[arg(long)]
    controls: Option<String>,
    /// Seconds per control.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Leave Parareal iterates unprojected.
    #[arg(long)]
    no_project: bool,
}

#[derive(Args, Debug, Serialize)]
struct ConvergeArgs {
    #[arg(long, default_value = "center")]
    push: String,
    #[arg(long, default_value = "box")]
    shape: String,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Parareal iteration counts to time.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
}

#[derive(Args, Debug, Serialize)]
struct OpenloopArgs {
    #[arg(long, default_value = "box")]
    shape: String,
    #[arg(long, default_value_t = 100)]
    starts: usize,
}

#[derive(Args, Debug, Serialize)]
struct PlanArgs {
    /// Generate this many benchmark scenes from `--seed` instead of reading
    /// `--scene`.
    #[arg(long)]
    generate: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "coarse,parareal:1,parareal:2,parareal:3,fine")]
    models: Vec<String>,
    /// Episodes per (scene, model), seeded from `--seed` upwards.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
}

/// Written next to every output set.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    scene: Option<String>,
    overrides: serde_json::Value,
    seed: u64,
    threads: usize,
    out: String,
    outputs: Vec<String>,
    tool_version: String,
    timestamp: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::InvalidScene(_) | Error::Json(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let threads = cli.threads.unwrap_or_else(|| default_workers(usize::MAX));
    if threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let outputs = match &cli.command {
        Command::Rollout(a) => rollout(cli, a, threads)?,
        Command::Converge(a) => converge(cli, a, threads)?,
        Command::Bench(a) => bench(cli, a, threads)?,
        Command::Openloop(a) => openloop(cli, a, threads)?,
        Command::Plan(a) => plan(cli, a, threads)?,
        Command::Validate => {
            let path = cli.scene.as_ref().ok_or_else(|| Failure::usage("validate needs --scene"))?;
            println!("{}", load(path)?.to_json()?);
            return Ok(());
        }
    };
    write_manifest(cli, threads, outputs)
}

fn load(path: &Path) -> CliResult<SceneFile<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(SceneFile::from_json(&text)?)
}

fn scene_or(cli: &Cli, fallback: impl FnOnce() -> SceneF) -> CliResult<SceneFile<f64>> {
    match &cli.scene {
        Some(p) => load(p),
        None => Ok(SceneFile::new(fallback())),
    }
}

fn write(cli: &Cli, name: &str, contents: &str) -> CliResult<String> {
    let path = cli.out.join(name);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    std::fs::write(&path, contents).map_err(Error::from)?;
    Ok(name.to_string())
}

fn parse_model(s: &str) -> CliResult<ModelChoice> {
    s.parse().map_err(|e: Error| Failure::usage(e.to_string()))
}

fn parse_controls(spec: &str, duration: f64) -> CliResult<ControlSequence<f64>> {
    let vels = spec
        .split(';')
        .map(|pair| {
            let xy: Vec<f64> = pair
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::usage(format!("bad control '{pair}': {e}")))?;
            match xy[..] {
                [x, y] => Ok(Vec2::new(x, y)),
                _ => Err(Failure::usage(format!("control '{pair}' needs two components"))),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ControlSequence::new(vels, duration))
}

fn rollout(cli: &Cli, a: &RolloutArgs, threads: usize) -> CliResult<Vec<String>> {
    let file = scene_or(cli, || canonical_scene(PushSide::Center, Shape::Box))?;
    let model = parse_model(&a.model)?;
    let controls = match &a.controls {
        Some(spec) => parse_controls(spec, a.duration)?,
        None => {
            let c = canonical_controls();
            ControlSequence::new(c.vels, a.duration)
        }
    };
    controls.validate(file.scene.max_push_speed)?;
    let scene = &file.scene;
    let traj = model.rollout(
        &scene.start_state,
        &controls,
        &file.model_params(),
        scene,
        threads.min(controls.len()),
        !a.no_project,
    )?;
    Ok(vec![write(cli, "trajectory.csv", &io::trajectory_csv(&traj))?])
}

fn converge(cli: &Cli, a: &ConvergeArgs, threads: usize) -> CliResult<Vec<String>> {
    let side: PushSide = a.push.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let shape: Shape = a.shape.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let file = scene_or(cli, || canonical_scene(side, shape))?;
    let controls = canonical_controls();
    let reports = run_converge(&file.scene, &controls, &file.model_params(), threads.min(controls.len()))?;
    let reports: Vec<_> = reports.into_iter().map(|(_, r)| r).collect();
    Ok(vec![write(cli, "converge.csv", &io::converge_csv(&reports))?])
}

fn bench(cli: &Cli, a: &BenchArgs, threads: usize) -> CliResult<Vec<String>> {
    let file = scene_or(cli, || canonical_scene(PushSide::Center, Shape::Box))?;
    let controls = canonical_controls();
    let n = controls.len();
    if let Some(&k) = a.ks.iter().find(|&&k| k > n) {
        return Err(Failure::usage(format!("K = {k} exceeds N = {n}")));
    }
    let cores = default_workers(usize::MAX);
    if cores < n {
        eprintln!("warning: {cores} logical cores available, fewer than N = {n}; Parareal timings will not show the parallel speedup");
    }
    let report = run_bench(&file.scene, &controls, &a.ks, a.reps, &file.model_params(), threads.min(n))?;
    eprintln!("c_c = {:.3e} s, c_f = {:.3e} s per slice", report.c_c, report.c_f);
    Ok(vec![write(cli, "bench.csv", &io::bench_csv(&report))?])
}

fn openloop(cli: &Cli, a: &OpenloopArgs, threads: usize) -> CliResult<Vec<String>> {
    let shape: Shape = a.shape.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let params = match &cli.scene {
        Some(p) => load(p)?.model_params(),
        None => Default::default(),
    };
    let protocol = OpenLoopProtocol { starts: a.starts, ..OpenLoopProtocol::default() };
    let rows = run_openloop::<f64>(shape, &protocol, &params, cli.seed, threads)?;
    Ok(vec![write(cli, "openloop.csv", &io::openloop_csv(&rows))?])
}

fn plan(cli: &Cli, a: &PlanArgs, threads: usize) -> CliResult<Vec<String>> {
    let models = a.models.iter().map(|m| parse_model(m)).collect::<CliResult<Vec<_>>>()?;
    let (scenes, base) = match (a.generate, &cli.scene) {
        (Some(count), scene) => {
            let base = match scene {
                Some(p) => load(p)?,
                None => SceneFile::new(SceneGenerator::default().generate(cli.seed)),
            };
            let gen = SceneGenerator::default();
            let scenes: Vec<SceneF> = (0..count as u64)
                .map(|i| gen.generate(cli.seed.wrapping_add(i)))
                .collect();
            (scenes, base)
        }
        (None, Some(p)) => {
            let file = load(p)?;
            (vec![file.scene.clone()], file)
        }
        (None, None) => return Err(Failure::usage("plan needs --scene or --generate")),
    };
    let horizon = base.mpc.horizon;
    let workers = threads.min(horizon).max(1);
    let episode_threads = (threads / workers).max(1);
    let setup = base.episode_setup(workers);
    let seeds: Vec<u64> = (0..a.episodes as u64).map(|i| cli.seed.wrapping_add(i)).collect();
    let table = run_benchmark(&scenes, &models, &seeds, &setup, episode_threads)?;

    let mut outputs = vec![
        write(cli, "plan.csv", &table.to_csv())?,
        write(cli, "summary.csv", &io::summary_csv(&table.summary))?,
    ];
    for row in &table.episodes {
        let name = format!("episodes/scene{}_{}_seed{}.csv", row.scene, row.model.to_string().replace(':', "-"), row.seed);
        match (&row.trajectory, &row.abort_reason) {
            (Some(traj), _) => outputs.push(write(cli, &name, &io::trajectory_csv(traj))?),
            (None, Some(reason)) => eprintln!("scene {} {} seed {} aborted: {reason}", row.scene, row.model, row.seed),
            (None, None) => {}
        }
    }
    for m in &models {
        eprintln!(
            "{m}: {}/{} successes, mean planning {:.3} s",
            table.successes(*m),
            table.episodes.iter().filter(|r| r.model == *m).count(),
            table.mean_planning(*m)
        );
    }
    Ok(outputs)
}

fn write_manifest(cli: &Cli, threads: usize, outputs: Vec<String>) -> CliResult<()> {
    let overrides = serde_json::to_value(&cli.command).map_err(Error::from)?;
    let command = match &overrides {
        serde_json::Value::Object(m) => m.keys().next().cloned().unwrap_or_default(),
        serde_json::Value::String(s) => s.clone(),
        _ => String::new(),
    };
    let manifest = RunManifest {
        command,
        scene: cli.scene.as_ref().map(|p| p.display().to_string()),
        overrides,
        seed: cli.seed,
        threads,
        out: cli.out.display().to_string(),
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
    write(cli, "manifest.json", &text)?;
    Ok(())
}
