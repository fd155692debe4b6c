//! Command-line entry point.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use pnp_core::domain::{parse_skeleton, validate_skeleton, PlanSkeleton, SymbolicState};
use pnp_core::harness::{inspect_step, randomize, summarize, Ablation, EpisodeResult, HarnessConfig};
use pnp_core::planner::{Backend, Failure, PlannerConfig};
use pnp_core::render::render_scene;
use pnp_core::scenarios::{builtin, Scenario, BUILTIN_IDS};
use pnp_core::subgoal::CandidateSet;

use crate::bench::{csv_string, run_parallel, success_table, timed_episode, PlannerChoice};
use crate::http::CallLog;
use crate::io::{load_scenario, load_templates, read_text, CliError, OutDir};

#[derive(Debug, Parser)]
#[command(name = "pnp", version, about = "Hybrid prehensile / non-prehensile manipulation planner")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode and write its trace.
    Run(RunArgs),
    /// Run every scenario for a number of seeded trials.
    Bench(BenchArgs),
    /// Show the candidate sub-goals for one plan step.
    Sample(SampleArgs),
    /// Check a plan skeleton against a scenario's initial state.
    Validate(ValidateArgs),
    /// Write a top-down SVG of a randomized scene.
    Render(RenderArgs),
    /// Scenario file utilities.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
}

#[derive(Debug, Subcommand)]
enum ScenariosCommand {
    /// Write the built-in scenarios as JSON files.
    Export {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblationArg {
    #[value(name = "full")]
    Full,
    #[value(name = "no_pose")]
    NoPose,
    #[value(name = "no_reflection")]
    NoReflection,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoPose => Ablation::NoPose,
            AblationArg::NoReflection => Ablation::NoReflection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PlannerArg {
    Scripted,
    Http,
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// JSON config file; flags given on the command line win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    planner: Option<PlannerArg>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Directory with planner.txt, reflector.txt, selector.txt.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, value_enum)]
    ablation: Option<AblationArg>,
    /// Output directory; every file is written below it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    render: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated ids or files; all built-ins by default.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    scenario: String,
    /// Index of the step within the plan.
    #[arg(long)]
    step: usize,
    /// Plan skeleton file; otherwise a fallback plan of the scenario.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Fallback plan index; the last (most informed) plan by default.
    #[arg(long)]
    plan_index: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    skeleton: PathBuf,
    #[arg(long)]
    scenario: String,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

/// Settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    planner: Option<PlannerArg>,
    endpoint: Option<String>,
    model: Option<String>,
    timeout_secs: Option<u64>,
    max_retries: Option<u32>,
    temperature: Option<f64>,
    templates: Option<PathBuf>,
    ablation: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    workers: Option<usize>,
    render: Option<bool>,
    scenarios: Option<Vec<String>>,
}

/// Flags merged over the config file over defaults.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub scenarios: Vec<String>,
    pub planner: PlannerChoice,
    pub seed: u64,
    pub trials: usize,
    pub ablation: Ablation,
    pub out: PathBuf,
    pub render: bool,
    pub workers: usize,
}

fn read_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(p) = path else { return Ok(FileConfig::default()) };
    serde_json::from_str(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
}

fn resolve(
    common: &Common,
    file: &FileConfig,
    scenarios: Vec<String>,
    seed: Option<u64>,
    trials: Option<usize>,
    workers: Option<usize>,
    render: bool,
) -> Result<CliConfig, CliError> {
    let ablation = match (common.ablation, &file.ablation) {
        (Some(a), _) => a.into(),
        (None, Some(s)) => Ablation::from_name(s).ok_or_else(|| CliError::input(format!("unknown ablation {s}")))?,
        (None, None) => Ablation::Full,
    };
    let trials = trials.or(file.trials).unwrap_or(10);
    if trials == 0 {
        return Err(CliError::input("trials must be at least 1"));
    }
    let templates = load_templates(common.templates.as_deref().or(file.templates.as_deref()))?;
    let planner = match common.planner.or(file.planner).unwrap_or(PlannerArg::Scripted) {
        PlannerArg::Scripted => PlannerChoice::Scripted,
        PlannerArg::Http => {
            let pc = PlannerConfig {
                backend: Backend::Http {
                    endpoint: common.endpoint.clone().or(file.endpoint.clone()).unwrap_or_default(),
                    model: common.model.clone().or(file.model.clone()).unwrap_or_else(|| "gpt-4o".into()),
                    timeout_secs: common.timeout_secs.or(file.timeout_secs).unwrap_or(60),
                    max_retries: common.max_retries.or(file.max_retries).unwrap_or(2),
                },
                templates,
                temperature: common.temperature.or(file.temperature).unwrap_or(0.0),
            };
            pc.validate()?;
            PlannerChoice::Http(pc)
        }
    };
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(CliConfig {
        scenarios,
        planner,
        seed: seed.or(file.seed).unwrap_or(0),
        trials,
        ablation,
        out: common.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        render: render || file.render.unwrap_or(false),
        workers: workers.or(file.workers).unwrap_or(default_workers).max(1),
    })
}

/// Trace document for one episode: the result plus any failed model calls.
pub fn trace_json(result: &EpisodeResult, log: &[CallLog]) -> String {
    let mut v = serde_json::to_value(result).expect("episode serializes");
    if !log.is_empty() {
        v["planner_calls"] = serde_json::to_value(log).expect("log serializes");
    }
    serde_json::to_string_pretty(&v).expect("value serializes")
}

fn manifest(set: &CandidateSet) -> String {
    let list: Vec<Value> = set
        .candidates
        .iter()
        .enumerate()
        .map(|(k, c)| {
            json!({
                "index": k,
                "file": format!("cand_{k}.svg"),
                "pose": c.pose,
                "reachability_score": c.reachability_score,
                "overhang": c.overhang,
                "settle": c.settle.status,
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({"object_id": set.object_id, "candidates": list})).expect("manifest serializes")
}

fn write_candidates(out: &OutDir, dir: &str, set: &CandidateSet) -> Result<(), CliError> {
    for (k, c) in set.candidates.iter().enumerate() {
        out.write(format!("{dir}/cand_{k}.svg"), &c.rendering)?;
    }
    out.write(format!("{dir}/manifest.json"), &manifest(set))?;
    Ok(())
}

fn episode_name(result: &EpisodeResult) -> String {
    format!("{}_seed{}", result.scenario_id, result.seed)
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    let file = read_config(args.common.config.as_deref())?;
    let cfg = resolve(&args.common, &file, vec![args.scenario.clone()], args.seed, None, None, args.render)?;
    let scenario = load_scenario(&args.scenario)?;
    let out = OutDir::create(&cfg.out)?;
    let (result, log) = timed_episode(&scenario, cfg.seed, cfg.ablation, &HarnessConfig::default(), &cfg.planner)?;
    let name = episode_name(&result);
    let path = out.write(format!("{name}.json"), &trace_json(&result, &log))?;
    if cfg.render {
        if let Ok(start) = randomize(&scenario, cfg.seed) {
            out.write(format!("{name}/scene.svg"), &render_scene(&start.scene))?;
        }
        for (a, attempt) in result.attempts.iter().enumerate() {
            for r in &attempt.rehearsal {
                if let Some(set) = &r.candidates {
                    write_candidates(&out, &format!("{name}/a{a}_s{}", r.step_index), set)?;
                }
            }
        }
    }
    println!(
        "{name}: {} after {} replan(s), {} attempt(s); trace {}",
        if result.success { "success" } else { "failure" },
        result.replans_used,
        result.attempts.len(),
        path.display()
    );
    for (a, attempt) in result.attempts.iter().enumerate() {
        let status = attempt.failure.as_ref().map_or("ok".to_string(), Failure::error_text);
        println!("  attempt {a}: {} => {status}", attempt.skeleton.summary());
        if let Some(i) = &attempt.insight {
            println!("    insight: {i}");
        }
    }
    if result.success {
        return Ok(0);
    }
    let last = result.attempts.last().and_then(|a| a.failure.as_ref());
    Ok(if matches!(last, Some(Failure::NoFeasiblePose { .. })) { 3 } else { 1 })
}

fn cmd_bench(args: BenchArgs) -> Result<i32, CliError> {
    let file = read_config(args.common.config.as_deref())?;
    let ids = args
        .scenarios
        .clone()
        .or(file.scenarios.clone())
        .unwrap_or_else(|| BUILTIN_IDS.iter().map(|s| s.to_string()).collect());
    let cfg = resolve(&args.common, &file, ids, None, args.trials, args.workers, false)?;
    let scenarios: Vec<Scenario> = cfg.scenarios.iter().map(|s| load_scenario(s)).collect::<Result<_, _>>()?;
    let out = OutDir::create(&cfg.out)?;
    let results = run_parallel(&scenarios, cfg.trials, cfg.ablation, &HarnessConfig::default(), &cfg.planner, cfg.workers)?;
    for (r, log) in &results {
        out.write(format!("traces/{}.json", episode_name(r)), &trace_json(r, log))?;
    }
    let plain: Vec<EpisodeResult> = results.into_iter().map(|(r, _)| r).collect();
    let rows = summarize(&plain);
    let path = out.write("results.csv", &csv_string(&rows))?;
    let label = match cfg.ablation {
        Ablation::Full => "Ours",
        Ablation::NoPose => "w/o pose",
        Ablation::NoReflection => "w/o refl",
    };
    print!("{}", success_table(&rows, label));
    println!("results written to {}", path.display());
    Ok(0)
}

fn cmd_sample(args: SampleArgs) -> Result<i32, CliError> {
    let file = read_config(args.common.config.as_deref())?;
    let cfg = resolve(&args.common, &file, vec![args.scenario.clone()], args.seed, None, None, false)?;
    let scenario = load_scenario(&args.scenario)?;
    let (plan, label): (PlanSkeleton, String) = match (&args.plan, args.plan_index) {
        (Some(p), _) => (parse_skeleton(&read_text(p)?)?, "file".into()),
        (None, idx) => {
            let k = idx.unwrap_or(scenario.fallback_plans.len() - 1);
            let p = scenario
                .fallback_plans
                .get(k)
                .ok_or_else(|| CliError::input(format!("scenario has {} fallback plans", scenario.fallback_plans.len())))?;
            (p.clone(), format!("p{k}"))
        }
    };
    let (_, set) = inspect_step(&scenario, cfg.seed, &plan, args.step, &HarnessConfig::default())?;
    let out = OutDir::create(&cfg.out)?;
    let dir = format!("sample_{}_{label}_s{}", scenario.id, args.step);
    write_candidates(&out, &dir, &set)?;
    println!(
        "{} candidate(s) for {} written to {}",
        set.candidates.len(),
        plan.steps[args.step],
        out.root().join(dir).display()
    );
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32, CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let sk = parse_skeleton(&read_text(&args.skeleton)?)?;
    match validate_skeleton(&sk, &SymbolicState::from_scene(&scenario.scene)) {
        Ok(()) => {
            println!("ok: {}", sk.summary());
            Ok(0)
        }
        Err(vs) => {
            for v in vs {
                println!("step {}: {} violates {}", v.step, sk.steps[v.step], v.predicate);
            }
            Ok(1)
        }
    }
}

fn cmd_render(args: RenderArgs) -> Result<i32, CliError> {
    let file = read_config(args.common.config.as_deref())?;
    let cfg = resolve(&args.common, &file, vec![args.scenario.clone()], args.seed, None, None, false)?;
    let scenario = load_scenario(&args.scenario)?;
    let start = randomize(&scenario, cfg.seed)?;
    let out = OutDir::create(&cfg.out)?;
    let path = out.write(format!("{}_seed{}.svg", scenario.id, cfg.seed), &render_scene(&start.scene))?;
    println!("{}", path.display());
    Ok(0)
}

fn cmd_export(out: &Path) -> Result<i32, CliError> {
    let out = OutDir::create(out)?;
    for id in BUILTIN_IDS {
        out.write(format!("{id}.json"), &(builtin(id)?.to_json() + "\n"))?;
    }
    println!("{} scenarios written to {}", BUILTIN_IDS.len(), out.root().display());
    Ok(0)
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Render(a) => cmd_render(a),
        Command::Scenarios { command: ScenariosCommand::Export { out } } => cmd_export(&out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
