//! `sharp`: planning, route checking, dataset validation and statistics,
//! evaluation and generation prompts. JSON goes to stdout, diagnostics to
//! stderr.

mod refs;

use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sharp_core::dataset::{self, FindingKind, ValidateOptions};
use sharp_core::generators::{default_rules, ActivityRule, LlmClient, LlmEndpointConfig, RuleBasedGenerator};
use sharp_core::graph::{SceneGraph, DEFAULT_K, DEFAULT_W_L};
use sharp_core::metrics;
use sharp_core::plan::{
    run_episode, EpisodeConfig, EpisodeOutput, StepGenerator, DEFAULT_MAX_STEPS, DEFAULT_PROMPT_BUDGET,
};
use sharp_core::route::{default_start_pose, verify_route, AgentPose, Heading, Verdict};
use sharp_core::scene::{load_scene, InstructionPlanTriplet, PlanStep, SceneModel};

/// Exit status when a check reports problems.
const EXIT_FINDINGS: u8 = 1;
/// Exit status for usage errors and fatal failures.
const EXIT_FATAL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Rules,
    Llm,
}

#[derive(Debug, Parser)]
#[command(name = "sharp", version, about = "Scene-graph task planning and benchmark tools")]
struct Cli {
    /// Neighbors per node in the scene graph.
    #[arg(long, global = true, default_value_t = DEFAULT_K)]
    k: usize,
    /// Modulation factor applied to mentioned objects after each step.
    #[arg(long = "w-l", global = true, default_value_t = DEFAULT_W_L)]
    w_l: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Any validation finding fails the run, implicitness violations included.
    #[arg(long, global = true)]
    strict: bool,
    /// Include graph snapshots before and after every step.
    #[arg(long, global = true)]
    dump_graph: bool,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Rules)]
    backend: Backend,
    /// Base URL of the chat-completions service.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every sample of a dataset directory.
    Validate {
        dataset: PathBuf,
        /// Also write findings as JSON Lines to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start pose "x,y[,heading]" used for every scene.
        #[arg(long)]
        start: Option<String>,
    },
    /// Corpus statistics of a dataset directory.
    Stats { dataset: PathBuf },
    /// Generate a plan for an instruction in a scene.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        instruction: String,
        /// Start pose "x,y[,heading]".
        #[arg(long)]
        start: Option<String>,
        /// JSON file with a list of activity rules for the rules backend.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Nodes listed in the scene context of each request.
        #[arg(long, default_value_t = DEFAULT_PROMPT_BUDGET)]
        budget: usize,
    },
    /// Simulate and verify the routes of a plan.
    RouteCheck {
        #[arg(long)]
        scene: PathBuf,
        /// A triplet JSON file whose steps are checked.
        #[arg(long, conflicts_with = "step")]
        triplet: Option<PathBuf>,
        /// Step text; repeat for several steps.
        #[arg(long)]
        step: Vec<String>,
        #[arg(long)]
        start: Option<String>,
    },
    /// Score predictions against references.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
    },
    /// Emit prompts for generating new instruction-plan samples.
    GenPrompts {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        n: i64,
        /// Also write the prompts as plain text, separated by "---" lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing_subscriber::filter::LevelFilter::WARN,
        1 => tracing_subscriber::filter::LevelFilter::INFO,
        _ => tracing_subscriber::filter::LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_max_level(level)
        .with_target(false)
        .init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Validate { dataset, out, start } => cmd_validate(cli, dataset, out.as_deref(), start.as_deref()),
        Command::Stats { dataset } => cmd_stats(dataset),
        Command::Plan {
            scene,
            instruction,
            start,
            rules,
            budget,
        } => cmd_plan(cli, scene, instruction, start.as_deref(), rules.as_deref(), *budget),
        Command::RouteCheck {
            scene,
            triplet,
            step,
            start,
        } => cmd_route_check(scene, triplet.as_deref(), step, start.as_deref()),
        Command::Evaluate {
            predictions,
            references,
        } => cmd_evaluate(predictions, references),
        Command::GenPrompts { scene, n, out } => cmd_gen_prompts(cli, scene, *n, out.as_deref()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(stdout, "{text}") {
        // A closed pipe (e.g. `| head`) is not a failure of the command.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn parse_start(text: &str) -> Result<AgentPose> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        bail!("start pose must be \"x,y\" or \"x,y,heading\", got \"{text}\"");
    }
    let x: f64 = parts[0]
        .parse()
        .with_context(|| format!("bad x in start pose \"{text}\""))?;
    let y: f64 = parts[1]
        .parse()
        .with_context(|| format!("bad y in start pose \"{text}\""))?;
    let heading = match parts.get(2) {
        Some(h) => {
            let deg: u16 = h
                .parse()
                .with_context(|| format!("bad heading in start pose \"{text}\""))?;
            Heading::new(deg).with_context(|| format!("heading must be 0, 90, 180 or 270, got {deg}"))?
        }
        None => Heading::NORTH,
    };
    Ok(AgentPose::new(x, y, heading))
}

fn load_scene_ctx(path: &Path) -> Result<SceneModel> {
    load_scene(path).with_context(|| format!("loading scene {}", path.display()))
}

#[derive(Serialize)]
struct ValidateSummary<'a> {
    dataset: String,
    sample_count: usize,
    finding_count: usize,
    by_kind: std::collections::BTreeMap<&'static str, usize>,
    strict: bool,
    findings: &'a [dataset::ValidationFinding],
}

fn cmd_validate(cli: &Cli, root: &Path, out: Option<&Path>, start: Option<&str>) -> Result<ExitCode> {
    let ds = dataset::load_dataset(root).with_context(|| format!("loading dataset {}", root.display()))?;
    let opts = ValidateOptions {
        start: start.map(parse_start).transpose()?,
    };
    let findings = dataset::validate_dataset(&ds, &opts);
    if let Some(path) = out {
        let mut text = String::new();
        for f in &findings {
            text.push_str(&serde_json::to_string(f)?);
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut by_kind = std::collections::BTreeMap::new();
    for f in &findings {
        *by_kind.entry(f.kind.as_str()).or_insert(0) += 1;
        eprintln!("{}: {}: {}", f.sample_key, f.kind.as_str(), f.detail);
    }
    print_json(&ValidateSummary {
        dataset: root.display().to_string(),
        sample_count: ds.samples.len(),
        finding_count: findings.len(),
        by_kind,
        strict: cli.strict,
        findings: &findings,
    })?;
    let failing = findings
        .iter()
        .any(|f| cli.strict || f.kind != FindingKind::ImplicitnessViolation);
    Ok(if failing {
        ExitCode::from(EXIT_FINDINGS)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_stats(root: &Path) -> Result<ExitCode> {
    let ds = dataset::load_dataset(root).with_context(|| format!("loading dataset {}", root.display()))?;
    let stats = dataset::dataset_stats(&ds)?;
    print_json(&stats)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PlanOutput {
    scene_id: String,
    backend: &'static str,
    k: usize,
    w_l: f64,
    max_steps: usize,
    seed: u64,
    start: AgentPose,
    #[serde(flatten)]
    episode: EpisodeOutput,
}

fn load_rules(path: Option<&Path>) -> Result<Vec<ActivityRule>> {
    let Some(path) = path else {
        return Ok(default_rules());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rules: Vec<ActivityRule> =
        serde_json::from_str(&text).with_context(|| format!("{} is not a list of activity rules", path.display()))?;
    if rules.is_empty() {
        bail!("{} contains no rules", path.display());
    }
    Ok(rules)
}

fn llm_client(cli: &Cli) -> Result<LlmClient> {
    let mut config = LlmEndpointConfig::default();
    if let Some(url) = &cli.endpoint {
        config.base_url = url.clone();
    }
    if let Some(model) = &cli.model {
        config.model_name = model.clone();
    }
    Ok(LlmClient::new(config)?)
}

fn cmd_plan(
    cli: &Cli,
    scene_path: &Path,
    instruction: &str,
    start: Option<&str>,
    rules: Option<&Path>,
    budget: usize,
) -> Result<ExitCode> {
    let scene = load_scene_ctx(scene_path)?;
    let start = match start {
        Some(s) => parse_start(s)?,
        None => default_start_pose(&scene),
    };
    let mut graph = SceneGraph::build(&scene, cli.k).context("building scene graph")?;
    let config = EpisodeConfig {
        max_steps: cli.max_steps,
        w_l: cli.w_l,
        prompt_budget: budget,
    };
    let mut generator: Box<dyn StepGenerator + '_> = match cli.backend {
        Backend::Rules => Box::new(RuleBasedGenerator::new(&scene, load_rules(rules)?, start)),
        Backend::Llm => Box::new(llm_client(cli)?),
    };
    let episode = run_episode(&scene, &mut graph, instruction, &mut generator, &config, cli.dump_graph)
        .context("plan generation failed")?;
    print_json(&PlanOutput {
        scene_id: scene.scene_id.clone(),
        backend: match cli.backend {
            Backend::Rules => "rules",
            Backend::Llm => "llm",
        },
        k: cli.k,
        w_l: cli.w_l,
        max_steps: cli.max_steps,
        seed: cli.seed,
        start,
        episode: EpisodeOutput::from(&episode),
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_route_check(
    scene_path: &Path,
    triplet: Option<&Path>,
    steps: &[String],
    start: Option<&str>,
) -> Result<ExitCode> {
    let scene = load_scene_ctx(scene_path)?;
    let steps: Vec<PlanStep> = match triplet {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let t: InstructionPlanTriplet =
                serde_json::from_str(&text).with_context(|| format!("{} is not a triplet", path.display()))?;
            t.steps
        }
        None => steps
            .iter()
            .enumerate()
            .map(|(i, text)| PlanStep {
                index: i + 1,
                text: text.clone(),
                object_ids: vec![],
                is_final: i + 1 == steps.len(),
            })
            .collect(),
    };
    if steps.is_empty() {
        bail!("no steps given; use --triplet or --step");
    }
    let start = match start {
        Some(s) => parse_start(s)?,
        None => default_start_pose(&scene),
    };
    let reports = verify_route(&steps, &scene, &start);
    print_json(&reports)?;
    let all_ok = reports.iter().all(|r| r.verdict == Verdict::Ok);
    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FINDINGS)
    })
}

fn cmd_evaluate(predictions: &Path, references: &Path) -> Result<ExitCode> {
    let preds = refs::read_keyed(predictions)?;
    let refs_ = refs::read_keyed(references)?;
    let pairs = refs::join_pairs(&preds, &refs_)?;
    let report = metrics::evaluate(&pairs)?;
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PromptsOutput {
    scene_id: String,
    seed: u64,
    prompts: Vec<String>,
}

fn cmd_gen_prompts(cli: &Cli, scene_path: &Path, n: i64, out: Option<&Path>) -> Result<ExitCode> {
    if n <= 0 {
        bail!("--n must be positive, got {n}");
    }
    let scene = load_scene_ctx(scene_path)?;
    let prompts = dataset::generation_prompts(&scene, n as usize, cli.seed)?;
    if let Some(path) = out {
        fs::write(path, prompts.join("\n---\n") + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&PromptsOutput {
        scene_id: scene.scene_id,
        seed: cli.seed,
        prompts,
    })?;
    Ok(ExitCode::SUCCESS)
}
