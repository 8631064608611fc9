//! `promptgen`: prompt-optimization experiments from the shell.
//!
//! Every subcommand reads groups from a JSON manifest, runs against a
//! pluggable chat-model backend (live HTTP, deterministic script, or replay
//! cache), and writes `report.json` plus an aligned `report.txt` into the
//! output directory. `optimize` additionally writes every generated prompt
//! under `prompts/` and, for the pipeline method, the pseudo-labeling
//! decisions as `labels.jsonl`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use promptgen_core::backend::{
    Backend, CachedBackend, HttpBackend, HttpConfig, ReplayCache, ScriptedBackend,
};
use promptgen_core::data::{Group, Manifest, SplitSpec};
use promptgen_core::gpo::Ablation;
use promptgen_core::harness::{
    run_corruption_study, run_experiment_partial, run_grid, run_prompt_eval, ExperimentConfig,
    Method, Strategy,
};
use promptgen_core::report::{
    labels_jsonl, prompt_files, render_corruption, render_experiment, render_grid,
    render_prompt_eval, render_shift, to_json_pretty,
};
use promptgen_core::shift::{diversity_table, shift_matrix, NgramMode, ShiftStat};

#[derive(Parser)]
#[command(
    name = "promptgen",
    version,
    about = "Prompt optimization for black-box chat models, robust to distribution shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize prompts on a source group and evaluate on target test sets.
    Optimize(OptimizeArgs),
    /// Evaluate existing prompt files on target test sets (no optimization).
    Evaluate(EvaluateArgs),
    /// All-pairs source x target score table for the source-only method.
    Grid(GridArgs),
    /// Distribution-shift diagnostics between groups.
    Diagnose(DiagnoseArgs),
    /// Label-noise study: optimize with target labels corrupted at several
    /// fractions and watch test scores degrade.
    CorruptStudy(CorruptStudyArgs),
    /// Score one fixed, hand-written instruction on target test sets.
    FixedPrompt(FixedPromptArgs),
}

/// Where data comes from and where results go.
#[derive(Args)]
struct IoArgs {
    /// Dataset manifest: a JSON list of group entries.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Http,
    Scripted,
    Cached,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
    backend: BackendKind,
    /// Rule script (JSONL) for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Chat-completions base URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent upstream and baked into request digests.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key (read once, never logged).
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Replay-cache file for the cached backend
    /// (default <out>/cache.jsonl; the PROMPTGEN_CACHE env var overrides both).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Maximum concurrent in-flight HTTP requests.
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// Per-request HTTP timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

impl BackendArgs {
    fn scripted(&self) -> Result<ScriptedBackend> {
        let script = self
            .script
            .as_ref()
            .context("the scripted backend requires --script")?;
        let model = self.model.clone().unwrap_or_else(|| "scripted".to_string());
        Ok(ScriptedBackend::from_script(model, script)?)
    }

    fn http(&self) -> Result<HttpBackend> {
        let endpoint = self
            .endpoint
            .as_ref()
            .context("the http backend requires --endpoint")?;
        let model = self
            .model
            .as_ref()
            .context("the http backend requires --model")?;
        let mut config = HttpConfig::new(endpoint, model, &self.api_key_env);
        config.max_in_flight = self.max_in_flight;
        config.timeout = Duration::from_secs(self.timeout_secs);
        Ok(HttpBackend::new(config)?)
    }

    fn cache_path(&self, out: &Path) -> PathBuf {
        match std::env::var_os("PROMPTGEN_CACHE") {
            Some(path) => PathBuf::from(path),
            None => self
                .cache
                .clone()
                .unwrap_or_else(|| out.join("cache.jsonl")),
        }
    }

    fn build(&self, out: &Path) -> Result<Box<dyn Backend>> {
        match self.backend {
            BackendKind::Scripted => Ok(Box::new(self.scripted()?)),
            BackendKind::Http => Ok(Box::new(self.http()?)),
            BackendKind::Cached => {
                let upstream: Box<dyn Backend> = if self.script.is_some() {
                    Box::new(self.scripted()?)
                } else if self.endpoint.is_some() {
                    Box::new(self.http()?)
                } else {
                    bail!("the cached backend wraps an upstream: pass --script or --endpoint");
                };
                let cache = ReplayCache::open(&self.cache_path(out))?;
                Ok(Box::new(CachedBackend::new(upstream, cache)))
            }
        }
    }
}

/// Shared experiment knobs.
#[derive(Args)]
struct KnobArgs {
    /// Demonstrations per optimization.
    #[arg(long, default_value_t = 36)]
    n_shot: usize,
    /// Prompt candidates per optimization (must divide n-shot).
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Independent seeded repetitions.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source examples routed to the training side of the split.
    #[arg(long, default_value_t = 1000)]
    train_size: usize,
    /// Held-out test examples per group.
    #[arg(long, default_value_t = 150)]
    test_size: usize,
    /// Unlabeled target inputs drawn per optimization (default: n-shot).
    #[arg(long)]
    target_sample: Option<usize>,
    /// Validation examples scored per candidate (default: n-shot).
    #[arg(long)]
    val_sample: Option<usize>,
}

impl KnobArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        config.n_shot = self.n_shot;
        config.k_prompts = self.k;
        config.runs = self.runs;
        config.seed = self.seed;
        config.split = SplitSpec {
            train_size: self.train_size,
            seed: 0, // re-derived per run
        };
        config.test_size = self.test_size;
        config.target_sample_size = self.target_sample;
        config.val_sample_size = self.val_sample;
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum CliMethod {
    Ape,
    ApeUt,
    Gpo,
}

impl From<CliMethod> for Method {
    fn from(value: CliMethod) -> Method {
        match value {
            CliMethod::Ape => Method::Ape,
            CliMethod::ApeUt => Method::ApeUt,
            CliMethod::Gpo => Method::Gpo,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum CliAblation {
    None,
    #[value(name = "no-cons")]
    NoCons,
    #[value(name = "no-cons-no-ttrain")]
    NoConsNoTtrain,
}

impl From<CliAblation> for Ablation {
    fn from(value: CliAblation) -> Ablation {
        match value {
            CliAblation::None => Ablation::None,
            CliAblation::NoCons => Ablation::NoConsistency,
            CliAblation::NoConsNoTtrain => Ablation::NoConsistencyNoTargetTrain,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum CliStrategy {
    Top1,
    Ensemble,
}

impl From<CliStrategy> for Strategy {
    fn from(value: CliStrategy) -> Strategy {
        match value {
            CliStrategy::Top1 => Strategy::Top1,
            CliStrategy::Ensemble => Strategy::Ensemble,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    knobs: KnobArgs,
    #[arg(long, value_enum)]
    method: CliMethod,
    /// Group to optimize on.
    #[arg(long)]
    source: String,
    /// Group(s) to evaluate on; repeat the flag for several.
    #[arg(long = "target", required = true)]
    targets: Vec<String>,
    /// Consistency threshold for pseudo-label acceptance
    /// (default: the task metric's standard value).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = CliAblation::None)]
    ablation: CliAblation,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Prompt text file; repeat the flag to evaluate an ensemble.
    #[arg(long = "prompt-file", required = true)]
    prompt_files: Vec<PathBuf>,
    #[arg(long = "target", required = true)]
    targets: Vec<String>,
    #[arg(long, value_enum, default_value_t = CliStrategy::Top1)]
    strategy: CliStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 150)]
    test_size: usize,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    knobs: KnobArgs,
    /// Groups to cross (default: every group in the manifest).
    #[arg(long = "group")]
    groups: Vec<String>,
    #[arg(long, value_enum, default_value_t = CliStrategy::Top1)]
    strategy: CliStrategy,
}

#[derive(Copy, Clone, ValueEnum)]
enum CliStat {
    LabelKl,
    InputSimilarity,
    Coverage,
    Diversity,
}

#[derive(Copy, Clone, ValueEnum)]
enum CliNgram {
    Word1,
    Char4,
}

impl From<CliNgram> for NgramMode {
    fn from(value: CliNgram) -> NgramMode {
        match value {
            CliNgram::Word1 => NgramMode::Word1,
            CliNgram::Char4 => NgramMode::Char4,
        }
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Groups to compare (default: every group in the manifest).
    #[arg(long = "group")]
    groups: Vec<String>,
    #[arg(long, value_enum)]
    stat: CliStat,
    /// N-gram granularity for coverage and diversity.
    #[arg(long, value_enum, default_value_t = CliNgram::Word1)]
    ngram: CliNgram,
    /// Also compute each group against itself.
    #[arg(long)]
    include_diagonal: bool,
}

#[derive(Args)]
struct CorruptStudyArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    knobs: KnobArgs,
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    /// Corruption fraction; repeat the flag for several.
    #[arg(long = "fraction", default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0])]
    fractions: Vec<f64>,
}

#[derive(Args)]
struct FixedPromptArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Instruction text to score as-is.
    #[arg(long)]
    prompt: String,
    #[arg(long = "target", required = true)]
    targets: Vec<String>,
    #[arg(long, value_enum, default_value_t = CliStrategy::Top1)]
    strategy: CliStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 150)]
    test_size: usize,
}

fn load_groups(manifest: &Manifest, names: &[String]) -> Result<Vec<Group>> {
    names
        .iter()
        .map(|name| Ok(manifest.load_group(name)?))
        .collect()
}

/// Group names to use when the user named none: everything in the manifest.
fn names_or_all(manifest: &Manifest, names: &[String]) -> Vec<String> {
    if names.is_empty() {
        manifest.entries.iter().map(|e| e.name.clone()).collect()
    } else {
        names.to_vec()
    }
}

fn write_reports(out: &Path, json: &str, text: &str) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    fs::write(out.join("report.json"), json)?;
    fs::write(out.join("report.txt"), text)?;
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let source = manifest.load_group(&args.source)?;
    let targets = load_groups(&manifest, &args.targets)?;
    let target_refs: Vec<&Group> = targets.iter().collect();

    let mut config =
        ExperimentConfig::new(args.method.into(), args.source.clone(), args.targets.clone());
    args.knobs.apply(&mut config);
    config.threshold = args.threshold;
    config.ablation = args.ablation.into();

    let backend = args.backend.build(&args.io.out)?;
    let (report, failure) =
        run_experiment_partial(backend.as_ref(), &source, &target_refs, &config)?;

    let text = render_experiment(&report);
    write_reports(&args.io.out, &to_json_pretty(&report), &text)?;
    let labels = labels_jsonl(&report);
    if !labels.is_empty() {
        fs::write(args.io.out.join("labels.jsonl"), labels)?;
    }
    let prompts_dir = args.io.out.join("prompts");
    fs::create_dir_all(&prompts_dir)?;
    for (name, content) in prompt_files(&report) {
        fs::write(prompts_dir.join(name), content)?;
    }

    print!("{text}");
    if let Some(failure) = failure {
        bail!(
            "experiment incomplete: {failure} (partial results written to {})",
            args.io.out.display()
        );
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let targets = load_groups(&manifest, &args.targets)?;
    let target_refs: Vec<&Group> = targets.iter().collect();
    let mut prompts = Vec::with_capacity(args.prompt_files.len());
    for path in &args.prompt_files {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading prompt file {}", path.display()))?;
        prompts.push(text.trim_end().to_string());
    }
    let mut config = ExperimentConfig::new(Method::Ape, String::new(), args.targets.clone());
    config.seed = args.seed;
    config.test_size = args.test_size;

    let backend = args.backend.build(&args.io.out)?;
    let report = run_prompt_eval(
        backend.as_ref(),
        &prompts,
        &target_refs,
        args.strategy.into(),
        &config,
    )?;
    let text = render_prompt_eval(&report);
    write_reports(&args.io.out, &to_json_pretty(&report), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let names = names_or_all(&manifest, &args.groups);
    let groups = load_groups(&manifest, &names)?;
    let group_refs: Vec<&Group> = groups.iter().collect();

    let mut config = ExperimentConfig::new(Method::Ape, String::new(), names);
    args.knobs.apply(&mut config);

    let backend = args.backend.build(&args.io.out)?;
    let report = run_grid(backend.as_ref(), &group_refs, &config, args.strategy.into())?;
    let text = render_grid(&report);
    write_reports(&args.io.out, &to_json_pretty(&report), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let names = names_or_all(&manifest, &args.groups);
    let groups = load_groups(&manifest, &names)?;
    let group_refs: Vec<&Group> = groups.iter().collect();

    let matrix = match args.stat {
        CliStat::LabelKl => shift_matrix(
            &group_refs,
            ShiftStat::LabelKl,
            args.ngram.into(),
            args.include_diagonal,
        )?,
        CliStat::InputSimilarity => shift_matrix(
            &group_refs,
            ShiftStat::InputSimilarity,
            args.ngram.into(),
            args.include_diagonal,
        )?,
        CliStat::Coverage => shift_matrix(
            &group_refs,
            ShiftStat::Coverage,
            args.ngram.into(),
            args.include_diagonal,
        )?,
        CliStat::Diversity => diversity_table(&group_refs, args.ngram.into())?,
    };
    let text = render_shift(&matrix);
    write_reports(&args.io.out, &to_json_pretty(&matrix), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_corrupt_study(args: CorruptStudyArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let source = manifest.load_group(&args.source)?;
    let target = manifest.load_group(&args.target)?;

    let mut config =
        ExperimentConfig::new(Method::Gpo, args.source.clone(), vec![args.target.clone()]);
    args.knobs.apply(&mut config);

    let backend = args.backend.build(&args.io.out)?;
    let report = run_corruption_study(
        backend.as_ref(),
        &source,
        &target,
        &args.fractions,
        &config,
    )?;
    let text = render_corruption(&report);
    write_reports(&args.io.out, &to_json_pretty(&report), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_fixed_prompt(args: FixedPromptArgs) -> Result<()> {
    let manifest = Manifest::load(&args.io.manifest)?;
    let targets = load_groups(&manifest, &args.targets)?;
    let target_refs: Vec<&Group> = targets.iter().collect();
    let mut config = ExperimentConfig::new(Method::Ape, String::new(), args.targets.clone());
    config.seed = args.seed;
    config.test_size = args.test_size;

    let backend = args.backend.build(&args.io.out)?;
    let report = run_prompt_eval(
        backend.as_ref(),
        &[args.prompt.clone()],
        &target_refs,
        args.strategy.into(),
        &config,
    )?;
    let text = render_prompt_eval(&report);
    write_reports(&args.io.out, &to_json_pretty(&report), &text)?;
    print!("{text}");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Optimize(args) => cmd_optimize(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::CorruptStudy(args) => cmd_corrupt_study(args),
        Command::FixedPrompt(args) => cmd_fixed_prompt(args),
    }
}
