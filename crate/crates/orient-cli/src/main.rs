//! `orient`: generation, corruption, oracle queries, scoring, and dataset
//! statistics over the benchmark file formats.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
//! invariant violation.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{load_environments, load_lexicons, RunConfig};
use orient_core::dataset::{
    self, emit_baseline_prompt, emit_stage_records, generate, GenerateError, Instance, Split,
    Stage, Subset,
};
use orient_core::eval::{aggregate, parse_outputs_jsonl, EvalError, Scorer};
use orient_core::noise::{classify_severity, corrupt, CorruptionConfig, Severity};
use orient_core::oracle::{solve_detailed, Cue, OracleError, OrientationProblem, Relation};
use orient_core::prompts::BaselineProtocol;
use orient_core::trace::{render_trace, ReasoningTrace, Step1Entry, Step2Entry, Step3Entry};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match &e {
            GenerateError::UnsatisfiablePlan { .. } | GenerateError::InvalidPlan(_) => {
                CliError::Usage(e.to_string())
            }
            GenerateError::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "orient",
    version,
    about = "Deterministic toolkit for egocentric-to-allocentric orientation reasoning benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the benchmark dataset files and a manifest.
    Generate(GenerateArgs),
    /// Corrupt a text towards a target character error rate.
    Corrupt(CorruptArgs),
    /// Solve one orientation problem and print its derivation.
    Oracle(OracleArgs),
    /// Emit baseline prompts for a dataset.
    EmitPrompts(EmitPromptsArgs),
    /// Emit stage-wise training records for a dataset.
    EmitStages(EmitStagesArgs),
    /// Score model outputs against a dataset and write a report.
    Score(ScoreArgs),
    /// Print severity and composition statistics for a dataset.
    Stats(StatsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::EmitPrompts(args) => cmd_emit_prompts(args),
        Command::EmitStages(args) => cmd_emit_stages(args),
        Command::Score(args) => cmd_score(args),
        Command::Stats(args) => cmd_stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Data(format!("cannot rename to {}: {e}", path.display())))
}

fn read_datasets(paths: &[PathBuf]) -> Result<Vec<Instance>, CliError> {
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let instances = dataset::from_jsonl(&text).map_err(|(line, message)| {
            CliError::Data(format!("{}:{line}: {message}", path.display()))
        })?;
        out.extend(instances);
    }
    if out.is_empty() {
        return Err(CliError::Data("no instances in dataset".to_string()));
    }
    Ok(out)
}

fn parse_relation(token: &str) -> Result<Relation, CliError> {
    match token.to_lowercase().as_str() {
        "front" => Ok(Relation::Front),
        "back" | "behind" => Ok(Relation::Back),
        "left" => Ok(Relation::Left),
        "right" => Ok(Relation::Right),
        other => Err(CliError::Usage(format!(
            "unknown relation {other:?} (expected front/back/left/right)"
        ))),
    }
}

fn parse_split(token: &str) -> Result<Split, CliError> {
    match token.to_lowercase().as_str() {
        "train" => Ok(Split::Train),
        "validation" | "val" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        other => Err(CliError::Usage(format!(
            "unknown split {other:?} (expected train/validation/test)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenerateArgs {
    /// Config file (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Environment sources (builtin:<name> or path); repeatable.
    #[arg(long = "env")]
    environments: Vec<String>,
    /// Lexicon sources (builtin:<tag> or path); repeatable.
    #[arg(long = "lexicon")]
    lexicons: Vec<String>,
    /// Utterance language tag for generated instances.
    #[arg(long)]
    language: Option<String>,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    config_hash: String,
    counts: BTreeMap<String, usize>,
    per_combination: BTreeMap<String, usize>,
    variation_kinds: BTreeMap<String, usize>,
    code_switched: BTreeMap<String, usize>,
    files: BTreeMap<String, String>,
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.plan.seed = seed;
    }
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    if !args.environments.is_empty() {
        config.environments = args.environments;
    }
    if !args.lexicons.is_empty() {
        config.lexicons = args.lexicons;
    }
    if let Some(language) = args.language {
        config.plan.language = language;
    }

    let environments = load_environments(&config.environments)?;
    let lexicons = load_lexicons(&config.lexicons)?;
    let instances = generate(&config.plan, &environments, &lexicons)?;

    type Partition = (&'static str, Box<dyn Fn(&Instance) -> bool>);
    let partitions: [Partition; 5] = [
        (
            "train",
            Box::new(|i: &Instance| {
                i.split == Split::Train
                    && matches!(i.subset, Subset::Main | Subset::LinguisticVariation)
            }),
        ),
        (
            "validation",
            Box::new(|i: &Instance| {
                i.split == Split::Validation
                    && matches!(i.subset, Subset::Main | Subset::LinguisticVariation)
            }),
        ),
        (
            "test",
            Box::new(|i: &Instance| {
                i.split == Split::Test
                    && matches!(i.subset, Subset::Main | Subset::LinguisticVariation)
            }),
        ),
        (
            "cross_domain",
            Box::new(|i: &Instance| i.subset == Subset::CrossDomain),
        ),
        (
            "referential_ambiguity",
            Box::new(|i: &Instance| i.subset == Subset::ReferentialAmbiguity),
        ),
    ];

    let mut counts = BTreeMap::new();
    let mut files = BTreeMap::new();
    for (name, predicate) in &partitions {
        let subset: Vec<Instance> = instances.iter().filter(|i| predicate(i)).cloned().collect();
        let file = config.output_dir.join(format!("{name}.jsonl"));
        write_atomic(&file, &dataset::to_jsonl(&subset))?;
        let key = if *name == "referential_ambiguity" {
            "ambiguity".to_string()
        } else {
            name.to_string()
        };
        counts.insert(key, subset.len());
        files.insert(name.to_string(), file.display().to_string());
    }
    counts.insert("total".to_string(), instances.len());

    let mut per_combination = BTreeMap::new();
    let mut variation_kinds = BTreeMap::new();
    let mut code_switched = BTreeMap::new();
    for instance in &instances {
        let mut relations: Vec<Relation> = instance.cues.iter().map(|c| c.relation).collect();
        relations.sort();
        let combo = dataset::combination_key(&relations);
        *per_combination
            .entry(format!("{}:{combo}", instance.subset))
            .or_insert(0) += 1;
        *variation_kinds
            .entry(format!("{:?}", instance.variation).to_lowercase())
            .or_insert(0) += 1;
        if instance.code_switched {
            *code_switched
                .entry(instance.subset.to_string())
                .or_insert(0) += 1;
        }
    }

    let manifest = Manifest {
        seed: config.plan.seed,
        config_hash: config.hash(),
        counts,
        per_combination,
        variation_kinds,
        code_switched,
        files,
    };
    let manifest_path = config.output_dir.join("manifest.json");
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    write_atomic(&manifest_path, &manifest_text)?;
    println!(
        "wrote {} instances to {} (manifest: {})",
        instances.len(),
        config.output_dir.display(),
        manifest_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// corrupt
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CorruptArgs {
    /// Text to corrupt (mutually exclusive with --input).
    #[arg(long)]
    text: Option<String>,
    /// File whose contents to corrupt.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.10)]
    target_cer: f64,
    #[arg(long)]
    seed: u64,
    /// Lexicon source (builtin:<tag> or path).
    #[arg(long, default_value = "builtin:zh-TW")]
    lexicon: String,
    /// Allow edits inside relation phrases.
    #[arg(long)]
    no_protect_relations: bool,
    #[arg(long)]
    landmark_rate: Option<f64>,
    #[arg(long)]
    confusion_bias: Option<f64>,
}

fn cmd_corrupt(args: CorruptArgs) -> Result<(), CliError> {
    let text = match (&args.text, &args.input) {
        (Some(text), None) => text.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?
            .trim_end_matches('\n')
            .to_string(),
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --text or --input".to_string(),
            ))
        }
    };
    let lexicons = load_lexicons(std::slice::from_ref(&args.lexicon))?;
    let lexicon = &lexicons[0];
    let mut config = CorruptionConfig {
        target_cer: args.target_cer,
        seed: args.seed,
        ..CorruptionConfig::default()
    };
    if args.no_protect_relations {
        config.protect_relation_phrases = false;
    }
    if let Some(rate) = args.landmark_rate {
        config.landmark_corruption_rate = rate;
    }
    if let Some(bias) = args.confusion_bias {
        config.confusion_bias = bias;
    }
    let (transcript, achieved) =
        corrupt(&text, &config, lexicon).map_err(|e| CliError::Usage(e.to_string()))?;
    let severity = classify_severity(
        &text,
        &transcript,
        &orient_core::noise::SeverityThresholds::default(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let out = serde_json::json!({
        "transcript": transcript,
        "achieved_cer": achieved,
        "severity": severity,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

#[derive(Args)]
struct OracleArgs {
    /// Environment source (builtin:<name> or path).
    #[arg(long, default_value = "builtin:gongguan")]
    env: String,
    /// Stand at this landmark.
    #[arg(long)]
    anchor: Option<String>,
    /// Stand at this cell, as `x,y`.
    #[arg(long)]
    at: Option<String>,
    /// Cue as `relation=landmark_id`; repeatable.
    #[arg(long = "cue", required = true)]
    cues: Vec<String>,
    /// Lexicon for the printed derivation.
    #[arg(long, default_value = "builtin:en")]
    lexicon: String,
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let environments = load_environments(std::slice::from_ref(&args.env))?;
    let env = &environments[0];
    let lexicons = load_lexicons(std::slice::from_ref(&args.lexicon))?;
    let lexicon = &lexicons[0];

    let user_pos = match (&args.anchor, &args.at) {
        (Some(anchor), None) => {
            env.landmark(anchor)
                .ok_or_else(|| CliError::Data(format!("unknown landmark {anchor}")))?
                .position
        }
        (None, Some(at)) => {
            let parts: Vec<i32> = at
                .split(',')
                .filter_map(|p| p.trim().parse().ok())
                .collect();
            if parts.len() != 2 {
                return Err(CliError::Usage(format!("--at expects x,y, got {at:?}")));
            }
            orient_core::Coord::new(parts[0], parts[1])
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --anchor or --at".to_string(),
            ))
        }
    };

    let mut cues = Vec::new();
    for cue in &args.cues {
        let (relation, id) = cue.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--cue expects relation=landmark_id, got {cue:?}"))
        })?;
        let relation = parse_relation(relation)?;
        let landmark = env
            .landmark(id.trim())
            .ok_or_else(|| CliError::Data(format!("unknown landmark {id}")))?;
        cues.push(Cue {
            relation,
            landmark_id: landmark.id.clone(),
            landmark_pos: landmark.position,
        });
    }

    let problem = OrientationProblem { user_pos, cues };
    let solution = solve_detailed(&problem).map_err(|e| match e {
        OracleError::EmptyProblem => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    })?;

    let mention = |id: &str| -> String {
        env.landmark(id)
            .and_then(|lm| lm.display_name(&lexicon.language))
            .map(str::to_string)
            .unwrap_or_else(|| id.to_string())
    };
    let trace = ReasoningTrace {
        step1: solution
            .derivations
            .iter()
            .map(|d| Step1Entry {
                relation: d.cue.relation,
                mention: mention(&d.cue.landmark_id),
                landmark_id: Some(d.cue.landmark_id.clone()),
            })
            .collect(),
        step2: solution
            .derivations
            .iter()
            .map(|d| Step2Entry {
                mention: mention(&d.cue.landmark_id),
                landmark_id: Some(d.cue.landmark_id.clone()),
                from: (user_pos.x, user_pos.y),
                to: (d.cue.landmark_pos.x, d.cue.landmark_pos.y),
                vector: (d.delta.dx, d.delta.dy),
                direction: d.abs_dir,
            })
            .collect(),
        step3: solution
            .derivations
            .iter()
            .map(|d| Step3Entry {
                mention: mention(&d.cue.landmark_id),
                landmark_id: Some(d.cue.landmark_id.clone()),
                direction: d.abs_dir,
                relation: d.cue.relation,
                facing: solution.facing,
            })
            .collect(),
        final_answer: solution.facing,
    };
    println!("{}", render_trace(&trace, lexicon));
    println!();
    println!("facing: {}", solution.facing);
    Ok(())
}

// ---------------------------------------------------------------------------
// emit-prompts / emit-stages
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EmitPromptsArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// One of b1, b2, b3, b4.
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    output: PathBuf,
    /// Restrict to a split (train/validation/test).
    #[arg(long)]
    split: Option<String>,
}

fn cmd_emit_prompts(args: EmitPromptsArgs) -> Result<(), CliError> {
    let protocol: BaselineProtocol = args.protocol.parse().map_err(CliError::Usage)?;
    let split = args.split.as_deref().map(parse_split).transpose()?;
    let instances = read_datasets(&args.dataset)?;
    let mut lines = String::new();
    let mut count = 0;
    for instance in &instances {
        if split.is_some_and(|s| instance.split != s) {
            continue;
        }
        let record = serde_json::json!({
            "instance_id": instance.id,
            "protocol": protocol,
            "prompt": emit_baseline_prompt(instance, protocol),
        });
        lines.push_str(&serde_json::to_string(&record).expect("serializes"));
        lines.push('\n');
        count += 1;
    }
    write_atomic(&args.output, &lines)?;
    println!("wrote {count} prompts to {}", args.output.display());
    Ok(())
}

#[derive(Args)]
struct EmitStagesArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// One of s1, s2, s3, s4.
    #[arg(long)]
    stage: String,
    #[arg(long)]
    output: PathBuf,
    /// Restrict to a split; defaults to train (training records).
    #[arg(long, default_value = "train")]
    split: String,
    /// Lexicon sources; must cover the dataset languages.
    #[arg(long = "lexicon")]
    lexicons: Vec<String>,
}

fn cmd_emit_stages(args: EmitStagesArgs) -> Result<(), CliError> {
    let stage: Stage = args.stage.parse().map_err(CliError::Usage)?;
    let instances = read_datasets(&args.dataset)?;
    let filtered: Vec<Instance> = if args.split == "all" {
        instances
    } else {
        let split = parse_split(&args.split)?;
        instances
            .into_iter()
            .filter(|i| i.split == split)
            .collect()
    };
    let lexicon_sources = if args.lexicons.is_empty() {
        RunConfig::default().lexicons
    } else {
        args.lexicons
    };
    let lexicons = load_lexicons(&lexicon_sources)?;
    let records = emit_stage_records(&filtered, stage, &lexicons)?;
    let mut lines = String::new();
    for record in &records {
        lines.push_str(&serde_json::to_string(record).expect("serializes"));
        lines.push('\n');
    }
    write_atomic(&args.output, &lines)?;
    println!("wrote {} records to {}", records.len(), args.output.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// Model outputs: JSONL of {"instance_id", "output_text"}.
    #[arg(long)]
    outputs: PathBuf,
    #[arg(long, default_value = "report")]
    output_dir: PathBuf,
    #[arg(long = "env")]
    environments: Vec<String>,
    #[arg(long = "lexicon")]
    lexicons: Vec<String>,
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let instances = read_datasets(&args.dataset)?;
    let by_id: BTreeMap<&str, &Instance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let outputs_text = std::fs::read_to_string(&args.outputs)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.outputs.display())))?;
    let records = parse_outputs_jsonl(&outputs_text)?;
    if records.is_empty() {
        return Err(CliError::Data("no output records to score".to_string()));
    }

    let env_sources = if args.environments.is_empty() {
        RunConfig::default().environments
    } else {
        args.environments
    };
    let lexicon_sources = if args.lexicons.is_empty() {
        RunConfig::default().lexicons
    } else {
        args.lexicons
    };
    let environments = load_environments(&env_sources)?;
    let lexicons = load_lexicons(&lexicon_sources)?;
    let scorer = Scorer::new(&environments, &lexicons);

    let mut aligned = Vec::with_capacity(records.len());
    let mut scores = Vec::with_capacity(records.len());
    for record in &records {
        let instance = by_id
            .get(record.instance_id.as_str())
            .copied()
            .ok_or_else(|| EvalError::UnknownInstanceId(record.instance_id.clone()))?;
        scores.push(scorer.score_instance(instance, &record.output_text)?);
        aligned.push(instance.clone());
    }
    let report = aggregate(&scores, &aligned)?;

    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_atomic(&args.output_dir.join("report.json"), &json)?;
    let text = report.render_text();
    write_atomic(&args.output_dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

#[derive(Args)]
struct StatsArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// Emit machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct StatsReport {
    total: usize,
    by_split: BTreeMap<String, usize>,
    severity_by_subset: BTreeMap<String, BTreeMap<Severity, usize>>,
    combination_counts: BTreeMap<String, usize>,
    code_switch_rates: BTreeMap<String, f64>,
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let instances = read_datasets(&args.dataset)?;
    let mut by_split = BTreeMap::new();
    let mut severity: BTreeMap<String, BTreeMap<Severity, usize>> = BTreeMap::new();
    let mut combinations = BTreeMap::new();
    let mut switch_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for instance in &instances {
        *by_split.entry(instance.split.to_string()).or_insert(0) += 1;
        *severity
            .entry(instance.subset.to_string())
            .or_default()
            .entry(instance.severity)
            .or_insert(0) += 1;
        let mut relations: Vec<Relation> = instance.cues.iter().map(|c| c.relation).collect();
        relations.sort();
        let combo = dataset::combination_key(&relations);
        *combinations.entry(combo).or_insert(0) += 1;
        let entry = switch_counts
            .entry(instance.subset.to_string())
            .or_insert((0, 0));
        entry.0 += 1;
        entry.1 += usize::from(instance.code_switched);
    }
    let report = StatsReport {
        total: instances.len(),
        by_split,
        severity_by_subset: severity,
        combination_counts: combinations,
        code_switch_rates: switch_counts
            .into_iter()
            .map(|(k, (total, switched))| (k, switched as f64 / total as f64))
            .collect(),
    };

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serializes")
        );
        return Ok(());
    }
    println!("instances  {}", report.total);
    println!("splits:");
    for (split, count) in &report.by_split {
        println!("  {split:<12} {count}");
    }
    println!("severity by subset:");
    for (subset, buckets) in &report.severity_by_subset {
        let total: usize = buckets.values().sum();
        println!("  {subset} ({total}):");
        for severity in Severity::ALL {
            let count = *buckets.get(&severity).unwrap_or(&0);
            println!(
                "    {severity:<10} {count:>5}  {:>5.1}%",
                count as f64 * 100.0 / total as f64
            );
        }
    }
    println!("relation combinations:");
    for (combo, count) in &report.combination_counts {
        println!("  {combo:<24} {count}");
    }
    println!("code-switch rates:");
    for (subset, rate) in &report.code_switch_rates {
        println!("  {subset:<24} {:.1}%", rate * 100.0);
    }
    Ok(())
}
