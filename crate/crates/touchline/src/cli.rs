//! Operator entry points: non-interactive, exit-code contracted commands
//! binding the runtime modules together.
//!
//! Configuration precedence is flags > environment > config file >
//! defaults. The gateway mode is one of `remote`, `scripted:<file>`,
//! `replay:<dir>` or `record:<dir>` (remote calls recorded into a replay
//! cache).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::curation::{self, DistractorStrategy, TemplateBank};
use crate::executor::{self, Agent};
use crate::gateway::{
    Gateway, RecordingBackend, RemoteBackend, RemoteConfig, ReplayBackend, ResponseCache,
    ScriptedBackend,
};
use crate::harness::{self, ReportFormat, Task};
use crate::kb::{self, Corpus};
use crate::planner::{Planner, TaskCatalog};
use crate::toolbox::{self, FixtureTable, Registry, StubMode};

#[derive(Parser)]
#[command(name = "touchline", version, about = "Tool-chain agent runtime and benchmark harness for soccer QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigFlags {
    /// TOML config file; flags and environment override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Gateway mode: remote | scripted:<file> | replay:<dir> | record:<dir>.
    #[arg(long, global = true)]
    gateway: Option<String>,
    /// Entity corpus directory.
    #[arg(long, global = true)]
    entities: Option<PathBuf>,
    /// Match index file (delimited table with candidate columns).
    #[arg(long = "matches", global = true)]
    match_index: Option<PathBuf>,
    /// Stub fixture table (JSON rows).
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Adapter config for stub tools in live mode (JSON).
    #[arg(long, global = true)]
    adapters: Option<PathBuf>,
    /// Task catalog override file.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Evaluation concurrency width.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// Seed for curation randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for execution trace files.
    #[arg(long, global = true)]
    trace_dir: Option<PathBuf>,
    /// Planner repair-retry budget.
    #[arg(long, global = true)]
    max_plan_retries: Option<u32>,
    /// Executor step-limit floor.
    #[arg(long, global = true)]
    min_steps_floor: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct ConfigFile {
    gateway: Option<String>,
    entities: Option<PathBuf>,
    matches: Option<PathBuf>,
    fixtures: Option<PathBuf>,
    adapters: Option<PathBuf>,
    catalog: Option<PathBuf>,
    concurrency: Option<usize>,
    seed: Option<u64>,
    trace_dir: Option<PathBuf>,
    max_plan_retries: Option<u32>,
    min_steps_floor: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question end to end and write its trace.
    Ask {
        question: String,
        /// Material file path; repeatable.
        #[arg(long = "material")]
        materials: Vec<PathBuf>,
        /// Print the planned chain without executing it.
        #[arg(long)]
        plan_only: bool,
        /// Trace output file (defaults to <trace-dir>/ask.trace.txt).
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Evaluate a QA dataset and write accuracy reports.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Restrict to these tasks, e.g. --tasks Q1,Q2.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        /// Output directory for report.txt / report.json.
        #[arg(long, default_value = "reports")]
        report_dir: PathBuf,
    },
    /// Build the knowledge-base corpus and print its counts.
    Ingest,
    /// List the tool registry and its alias table.
    Tools,
    /// Run the curation pipeline over an annotation file.
    Curate {
        /// Annotation records, one JSON object per line.
        #[arg(long)]
        annotations: PathBuf,
        /// Template bank override (JSON).
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Label pool file, one label per line (category strategy).
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Distractor strategy: category | confuser.
        #[arg(long, default_value = "category")]
        strategy: String,
        /// Output dataset file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a dataset and write the manual-review worksheet.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        /// Worksheet output path (TSV).
        #[arg(long)]
        worksheet: Option<PathBuf>,
    },
}

/// Resolved configuration after applying precedence.
struct RunConfig {
    gateway_mode: String,
    entities: Option<PathBuf>,
    match_index: Option<PathBuf>,
    fixtures: Option<PathBuf>,
    adapters: Option<PathBuf>,
    catalog: Option<PathBuf>,
    concurrency: usize,
    seed: u64,
    trace_dir: PathBuf,
    max_plan_retries: u32,
    min_steps_floor: usize,
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl RunConfig {
    fn resolve(flags: &ConfigFlags) -> Result<Self, String> {
        let file: ConfigFile = match &flags.config {
            Some(path) => {
                let raw = std::fs::read_to_string(path)
                    .map_err(|e| format!("config {}: {e}", path.display()))?;
                toml::from_str(&raw).map_err(|e| format!("config {}: {e}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        Ok(Self {
            gateway_mode: flags
                .gateway
                .clone()
                .or_else(|| env_var("TOUCHLINE_GATEWAY"))
                .or(file.gateway)
                .unwrap_or_else(|| "remote".into()),
            entities: flags
                .entities
                .clone()
                .or_else(|| env_var("TOUCHLINE_ENTITIES").map(PathBuf::from))
                .or(file.entities),
            match_index: flags
                .match_index
                .clone()
                .or_else(|| env_var("TOUCHLINE_MATCHES").map(PathBuf::from))
                .or(file.matches),
            fixtures: flags.fixtures.clone().or(file.fixtures),
            adapters: flags.adapters.clone().or(file.adapters),
            catalog: flags.catalog.clone().or(file.catalog),
            concurrency: flags.concurrency.or(file.concurrency).unwrap_or(4).max(1),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            trace_dir: flags
                .trace_dir
                .clone()
                .or(file.trace_dir)
                .unwrap_or_else(|| PathBuf::from("traces")),
            max_plan_retries: flags.max_plan_retries.or(file.max_plan_retries).unwrap_or(2),
            min_steps_floor: flags.min_steps_floor.or(file.min_steps_floor).unwrap_or(6),
        })
    }

    fn build_gateway(&self) -> Result<Gateway, String> {
        let mode = self.gateway_mode.as_str();
        if mode == "remote" {
            let config = RemoteConfig::from_env().map_err(|e| e.to_string())?;
            let backend = RemoteBackend::new(config).map_err(|e| e.to_string())?;
            return Ok(Gateway::with_width(Arc::new(backend), self.concurrency));
        }
        if let Some(path) = mode.strip_prefix("scripted:") {
            let backend = ScriptedBackend::from_file(Path::new(path)).map_err(|e| e.to_string())?;
            return Ok(Gateway::with_width(Arc::new(backend), self.concurrency));
        }
        if let Some(dir) = mode.strip_prefix("replay:") {
            let backend = ReplayBackend::open(dir).map_err(|e| e.to_string())?;
            return Ok(Gateway::with_width(Arc::new(backend), self.concurrency));
        }
        if let Some(dir) = mode.strip_prefix("record:") {
            let remote = RemoteConfig::from_env().map_err(|e| e.to_string())?;
            let backend = RemoteBackend::new(remote).map_err(|e| e.to_string())?;
            let cache = Arc::new(ResponseCache::open(dir).map_err(|e| e.to_string())?);
            let recording = RecordingBackend::new(Arc::new(backend), cache);
            return Ok(Gateway::with_width(Arc::new(recording), self.concurrency));
        }
        Err(format!(
            "unrecognized gateway mode {mode:?}; use remote, scripted:<file>, replay:<dir> or record:<dir>"
        ))
    }

    fn build_registry(&self) -> Result<Registry, String> {
        let stub_mode = match (&self.fixtures, &self.adapters) {
            (Some(_), Some(_)) => {
                return Err("--fixtures and --adapters are mutually exclusive".into())
            }
            (Some(path), None) => {
                StubMode::Fixtures(FixtureTable::from_file(path).map_err(|e| e.to_string())?)
            }
            (None, Some(path)) => {
                StubMode::Adapters(toolbox::load_adapters(path).map_err(|e| e.to_string())?)
            }
            (None, None) => StubMode::Unconfigured,
        };
        Ok(Registry::builtin(stub_mode))
    }

    fn build_catalog(&self) -> Result<TaskCatalog, String> {
        match &self.catalog {
            Some(path) => TaskCatalog::from_file(path).map_err(|e| e.to_string()),
            None => Ok(TaskCatalog::builtin()),
        }
    }

    fn load_corpus(&self) -> Result<Option<Corpus>, String> {
        match (&self.entities, &self.match_index) {
            (Some(entities), Some(index)) => {
                Ok(Some(kb::ingest(entities, index).map_err(|e| e.to_string())?))
            }
            (None, None) => Ok(None),
            _ => Err("--entities and --matches must be given together".into()),
        }
    }
}

/// Parses argv and runs the selected command; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let config = match RunConfig::resolve(&cli.flags) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Ask { question, materials, plan_only, trace_out } => {
            cmd_ask(&config, &question, &materials, plan_only, trace_out.as_deref())
        }
        Command::Eval { dataset, tasks, report_dir } => {
            cmd_eval(&config, &dataset, &tasks, &report_dir)
        }
        Command::Ingest => cmd_ingest(&config),
        Command::Tools => cmd_tools(&config),
        Command::Curate { annotations, templates, pool, strategy, out } => cmd_curate(
            &config,
            &annotations,
            templates.as_deref(),
            pool.as_deref(),
            &strategy,
            &out,
        ),
        Command::Validate { dataset, worksheet } => {
            cmd_validate(&dataset, worksheet.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_ask(
    config: &RunConfig,
    question: &str,
    materials: &[PathBuf],
    plan_only: bool,
    trace_out: Option<&Path>,
) -> Result<i32, String> {
    for m in materials {
        if !m.exists() {
            eprintln!("error: MaterialMissing: material file {} does not exist", m.display());
            return Ok(2);
        }
    }
    let material_strings: Vec<String> = materials.iter().map(|m| m.display().to_string()).collect();
    let registry = config.build_registry()?;
    let catalog = config.build_catalog()?;
    let gateway = config.build_gateway()?;
    let corpus = config.load_corpus()?;

    if plan_only {
        let planner = Planner::new(&registry, &catalog, &gateway)
            .with_max_retries(config.max_plan_retries);
        return match planner.plan(question, &material_strings) {
            Ok(plan) => {
                println!("Known Info: {}", executor::render_known_info(&plan.known_info));
                println!("Tool Chain: {}", executor::render_chain(&plan.chain));
                Ok(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(2)
            }
        };
    }

    let agent = Agent::new(&registry, &catalog, &gateway, corpus.as_ref())
        .with_limits(config.max_plan_retries, config.min_steps_floor);
    let (answer, trace) = agent.answer(question, &material_strings);
    let trace_path = trace_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.trace_dir.join("ask.trace.txt"));
    trace.write_to(&trace_path).map_err(|e| format!("trace {}: {e}", trace_path.display()))?;
    if trace.completed() {
        println!("{answer}");
        Ok(0)
    } else {
        eprintln!("run aborted: see {}", trace_path.display());
        Ok(2)
    }
}

fn cmd_eval(
    config: &RunConfig,
    dataset: &Path,
    tasks: &[String],
    report_dir: &Path,
) -> Result<i32, String> {
    let mut items = harness::load_dataset(dataset).map_err(|e| e.to_string())?;
    if !tasks.is_empty() {
        let mut filter = Vec::new();
        for t in tasks {
            filter.push(Task::parse(t).ok_or_else(|| format!("unknown task {t:?}"))?);
        }
        items.retain(|item| filter.contains(&item.task));
    }
    if items.is_empty() {
        return Err("no items to evaluate after filtering".into());
    }
    let registry = config.build_registry()?;
    let catalog = config.build_catalog()?;
    let gateway = config.build_gateway()?;
    let corpus = config.load_corpus()?;
    let agent = Agent::new(&registry, &catalog, &gateway, corpus.as_ref())
        .with_limits(config.max_plan_retries, config.min_steps_floor);

    let report = harness::evaluate(
        &items,
        &agent,
        &gateway,
        config.concurrency,
        Some(&config.trace_dir),
    )
    .map_err(|e| e.to_string())?;

    std::fs::create_dir_all(report_dir).map_err(|e| e.to_string())?;
    let human = harness::render_report(&report, ReportFormat::Human);
    let json = harness::render_report(&report, ReportFormat::Json);
    std::fs::write(report_dir.join("report.txt"), &human).map_err(|e| e.to_string())?;
    std::fs::write(report_dir.join("report.json"), &json).map_err(|e| e.to_string())?;
    print!("{human}");
    Ok(0)
}

fn cmd_ingest(config: &RunConfig) -> Result<i32, String> {
    let corpus = config
        .load_corpus()?
        .ok_or("ingest needs --entities and --matches")?;
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for record in corpus.entities() {
        *by_kind.entry(record.kind.as_str()).or_insert(0) += 1;
    }
    let detail = by_kind
        .iter()
        .map(|(k, n)| format!("{k}: {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("entities: {} ({detail})", corpus.entity_count());
    println!("matches: {}", corpus.match_count());
    Ok(0)
}

fn cmd_tools(config: &RunConfig) -> Result<i32, String> {
    let registry = config.build_registry()?;
    println!("{} tools registered:", registry.len());
    for (i, binding) in registry.bindings().enumerate() {
        let kind = match &binding.backend {
            toolbox::ToolBackend::Prompted => "prompted",
            toolbox::ToolBackend::Retrieval(_) => "retrieval",
            toolbox::ToolBackend::Stub { .. } => "stub",
        };
        println!("TOOL{:<3} {:<28} [{kind}]", i + 1, binding.descriptor.name);
    }
    println!("\naliases:");
    for (alias, canonical) in registry.aliases() {
        println!("  {alias} -> {canonical}");
    }
    Ok(0)
}

fn cmd_curate(
    config: &RunConfig,
    annotations: &Path,
    templates: Option<&Path>,
    pool: Option<&Path>,
    strategy: &str,
    out: &Path,
) -> Result<i32, String> {
    let strategy = DistractorStrategy::parse(strategy)
        .ok_or_else(|| format!("unknown strategy {strategy:?}; use category or confuser"))?;
    let bank = match templates {
        Some(path) => TemplateBank::from_file(path).map_err(|e| e.to_string())?,
        None => TemplateBank::builtin(),
    };
    let pool_labels: Vec<String> = match pool {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("pool {}: {e}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    let gateway = match strategy {
        DistractorStrategy::Confuser => Some(config.build_gateway()?),
        DistractorStrategy::Category => None,
    };

    let raw = std::fs::read_to_string(annotations)
        .map_err(|e| format!("annotations {}: {e}", annotations.display()))?;
    let mut items = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: curation::AnnotationRecord = serde_json::from_str(line)
            .map_err(|e| format!("annotations line {}: {e}", lineno + 1))?;
        let openqa = match curation::template_generate(&bank, &record, config.seed) {
            Ok(openqa) => openqa,
            Err(e) => {
                eprintln!("skipping {}: {e}", record.id);
                skipped += 1;
                continue;
            }
        };
        match curation::to_multichoice(&openqa, &pool_labels, strategy, config.seed, gateway.as_ref())
        {
            Ok(item) => items.push(item),
            Err(e) => {
                eprintln!("skipping {}: {e}", record.id);
                skipped += 1;
            }
        }
    }
    let mut body = String::new();
    for item in &items {
        body.push_str(&serde_json::to_string(item).expect("serializable"));
        body.push('\n');
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    std::fs::write(out, body).map_err(|e| format!("{}: {e}", out.display()))?;
    println!("curated {} items ({} skipped) -> {}", items.len(), skipped, out.display());
    Ok(0)
}

fn cmd_validate(dataset: &Path, worksheet: Option<&Path>) -> Result<i32, String> {
    let items = harness::load_dataset_lenient(dataset).map_err(|e| e.to_string())?;
    let report = curation::validate_dataset(&items, &curation::default_targets());
    println!("items: {}", items.len());
    println!("findings: {}", report.findings.len());
    for finding in &report.findings {
        println!("  [{}] {}: {}", finding.kind, finding.id, finding.message);
    }
    println!("balance vs targets:");
    for row in &report.balance {
        println!("  {}: {} / {} ({:+})", row.task, row.count, row.target, row.delta);
    }
    if let Some(path) = worksheet {
        let rendered = curation::render_worksheet(&items, &report);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
        }
        std::fs::write(path, rendered).map_err(|e| e.to_string())?;
        println!("worksheet written to {}", path.display());
    }
    Ok(0)
}
