//! Benchmark harness: load four-option QA datasets, run the agent
//! open-ended (options never reach it), map answers to options, and
//! aggregate per-task, per-category and overall accuracy with
//! sample-count weighting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::Agent;
use crate::gateway::{ChatRequest, Gateway};

const CHOICE_PROMPT: &str = include_str!("../data/choice_selection.txt");

/// The thirteen benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
    Q9,
    Q10,
    Q11,
    Q12,
    Q13,
}

impl Task {
    pub const ALL: [Task; 13] = [
        Task::Q1,
        Task::Q2,
        Task::Q3,
        Task::Q4,
        Task::Q5,
        Task::Q6,
        Task::Q7,
        Task::Q8,
        Task::Q9,
        Task::Q10,
        Task::Q11,
        Task::Q12,
        Task::Q13,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Q1 => "Q1",
            Task::Q2 => "Q2",
            Task::Q3 => "Q3",
            Task::Q4 => "Q4",
            Task::Q5 => "Q5",
            Task::Q6 => "Q6",
            Task::Q7 => "Q7",
            Task::Q8 => "Q8",
            Task::Q9 => "Q9",
            Task::Q10 => "Q10",
            Task::Q11 => "Q11",
            Task::Q12 => "Q12",
            Task::Q13 => "Q13",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.as_str() == s.trim())
    }

    /// Text: Q1–Q2; Image: Q3–Q6; Video: Q7–Q13.
    pub fn modality(self) -> Modality {
        match self {
            Task::Q1 | Task::Q2 => Modality::Text,
            Task::Q3 | Task::Q4 | Task::Q5 | Task::Q6 => Modality::Image,
            _ => Modality::Video,
        }
    }

    /// Published benchmark sample count for the task.
    pub fn benchmark_sample_count(self) -> u32 {
        match self {
            Task::Q1 => 1500,
            Task::Q2 => 1200,
            Task::Q3 => 400,
            Task::Q4 => 1000,
            Task::Q5 => 200,
            Task::Q6 => 600,
            Task::Q7 => 400,
            Task::Q8 => 400,
            Task::Q9 => 1000,
            Task::Q10 => 1000,
            Task::Q11 => 800,
            Task::Q12 => 700,
            Task::Q13 => 300,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Text,
    Image,
    Video,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Image, Modality::Video];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "Text",
            Modality::Image => "Image",
            Modality::Video => "Video",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One four-option benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub task: Task,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: u8,
    #[serde(default)]
    pub materials: Vec<String>,
    /// Optional redundant tag in dataset files; must agree with the task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

impl QAItem {
    pub fn modality(&self) -> Modality {
        self.task.modality()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let schema = |field: &str, message: String| HarnessError::Schema {
            id: self.id.clone(),
            field: field.into(),
            message,
        };
        if self.id.is_empty() {
            return Err(schema("id", "empty id".into()));
        }
        if self.options.len() != 4 {
            return Err(schema("options", format!("expected 4 options, got {}", self.options.len())));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if self.options[i] == self.options[j] {
                    return Err(schema("options", format!("options {} and {} are equal", i + 1, j + 1)));
                }
            }
        }
        if !(1..=4).contains(&self.answer_index) {
            return Err(schema("answer_index", format!("{} out of range 1..4", self.answer_index)));
        }
        if let Some(tag) = self.modality {
            if tag != self.task.modality() {
                return Err(schema(
                    "modality",
                    format!("{tag} inconsistent with task {} ({})", self.task, self.task.modality()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("item {id:?} field {field}: {message}")]
    Schema { id: String, field: String, message: String },
    #[error("no sample count available for task {task}")]
    MissingTask { task: Task },
    #[error("open answer could not be mapped to an option; last response: {response:?}")]
    Unmapped { response: String },
    #[error("gateway: {0}")]
    Gateway(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Loads a JSON-lines dataset, validating every item and rejecting
/// duplicate ids.
pub fn load_dataset(path: &Path) -> Result<Vec<QAItem>, HarnessError> {
    let raw = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QAItem = serde_json::from_str(line).map_err(|e| HarnessError::Schema {
            id: format!("line {}", lineno + 1),
            field: "json".into(),
            message: e.to_string(),
        })?;
        item.validate()?;
        if !seen.insert(item.id.clone()) {
            return Err(HarnessError::Schema {
                id: item.id.clone(),
                field: "id".into(),
                message: "duplicate id".into(),
            });
        }
        items.push(item);
    }
    Ok(items)
}

/// Parses a dataset without enforcing item invariants or id uniqueness;
/// the dataset validator reports those as findings instead.
pub fn load_dataset_lenient(path: &Path) -> Result<Vec<QAItem>, HarnessError> {
    let raw = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QAItem = serde_json::from_str(line).map_err(|e| HarnessError::Schema {
            id: format!("line {}", lineno + 1),
            field: "json".into(),
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Per-task item counts of a dataset.
pub fn task_counts(items: &[QAItem]) -> BTreeMap<Task, u32> {
    let mut counts = BTreeMap::new();
    for item in items {
        *counts.entry(item.task).or_insert(0) += 1;
    }
    counts
}

/// Maps an open-ended answer onto one of the four options via the choice
/// prompt. The scan is tolerant: the first `O1`..`O4` token in the response
/// wins; one re-prompt, then the item stays unmapped.
pub fn choice_select(
    gateway: &Gateway,
    question: &str,
    options: &[String],
    open_answer: &str,
    agent_process: &str,
) -> Result<u8, HarnessError> {
    assert_eq!(options.len(), 4, "choice selection needs exactly 4 options");
    let options_str = options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("O{}: {o}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let process = format!("{agent_process}\n\nFinal open-ended answer: {open_answer}");
    let prompt = CHOICE_PROMPT
        .replace("{question}", question)
        .replace("{options_str}", &options_str)
        .replace("{openA_process}", &process);
    let mut request = ChatRequest::user("tool:Choice Selection", prompt);
    let first = gateway.complete(&request).map_err(|e| HarnessError::Gateway(e.to_string()))?;
    if let Some(i) = scan_option_token(&first.text) {
        return Ok(i);
    }
    request = request.with_followup(
        first.text,
        "Reply with exactly one of O1, O2, O3 or O4 and nothing else.",
    );
    let second = gateway.complete(&request).map_err(|e| HarnessError::Gateway(e.to_string()))?;
    match scan_option_token(&second.text) {
        Some(i) => Ok(i),
        None => Err(HarnessError::Unmapped { response: second.text }),
    }
}

/// First standalone `O1`..`O4` token in the text.
fn scan_option_token(text: &str) -> Option<u8> {
    let chars: Vec<char> = text.chars().collect();
    for i in 0..chars.len().saturating_sub(1) {
        if chars[i] != 'O' {
            continue;
        }
        let digit = chars[i + 1];
        if !('1'..='4').contains(&digit) {
            continue;
        }
        let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let after_ok = i + 2 >= chars.len() || !chars[i + 2].is_alphanumeric();
        if before_ok && after_ok {
            return Some(digit as u8 - b'0');
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskStats {
    pub n_items: u32,
    pub n_correct: u32,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

/// Accuracy report: per-task, per-category (sample-weighted) and overall,
/// plus the items that aborted or stayed unmapped.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_task: BTreeMap<Task, TaskStats>,
    pub per_category: BTreeMap<Modality, f64>,
    pub overall: f64,
    pub failures: Vec<Failure>,
}

/// Half-up rounding to one decimal, matching the published presentation.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Sample-count-weighted category and overall accuracies from per-task
/// accuracy percentages. Every task with an accuracy needs a positive
/// count.
pub fn aggregate(
    per_task_accuracy: &BTreeMap<Task, f64>,
    per_task_counts: &BTreeMap<Task, u32>,
) -> Result<(BTreeMap<Modality, f64>, f64), HarnessError> {
    let mut cat_num: BTreeMap<Modality, f64> = BTreeMap::new();
    let mut cat_den: BTreeMap<Modality, f64> = BTreeMap::new();
    let mut num = 0.0;
    let mut den = 0.0;
    for (task, accuracy) in per_task_accuracy {
        let count = match per_task_counts.get(task) {
            Some(&c) if c > 0 => c as f64,
            _ => return Err(HarnessError::MissingTask { task: *task }),
        };
        *cat_num.entry(task.modality()).or_insert(0.0) += accuracy * count;
        *cat_den.entry(task.modality()).or_insert(0.0) += count;
        num += accuracy * count;
        den += count;
    }
    let per_category = cat_num
        .into_iter()
        .map(|(m, n)| (m, round1(n / cat_den[&m])))
        .collect();
    Ok((per_category, round1(num / den)))
}

struct ItemOutcome {
    id: String,
    task: Task,
    correct: bool,
    failure: Option<String>,
}

/// Runs the agent over every item — open-ended, options withheld — then
/// maps each answer via choice selection and scores it. Items may be
/// evaluated concurrently up to `concurrency`; the report is identical
/// regardless of interleaving. Aborted traces and unmapped answers score
/// as incorrect and are listed as failures.
pub fn evaluate(
    items: &[QAItem],
    agent: &Agent,
    gateway: &Gateway,
    concurrency: usize,
    trace_dir: Option<&Path>,
) -> Result<EvalReport, HarnessError> {
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let slots: Mutex<Vec<Option<ItemOutcome>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let width = concurrency.max(1).min(items.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let outcome = evaluate_item(&items[i], agent, gateway, trace_dir);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let outcomes: Vec<ItemOutcome> =
        slots.into_inner().unwrap().into_iter().map(|o| o.expect("all slots filled")).collect();

    let mut per_task: BTreeMap<Task, (u32, u32)> = BTreeMap::new();
    let mut per_cat: BTreeMap<Modality, (u32, u32)> = BTreeMap::new();
    let mut failures = Vec::new();
    let (mut total_n, mut total_correct) = (0u32, 0u32);
    for outcome in &outcomes {
        let entry = per_task.entry(outcome.task).or_insert((0, 0));
        entry.0 += 1;
        let cat = per_cat.entry(outcome.task.modality()).or_insert((0, 0));
        cat.0 += 1;
        total_n += 1;
        if outcome.correct {
            entry.1 += 1;
            cat.1 += 1;
            total_correct += 1;
        }
        if let Some(reason) = &outcome.failure {
            failures.push(Failure { id: outcome.id.clone(), reason: reason.clone() });
        }
    }
    Ok(EvalReport {
        per_task: per_task
            .into_iter()
            .map(|(t, (n, c))| {
                (t, TaskStats { n_items: n, n_correct: c, accuracy: round1(100.0 * c as f64 / n as f64) })
            })
            .collect(),
        per_category: per_cat
            .into_iter()
            .map(|(m, (n, c))| (m, round1(100.0 * c as f64 / n as f64)))
            .collect(),
        overall: round1(100.0 * total_correct as f64 / total_n.max(1) as f64),
        failures,
    })
}

fn evaluate_item(
    item: &QAItem,
    agent: &Agent,
    gateway: &Gateway,
    trace_dir: Option<&Path>,
) -> ItemOutcome {
    let (open_answer, trace) = agent.answer(&item.question, &item.materials);
    if let Some(dir) = trace_dir {
        let path = dir.join(format!("{}.trace.txt", item.id));
        if let Err(e) = trace.write_to(&path) {
            log::warn!("could not write trace for {}: {e}", item.id);
        }
    }
    if !trace.completed() {
        let reason = match &trace.status {
            crate::executor::RunStatus::Aborted(r) => format!("aborted: {r}"),
            crate::executor::RunStatus::Completed => unreachable!(),
        };
        return ItemOutcome { id: item.id.clone(), task: item.task, correct: false, failure: Some(reason) };
    }
    match choice_select(gateway, &item.question, &item.options, &open_answer, &trace.render()) {
        Ok(selected) => ItemOutcome {
            id: item.id.clone(),
            task: item.task,
            correct: selected == item.answer_index,
            failure: None,
        },
        Err(e) => ItemOutcome {
            id: item.id.clone(),
            task: item.task,
            correct: false,
            failure: Some(format!("unmapped: {e}")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Json,
}

/// Renders the report; both formats are byte-deterministic.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let per_task: Vec<serde_json::Value> = report
                .per_task
                .iter()
                .map(|(task, s)| {
                    serde_json::json!({
                        "task": task.as_str(),
                        "modality": task.modality().as_str(),
                        "n_items": s.n_items,
                        "n_correct": s.n_correct,
                        "accuracy": s.accuracy,
                    })
                })
                .collect();
            let per_category: Vec<serde_json::Value> = report
                .per_category
                .iter()
                .map(|(m, a)| serde_json::json!({"category": m.as_str(), "accuracy": a}))
                .collect();
            let failures: Vec<serde_json::Value> = report
                .failures
                .iter()
                .map(|f| serde_json::json!({"id": f.id, "reason": f.reason}))
                .collect();
            let doc = serde_json::json!({
                "per_task": per_task,
                "per_category": per_category,
                "overall": report.overall,
                "failures": failures,
            });
            let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
            out.push('\n');
            out
        }
        ReportFormat::Human => {
            let mut out = String::new();
            out.push_str("Task  Modality  Items  Correct  Accuracy\n");
            for (task, s) in &report.per_task {
                out.push_str(&format!(
                    "{:<5} {:<9} {:<6} {:<8} {:>7.1}\n",
                    task.as_str(),
                    task.modality().as_str(),
                    s.n_items,
                    s.n_correct,
                    s.accuracy
                ));
            }
            out.push_str("\nCategory accuracy (sample-weighted):\n");
            for (m, a) in &report.per_category {
                out.push_str(&format!("{:<6} {:>6.1}\n", m.as_str(), a));
            }
            out.push_str(&format!("\nOverall: {:.1}\n", report.overall));
            if report.failures.is_empty() {
                out.push_str("Failures: none\n");
            } else {
                out.push_str(&format!("Failures ({}):\n", report.failures.len()));
                for f in &report.failures {
                    out.push_str(&format!("  {} — {}\n", f.id, f.reason));
                }
            }
            out
        }
    }
}
