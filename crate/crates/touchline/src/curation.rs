//! Dataset curation: template-based open-ended QA generation from
//! annotation records, model-based generation with reference validation,
//! conversion to four-option multiple choice with two distractor
//! strategies, and a dataset validator that emits a manual-review
//! worksheet.
//!
//! All randomness is derived per record from (global seed, record id), so
//! generation order and parallelism never perturb outputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway};
use crate::harness::{QAItem, Task};
use crate::text;

const TEMPLATE_BANK: &str = include_str!("../data/templates.json");
const GENERATE_PROMPT: &str = include_str!("../data/curation_generate.txt");
const CONFUSER_PROMPT: &str = include_str!("../data/curation_confuser.txt");

/// The thirteen camera-position classes.
pub const CAMERA_CLASSES: [&str; 13] = [
    "Main camera center",
    "Close-up player or field referee",
    "Close-up side staff",
    "Main camera left",
    "Main behind the goal",
    "Close-up behind the goal",
    "Spider camera",
    "Main camera right",
    "Public",
    "Goal line technology camera",
    "Close-up corner",
    "Inside the goal",
    "Other",
];

/// One source annotation: the labelled payload a QA pair is built from.
/// `payload` must carry an `answer` field; other fields may be referenced
/// by template placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub source: String,
    pub task: Task,
    pub payload: BTreeMap<String, String>,
    #[serde(default)]
    pub materials: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    Template,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: String,
    pub mode: GenerationMode,
}

/// An open-ended QA pair, before multiple-choice conversion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenQA {
    pub question: String,
    pub answer: String,
    pub task: Task,
    pub provenance: Provenance,
    #[serde(default)]
    pub materials: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("no template bank registered for task {0}")]
    NoTemplate(Task),
    #[error("record {id}: {message}")]
    BadRecord { id: String, message: String },
    #[error("model generation rejected: {0}")]
    GenerationRejected(String),
    #[error("label pool holds {available} usable labels, need at least 3")]
    PoolTooSmall { available: usize },
    #[error("confuser distractors rejected: {0}")]
    ConfuserRejected(String),
    #[error("gateway: {0}")]
    Gateway(String),
    #[error("template bank: {0}")]
    Bank(String),
}

/// Per-task question phrasings, loaded from a data file.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    templates: BTreeMap<Task, Vec<String>>,
}

impl TemplateBank {
    pub fn builtin() -> Self {
        Self::from_json(TEMPLATE_BANK).expect("built-in template bank parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, CurationError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CurationError::Bank(format!("{}: {e}", path.display())))?;
        Self::from_json(&raw)
    }

    pub fn from_json(raw: &str) -> Result<Self, CurationError> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(raw).map_err(|e| CurationError::Bank(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for (key, bank) in map {
            let task = Task::parse(&key)
                .ok_or_else(|| CurationError::Bank(format!("unknown task key {key:?}")))?;
            if bank.is_empty() {
                return Err(CurationError::Bank(format!("task {task} has an empty bank")));
            }
            templates.insert(task, bank);
        }
        Ok(Self { templates })
    }

    pub fn templates_for(&self, task: Task) -> Option<&[String]> {
        self.templates.get(&task).map(Vec::as_slice)
    }
}

/// Deterministic per-record RNG from (global seed, record id).
pub fn record_rng(seed: u64, record_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(record_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn payload_answer(record: &AnnotationRecord) -> Result<String, CurationError> {
    let answer = record
        .payload
        .get("answer")
        .map(String::as_str)
        .unwrap_or("")
        .trim()
        .to_string();
    if answer.is_empty() {
        return Err(CurationError::BadRecord {
            id: record.id.clone(),
            message: "payload has no answer".into(),
        });
    }
    match record.task {
        Task::Q3 => {
            if !CAMERA_CLASSES.contains(&answer.as_str()) {
                return Err(CurationError::BadRecord {
                    id: record.id.clone(),
                    message: format!("{answer:?} is not one of the 13 camera classes"),
                });
            }
        }
        Task::Q5 => {
            if answer.parse::<i64>().is_err() {
                return Err(CurationError::BadRecord {
                    id: record.id.clone(),
                    message: format!("jersey number payload {answer:?} is not numeric"),
                });
            }
        }
        _ => {}
    }
    Ok(answer)
}

/// Instantiates one of the task's template phrasings (seeded uniform
/// choice) with the record's payload fields; the answer is the label,
/// copied verbatim.
pub fn template_generate(
    bank: &TemplateBank,
    record: &AnnotationRecord,
    seed: u64,
) -> Result<OpenQA, CurationError> {
    let templates =
        bank.templates_for(record.task).ok_or(CurationError::NoTemplate(record.task))?;
    let answer = payload_answer(record)?;
    let mut rng = record_rng(seed, &record.id);
    let template = &templates[rng.gen_range(0..templates.len())];
    let mut question = template.clone();
    for (key, value) in &record.payload {
        question = question.replace(&format!("{{{key}}}"), value);
    }
    Ok(OpenQA {
        question,
        answer,
        task: record.task,
        provenance: Provenance { record_id: record.id.clone(), mode: GenerationMode::Template },
        materials: record.materials.clone(),
    })
}

/// Prompts the model to write a QA pair from the record's context, and
/// rejects any output whose reference quote is absent from that context.
pub fn model_generate(
    gateway: &Gateway,
    record: &AnnotationRecord,
    context: &str,
) -> Result<OpenQA, CurationError> {
    let prompt = GENERATE_PROMPT.replace("{context}", context);
    let response = gateway
        .complete(&ChatRequest::user("curation:generate", prompt))
        .map_err(|e| CurationError::Gateway(e.to_string()))?;
    let field = |label: &str| -> Option<String> {
        response
            .text
            .lines()
            .find_map(|l| l.trim().strip_prefix(label).map(|v| v.trim().to_string()))
    };
    let question =
        field("Question:").ok_or(CurationError::GenerationRejected("missing Question: line".into()))?;
    let answer =
        field("Answer:").ok_or(CurationError::GenerationRejected("missing Answer: line".into()))?;
    let reference = field("Reference:")
        .ok_or(CurationError::GenerationRejected("missing Reference: line".into()))?;
    if answer.is_empty() {
        return Err(CurationError::GenerationRejected("empty answer".into()));
    }
    if reference.is_empty() || !context.contains(reference.as_str()) {
        return Err(CurationError::GenerationRejected(
            "reference position is absent from the supplied context".into(),
        ));
    }
    Ok(OpenQA {
        question,
        answer,
        task: record.task,
        provenance: Provenance { record_id: record.id.clone(), mode: GenerationMode::Model },
        materials: record.materials.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistractorStrategy {
    /// Sample wrong labels from the same category pool, without replacement.
    Category,
    /// Ask the model for confusion-inducing distractors.
    Confuser,
}

impl DistractorStrategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "category" => Some(Self::Category),
            "confuser" => Some(Self::Confuser),
            _ => None,
        }
    }
}

/// Converts an open QA pair into a four-option item: three distractors by
/// the chosen strategy, the correct answer at a seeded uniform slot.
pub fn to_multichoice(
    openqa: &OpenQA,
    label_pool: &[String],
    strategy: DistractorStrategy,
    seed: u64,
    gateway: Option<&Gateway>,
) -> Result<QAItem, CurationError> {
    let mut rng = record_rng(seed, &openqa.provenance.record_id);
    let distractors = match strategy {
        DistractorStrategy::Category => category_distractors(openqa, label_pool, &mut rng)?,
        DistractorStrategy::Confuser => {
            let gateway = gateway
                .ok_or(CurationError::Gateway("confuser strategy needs a gateway".into()))?;
            confuser_distractors(openqa, gateway)?
        }
    };
    let answer_slot = rng.gen_range(0..4usize);
    let mut options = Vec::with_capacity(4);
    let mut rest = distractors.into_iter();
    for slot in 0..4 {
        if slot == answer_slot {
            options.push(openqa.answer.clone());
        } else {
            options.push(rest.next().expect("three distractors"));
        }
    }
    Ok(QAItem {
        id: format!("{}-mc", openqa.provenance.record_id),
        task: openqa.task,
        question: openqa.question.clone(),
        options,
        answer_index: answer_slot as u8 + 1,
        materials: openqa.materials.clone(),
        modality: None,
    })
}

fn category_distractors(
    openqa: &OpenQA,
    pool: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>, CurationError> {
    let mut usable: Vec<&String> = pool.iter().filter(|l| **l != openqa.answer).collect();
    usable.dedup();
    let mut dedup: Vec<String> = Vec::new();
    for label in usable {
        if !dedup.contains(label) {
            dedup.push(label.clone());
        }
    }
    if dedup.len() < 3 {
        return Err(CurationError::PoolTooSmall { available: dedup.len() });
    }
    dedup.shuffle(rng);
    Ok(dedup.into_iter().take(3).collect())
}

fn confuser_distractors(openqa: &OpenQA, gateway: &Gateway) -> Result<Vec<String>, CurationError> {
    let prompt = CONFUSER_PROMPT
        .replace("{question}", &openqa.question)
        .replace("{answer}", &openqa.answer);
    let response = gateway
        .complete(&ChatRequest::user("curation:confuser", prompt))
        .map_err(|e| CurationError::Gateway(e.to_string()))?;
    let lines: Vec<String> = response
        .text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if lines.len() != 3 {
        return Err(CurationError::ConfuserRejected(format!(
            "expected 3 distractor lines, got {}",
            lines.len()
        )));
    }
    for (i, a) in lines.iter().enumerate() {
        if *a == openqa.answer {
            return Err(CurationError::ConfuserRejected(format!(
                "distractor {} duplicates the answer",
                i + 1
            )));
        }
        for b in &lines[i + 1..] {
            if a == b {
                return Err(CurationError::ConfuserRejected(format!("duplicate distractor {a:?}")));
            }
        }
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// Dataset validation & review worksheet
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceRow {
    pub task: Task,
    pub count: u32,
    pub target: u32,
    pub delta: i64,
}

/// Report-only validation result; nothing here fails a build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub balance: Vec<BalanceRow>,
}

/// Published per-task sample counts, the default balance target.
pub fn default_targets() -> BTreeMap<Task, u32> {
    Task::ALL.into_iter().map(|t| (t, t.benchmark_sample_count())).collect()
}

/// Checks item invariants and near-duplicate questions (normalized
/// equality), and diffs per-task counts against the target table.
pub fn validate_dataset(items: &[QAItem], targets: &BTreeMap<Task, u32>) -> ValidationReport {
    let mut findings = Vec::new();
    let mut first_by_norm: BTreeMap<String, &str> = BTreeMap::new();
    let mut seen_ids: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for item in items {
        if let Err(e) = item.validate() {
            findings.push(Finding { id: item.id.clone(), kind: "invariant".into(), message: e.to_string() });
        }
        if !seen_ids.insert(item.id.as_str()) {
            findings.push(Finding {
                id: item.id.clone(),
                kind: "duplicate-id".into(),
                message: "id occurs more than once".into(),
            });
        }
        let norm = text::normalize(&item.question);
        match first_by_norm.get(norm.as_str()) {
            Some(first) => findings.push(Finding {
                id: item.id.clone(),
                kind: "near-duplicate".into(),
                message: format!("question duplicates item {first}"),
            }),
            None => {
                first_by_norm.insert(norm, &item.id);
            }
        }
    }
    let counts = crate::harness::task_counts(items);
    let balance = targets
        .iter()
        .map(|(task, &target)| {
            let count = counts.get(task).copied().unwrap_or(0);
            BalanceRow { task: *task, count, target, delta: count as i64 - target as i64 }
        })
        .collect();
    ValidationReport { findings, balance }
}

/// Tab-separated review worksheet for the manual selection pass.
pub fn render_worksheet(items: &[QAItem], report: &ValidationReport) -> String {
    let mut flagged: BTreeMap<&str, Vec<&Finding>> = BTreeMap::new();
    for finding in &report.findings {
        flagged.entry(finding.id.as_str()).or_default().push(finding);
    }
    let mut out = String::from("id\ttask\tmodality\tquestion\tanswer\tflags\n");
    for item in items {
        let answer = item
            .options
            .get(item.answer_index as usize - 1)
            .cloned()
            .unwrap_or_default();
        let flags = flagged
            .get(item.id.as_str())
            .map(|fs| fs.iter().map(|f| f.kind.clone()).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            item.id,
            item.task,
            item.modality(),
            item.question.replace('\t', " "),
            answer.replace('\t', " "),
            flags
        ));
    }
    out.push_str("\ntask\tcount\ttarget\tdelta\n");
    for row in &report.balance {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", row.task, row.count, row.target, row.delta));
    }
    out
}
