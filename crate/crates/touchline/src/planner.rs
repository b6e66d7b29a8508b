//! The planning agent: given a question, its materials, the task catalog
//! and the toolbox text, obtain and validate an ordered tool chain.
//!
//! Planning is one model call plus validation; unresolvable tool names and
//! parse failures trigger a bounded repair loop. The catalog's recommended
//! chains are advisory context only — the model's chain is what runs.

use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::protocol::{self, ParseError};
use crate::toolbox::{Registry, ToolboxError};

const PLAN_PROMPT: &str = include_str!("../data/plan_prompt.txt");
const BUILTIN_TASKS: &str = include_str!("../data/tasks.txt");

/// One task-catalog entry: taxonomy text plus its recommended chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskCatalogEntry {
    pub index: usize,
    pub title: String,
    pub description: String,
    pub recommended_chain: Vec<String>,
}

/// The task catalog injected into the planning prompt. The raw text is kept
/// verbatim for prompt substitution; entries carry the parsed form.
#[derive(Debug, Clone)]
pub struct TaskCatalog {
    entries: Vec<TaskCatalogEntry>,
    raw: String,
}

impl TaskCatalog {
    /// The built-in fourteen-task catalog.
    pub fn builtin() -> Self {
        Self::from_text(BUILTIN_TASKS).expect("built-in catalog parses")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, PlanError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| PlanError::Catalog(format!("{}: {e}", path.display())))?;
        Self::from_text(&raw)
    }

    /// Parses numbered task blocks: a `TaskN:` line carrying the
    /// `****title****` and description, followed by a `Recommended chain:`
    /// line. Multiplicity annotations like "(twice)" expand to repeated
    /// chain entries.
    pub fn from_text(raw: &str) -> Result<Self, PlanError> {
        let mut entries: Vec<TaskCatalogEntry> = Vec::new();
        for line in raw.lines() {
            let line = line.trim();
            if let Some(rest) = task_header(line) {
                let (index, rest) = rest;
                let (title, description) = split_title(rest)
                    .ok_or_else(|| PlanError::Catalog(format!("task {index}: no ****title****")))?;
                entries.push(TaskCatalogEntry {
                    index,
                    title,
                    description,
                    recommended_chain: Vec::new(),
                });
            } else if let Some(rest) = line.strip_prefix("Recommended chain:") {
                let entry = entries
                    .last_mut()
                    .ok_or_else(|| PlanError::Catalog("chain line before any task".into()))?;
                entry.recommended_chain = expand_chain(rest);
            }
        }
        if entries.is_empty() {
            return Err(PlanError::Catalog("no task blocks found".into()));
        }
        for entry in &entries {
            if entry.recommended_chain.is_empty() {
                return Err(PlanError::Catalog(format!(
                    "task {} has no recommended chain",
                    entry.index
                )));
            }
        }
        Ok(Self { entries, raw: raw.trim_end().to_string() })
    }

    pub fn entries(&self) -> &[TaskCatalogEntry] {
        &self.entries
    }

    /// The verbatim catalog text substituted for `{tasks}` in prompts.
    pub fn render(&self) -> &str {
        &self.raw
    }
}

fn task_header(line: &str) -> Option<(usize, &str)> {
    let rest = line.strip_prefix("Task")?;
    let colon = rest.find(':')?;
    let index: usize = rest[..colon].trim().parse().ok()?;
    Some((index, rest[colon + 1..].trim()))
}

fn split_title(rest: &str) -> Option<(String, String)> {
    let start = rest.find("****")?;
    let after = &rest[start + 4..];
    let end = after.find("****")?;
    let title = after[..end].trim().to_string();
    let description = after[end + 4..].trim().to_string();
    (!title.is_empty()).then_some((title, description))
}

/// Splits an arrow chain and expands parenthesized multiplicity
/// annotations: "Camera Detection (twice)" becomes two entries.
fn expand_chain(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for name in protocol::split_chain(s) {
        let (bare, count) = strip_multiplicity(&name);
        for _ in 0..count {
            out.push(bare.clone());
        }
    }
    out
}

fn strip_multiplicity(name: &str) -> (String, usize) {
    let name = name.trim();
    if let (Some(open), true) = (name.rfind('('), name.ends_with(')')) {
        let annotation = name[open + 1..name.len() - 1].trim().to_lowercase();
        let count = match annotation.as_str() {
            "once" => Some(1),
            "twice" => Some(2),
            "thrice" => Some(3),
            other => other.strip_suffix("times").and_then(|n| parse_count(n.trim())),
        };
        if let Some(count) = count {
            return (name[..open].trim().to_string(), count.max(1));
        }
    }
    (name.to_string(), 1)
}

fn parse_count(word: &str) -> Option<usize> {
    if let Ok(n) = word.parse() {
        return Some(n);
    }
    let words = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    words.iter().position(|w| *w == word).map(|i| i + 1)
}

/// A validated plan: canonical chain plus the raw model response retained
/// for the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResult {
    pub known_info: Vec<String>,
    pub chain: Vec<String>,
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedChain {
    pub chain: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("planning failed after {} attempts", attempts.len())]
    PlanFailed { attempts: Vec<String> },
    #[error("unknown tool {name:?} in chain (suggestions: {suggestions:?})")]
    UnknownTool { name: String, suggestions: Vec<String> },
    #[error("tool chain is empty")]
    EmptyChain,
    #[error("catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Role label for a material path, derived from its extension.
pub fn material_role(path: &str) -> &'static str {
    let ext = std::path::Path::new(path)
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "mp4" | "avi" | "mkv" | "mov" | "webm" | "mpg" | "mpeg" => "video",
        "png" | "jpg" | "jpeg" | "bmp" | "gif" | "webp" => "image",
        _ => "file",
    }
}

/// Role-labelled material manifest: `"video": {"a.mp4"}, "image": {"x.png"}`,
/// or `None` when empty.
pub fn material_manifest(materials: &[String]) -> String {
    if materials.is_empty() {
        return "None".to_string();
    }
    let mut groups: Vec<(&'static str, Vec<&String>)> = Vec::new();
    for m in materials {
        let role = material_role(m);
        match groups.iter_mut().find(|(r, _)| *r == role) {
            Some((_, list)) => list.push(m),
            None => groups.push((role, vec![m])),
        }
    }
    groups
        .iter()
        .map(|(role, list)| {
            let quoted: Vec<String> = list.iter().map(|m| format!("\"{m}\"")).collect();
            format!("\"{role}\": {{{}}}", quoted.join(", "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Instantiates the decomposition prompt: toolbox text, catalog text, the
/// question and its material manifest.
pub fn build_planning_prompt(
    question: &str,
    materials: &[String],
    registry: &Registry,
    catalog: &TaskCatalog,
) -> String {
    PLAN_PROMPT
        .replace("{toolbox_descriptions}", &registry.render_descriptions())
        .replace("{tasks}", catalog.render())
        .replace("{question}", question)
        .replace("{material_manifest}", &material_manifest(materials))
}

/// Resolves every chain element to its canonical registry name, preserving
/// order and multiplicity. Compatibility issues (a tool that needs material
/// input with neither a producing step before it nor question materials)
/// are advisory warnings, never errors.
pub fn validate_chain(
    chain: &[String],
    registry: &Registry,
    materials: &[String],
) -> Result<ValidatedChain, PlanError> {
    if chain.is_empty() {
        return Err(PlanError::EmptyChain);
    }
    let mut canonical = Vec::with_capacity(chain.len());
    let mut warnings = Vec::new();
    let mut produced_so_far = false;
    for name in chain {
        let binding = registry.resolve(name).map_err(|e| match e {
            ToolboxError::NotFound { name, suggestions } => {
                PlanError::UnknownTool { name, suggestions }
            }
            other => PlanError::Catalog(other.to_string()),
        })?;
        if binding.material_required && !produced_so_far && materials.is_empty() {
            warnings.push(format!(
                "{} needs material input, but no earlier step produces one and the question has none",
                binding.descriptor.name
            ));
        }
        if binding.produces_material {
            produced_so_far = true;
        }
        canonical.push(binding.descriptor.name.clone());
    }
    Ok(ValidatedChain { chain: canonical, warnings })
}

/// The planning agent.
pub struct Planner<'a> {
    registry: &'a Registry,
    catalog: &'a TaskCatalog,
    gateway: &'a Gateway,
    max_retries: u32,
}

impl<'a> Planner<'a> {
    pub fn new(registry: &'a Registry, catalog: &'a TaskCatalog, gateway: &'a Gateway) -> Self {
        Self { registry, catalog, gateway, max_retries: 2 }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn build_prompt(&self, question: &str, materials: &[String]) -> String {
        build_planning_prompt(question, materials, self.registry, self.catalog)
    }

    /// Sends the planning prompt, parses and canonicalizes the chain; on a
    /// parse failure or unresolvable name, re-prompts with a repair message
    /// naming the failure, up to `max_retries` extra attempts.
    pub fn plan(&self, question: &str, materials: &[String]) -> Result<PlanResult, PlanError> {
        let mut request = ChatRequest::user("planner", self.build_prompt(question, materials));
        let mut attempts = Vec::new();
        for attempt in 0..=self.max_retries {
            let response = self.gateway.complete(&request)?;
            attempts.push(response.text.clone());
            let repair = match protocol::parse_plan(&response.text) {
                Ok(parsed) => match validate_chain(&parsed.chain, self.registry, materials) {
                    Ok(validated) => {
                        for warning in &validated.warnings {
                            log::warn!("plan compatibility: {warning}");
                        }
                        return Ok(PlanResult {
                            known_info: parsed.known_info,
                            chain: validated.chain,
                            raw_response: response.text,
                        });
                    }
                    Err(PlanError::UnknownTool { name, suggestions }) => {
                        let hint = if suggestions.is_empty() {
                            String::new()
                        } else {
                            format!(" Did you mean {}?", suggestions.join(" or "))
                        };
                        format!(
                            "\"{name}\" is not a tool in the toolbox.{hint} Respond again with the same two-line format using exact tool names from the toolbox."
                        )
                    }
                    Err(other) => return Err(other),
                },
                Err(ParseError::EmptyChain) => {
                    "Your tool chain was empty. Respond again with a non-empty Tool Chain line."
                        .to_string()
                }
                Err(err) => format!(
                    "Your response could not be parsed ({err}). Respond with exactly two lines: \"Known Info: {{$...$}}\" and \"Tool Chain: [*Tool A* -> *Tool B*]\"."
                ),
            };
            if attempt < self.max_retries {
                request = request.with_followup(response.text, repair);
            }
        }
        Err(PlanError::PlanFailed { attempts })
    }
}
