//! Declarative tool registry and the uniform invocation interface.
//!
//! The built-in registry holds the eighteen tool descriptors; each is bound
//! to one of three backend kinds: prompted (the query goes to the model
//! gateway), retrieval (served by the knowledge base), or stub (served by a
//! fixture table in test mode, or by an external command/endpoint adapter in
//! live mode). The registry is immutable after construction and safe to
//! share across runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway};
use crate::kb::{self, Corpus, SearchOutcome};
use crate::text::levenshtein;

const BUILTIN_DESCRIPTORS: &str = include_str!("../data/tools.txt");
const CAMERA_PROMPT: &str = include_str!("../data/prompt_camera_detection.txt");
const NUMBER_PROMPT: &str = include_str!("../data/prompt_number_recognition.txt");
const SCORE_TIME_PROMPT: &str = include_str!("../data/prompt_score_time.txt");

/// Name drift between the task catalog / prose and the canonical descriptor
/// names. Canonical names are the descriptor "Name:" strings; everything a
/// recommended chain may call a tool maps here.
const ALIASES: [(&str, &str); 11] = [
    ("Vision Language Model", "Jersey Color Relevant VQA"),
    ("Shot Change", "Camera Detection"),
    ("Text Retrieval Augment", "Textual Retrieval Augment"),
    ("Textual Retrieval", "Textual Retrieval Augment"),
    ("Game info Retrieval", "Game Info Retrieval"),
    ("Match Search", "Game Search"),
    ("Match Info Retrieval", "Game Info Retrieval"),
    ("Jersey Number Recognition", "Number Recognition"),
    ("Jersey Color Recognition", "Jersey Color Relevant VQA"),
    ("Answer Selection", "Choice Selection"),
    ("LLM Tool", "LLM"),
];

/// One registry entry: the six-field declarative contract of a tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub ability: String,
    pub query_input: String,
    pub material_input: String,
    pub output: String,
    pub remark: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolRequest {
    pub query: String,
    pub materials: Vec<String>,
}

impl ToolRequest {
    pub fn new(query: impl Into<String>, materials: Vec<String>) -> Self {
        Self { query: query.into(), materials }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolOutput {
    pub text: String,
    pub produced_files: Vec<String>,
}

impl ToolOutput {
    pub fn text_only(text: impl Into<String>) -> Self {
        Self { text: text.into(), produced_files: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalKind {
    GameSearch,
    GameInfo,
    MatchHistory,
    EntitySearch,
    RetrievalAugment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolBackend {
    /// Query text goes to the model gateway verbatim.
    Prompted,
    /// Served by the knowledge base.
    Retrieval(RetrievalKind),
    /// External-model tool: fixture rows in test mode, adapter in live mode.
    /// `default_prompt` carries the registered instruction text for the
    /// image tools, forwarded to adapters alongside the query.
    Stub { default_prompt: Option<&'static str> },
}

#[derive(Debug, Clone)]
pub struct ToolBinding {
    pub descriptor: ToolDescriptor,
    pub backend: ToolBackend,
    /// Material input is compulsory; paths must exist at invocation time.
    pub material_required: bool,
    /// The tool's output contract yields a file usable by later steps.
    pub produces_material: bool,
}

#[derive(Debug, Error)]
pub enum ToolboxError {
    #[error("tool {0:?} is already registered")]
    DuplicateName(String),
    #[error("unknown tool {name:?}{}", suggestion_suffix(suggestions))]
    NotFound { name: String, suggestions: Vec<String> },
    #[error("tool {tool:?} material input: {detail}")]
    MaterialMissing { tool: String, detail: String },
    #[error("no fixture row for tool {tool:?} matching query {query:?}")]
    FixtureMiss { tool: String, query: String },
    #[error("tool {tool:?} backend failure: {message}")]
    BackendFailure { tool: String, message: String },
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Fixture tables and adapters
// ---------------------------------------------------------------------------

/// One deterministic stub response. A row hits when its query pattern
/// matches (exact equality is tried across the whole table before substring
/// containment; an absent pattern matches any query) and its materials
/// pattern, if any, is a substring of the comma-joined material list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureRow {
    pub tool: String,
    #[serde(default)]
    pub query_pattern: Option<String>,
    #[serde(default)]
    pub materials_pattern: Option<String>,
    pub output_text: String,
    #[serde(default)]
    pub produced_files: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureTable {
    rows: Vec<FixtureRow>,
}

impl FixtureTable {
    pub fn new(rows: Vec<FixtureRow>) -> Self {
        Self { rows }
    }

    /// Loads a JSON array of fixture rows.
    pub fn from_file(path: &Path) -> Result<Self, ToolboxError> {
        let raw = fs::read_to_string(path).map_err(|e| ToolboxError::BackendFailure {
            tool: "fixtures".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        let rows = serde_json::from_str(&raw).map_err(|e| ToolboxError::BackendFailure {
            tool: "fixtures".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Ok(Self { rows })
    }

    fn materials_hit(row: &FixtureRow, materials: &[String]) -> bool {
        match &row.materials_pattern {
            None => true,
            Some(p) if p.is_empty() => true,
            Some(p) => materials.join(",").contains(p.as_str()),
        }
    }

    pub fn lookup(&self, tool: &str, request: &ToolRequest) -> Result<ToolOutput, ToolboxError> {
        let rows: Vec<&FixtureRow> = self.rows.iter().filter(|r| r.tool == tool).collect();
        // exact query match first
        for row in &rows {
            if row.query_pattern.as_deref() == Some(request.query.as_str())
                && Self::materials_hit(row, &request.materials)
            {
                return Ok(ToolOutput {
                    text: row.output_text.clone(),
                    produced_files: row.produced_files.clone(),
                });
            }
        }
        // then first declared substring pattern
        for row in &rows {
            let query_hit = match &row.query_pattern {
                None => true,
                Some(p) => request.query.contains(p.as_str()),
            };
            if query_hit && Self::materials_hit(row, &request.materials) {
                return Ok(ToolOutput {
                    text: row.output_text.clone(),
                    produced_files: row.produced_files.clone(),
                });
            }
        }
        Err(ToolboxError::FixtureMiss { tool: tool.to_string(), query: request.query.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterMode {
    Command,
    Endpoint,
}

/// Live-mode bridge to an external model host.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub tool: String,
    pub mode: AdapterMode,
    pub target: String,
}

pub fn load_adapters(path: &Path) -> Result<BTreeMap<String, AdapterConfig>, ToolboxError> {
    let raw = fs::read_to_string(path).map_err(|e| ToolboxError::BackendFailure {
        tool: "adapters".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let list: Vec<AdapterConfig> = serde_json::from_str(&raw).map_err(|e| {
        ToolboxError::BackendFailure { tool: "adapters".into(), message: format!("{}: {e}", path.display()) }
    })?;
    Ok(list.into_iter().map(|a| (a.tool.clone(), a)).collect())
}

/// How stub-bound tools are served.
#[derive(Debug, Clone, Default)]
pub enum StubMode {
    /// No stub hosting configured: any stub invocation fails loudly.
    #[default]
    Unconfigured,
    Fixtures(FixtureTable),
    Adapters(BTreeMap<String, AdapterConfig>),
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Everything a tool invocation may need from the runtime.
#[derive(Default)]
pub struct ToolContext<'a> {
    pub gateway: Option<&'a Gateway>,
    pub corpus: Option<&'a Corpus>,
}

impl<'a> ToolContext<'a> {
    pub fn new(gateway: &'a Gateway, corpus: Option<&'a Corpus>) -> Self {
        Self { gateway: Some(gateway), corpus }
    }

    fn gateway(&self, tool: &str) -> Result<&'a Gateway, ToolboxError> {
        self.gateway.ok_or_else(|| ToolboxError::BackendFailure {
            tool: tool.to_string(),
            message: "no model gateway configured".into(),
        })
    }

    fn corpus(&self, tool: &str) -> Result<&'a Corpus, ToolboxError> {
        self.corpus.ok_or_else(|| ToolboxError::BackendFailure {
            tool: tool.to_string(),
            message: "no knowledge-base corpus loaded".into(),
        })
    }
}

pub struct Registry {
    bindings: Vec<ToolBinding>,
    aliases: Vec<(String, String)>,
    stub_mode: StubMode,
}

impl Registry {
    pub fn empty() -> Self {
        Self { bindings: Vec::new(), aliases: Vec::new(), stub_mode: StubMode::Unconfigured }
    }

    /// The built-in eighteen-tool registry with the standard alias table.
    pub fn builtin(stub_mode: StubMode) -> Self {
        let descriptors = parse_descriptors(BUILTIN_DESCRIPTORS);
        assert_eq!(descriptors.len(), 18, "built-in descriptor data must hold 18 tools");
        let mut registry = Self {
            bindings: Vec::new(),
            aliases: ALIASES.iter().map(|(a, c)| (a.to_string(), c.to_string())).collect(),
            stub_mode,
        };
        for descriptor in descriptors {
            let binding = builtin_binding(descriptor);
            registry.register(binding).expect("built-in names are unique");
        }
        registry
    }

    pub fn register(&mut self, binding: ToolBinding) -> Result<(), ToolboxError> {
        if self.bindings.iter().any(|b| b.descriptor.name == binding.descriptor.name) {
            return Err(ToolboxError::DuplicateName(binding.descriptor.name));
        }
        self.bindings.push(binding);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn bindings(&self) -> impl Iterator<Item = &ToolBinding> {
        self.bindings.iter()
    }

    pub fn aliases(&self) -> &[(String, String)] {
        &self.aliases
    }

    fn find(&self, canonical: &str) -> Option<&ToolBinding> {
        self.bindings.iter().find(|b| b.descriptor.name == canonical)
    }

    /// Resolves a name: exact descriptor match, then the alias table, then a
    /// case-insensitive fallback over both. Misses carry nearest-name
    /// suggestions (edit distance ≤ 3) for executor re-prompting.
    pub fn resolve(&self, name: &str) -> Result<&ToolBinding, ToolboxError> {
        let name = name.trim();
        if let Some(b) = self.find(name) {
            return Ok(b);
        }
        if let Some((_, canonical)) = self.aliases.iter().find(|(a, _)| a == name) {
            if let Some(b) = self.find(canonical) {
                return Ok(b);
            }
        }
        let lower = name.to_lowercase();
        if let Some(b) = self.bindings.iter().find(|b| b.descriptor.name.to_lowercase() == lower) {
            return Ok(b);
        }
        if let Some((_, canonical)) =
            self.aliases.iter().find(|(a, _)| a.to_lowercase() == lower)
        {
            if let Some(b) = self.find(canonical) {
                return Ok(b);
            }
        }
        Err(ToolboxError::NotFound { name: name.to_string(), suggestions: self.suggestions(name) })
    }

    fn suggestions(&self, name: &str) -> Vec<String> {
        let mut scored: Vec<(usize, String)> = Vec::new();
        for b in &self.bindings {
            let d = levenshtein(name, &b.descriptor.name);
            if d <= 3 {
                scored.push((d, b.descriptor.name.clone()));
            }
        }
        for (alias, canonical) in &self.aliases {
            let d = levenshtein(name, alias);
            if d <= 3 {
                scored.push((d, canonical.clone()));
            }
        }
        scored.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::new();
        for (_, name) in scored {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Canonical descriptor name for any resolvable name.
    pub fn canonical(&self, name: &str) -> Result<String, ToolboxError> {
        Ok(self.resolve(name)?.descriptor.name.clone())
    }

    /// Concatenates every descriptor, in registration order, in the exact
    /// header/field format the planner and executor prompts embed.
    pub fn render_descriptions(&self) -> String {
        let blocks: Vec<String> = self
            .bindings
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let d = &b.descriptor;
                format!(
                    "=== Tool Description for TOOL{} ===\n\nName: {}\n\nAbility: {}\n\nQuery Input: {}\n\nmaterial Input: {}\n\nOutput: {}\n\nRemark: {}",
                    i + 1,
                    d.name,
                    d.ability,
                    d.query_input,
                    d.material_input,
                    d.output,
                    d.remark
                )
            })
            .collect();
        blocks.join("\n\n")
    }

    /// Dispatches one tool invocation to its backend.
    pub fn invoke(
        &self,
        name: &str,
        request: &ToolRequest,
        ctx: &ToolContext,
    ) -> Result<ToolOutput, ToolboxError> {
        let binding = self.resolve(name)?;
        let tool = binding.descriptor.name.clone();
        if binding.material_required {
            if request.materials.is_empty() {
                return Err(ToolboxError::MaterialMissing {
                    tool,
                    detail: "compulsory material input is absent".into(),
                });
            }
            for m in &request.materials {
                if !Path::new(m).exists() {
                    return Err(ToolboxError::MaterialMissing {
                        tool,
                        detail: format!("material file {m:?} does not exist"),
                    });
                }
            }
        }
        match &binding.backend {
            ToolBackend::Prompted => {
                let gateway = ctx.gateway(&tool)?;
                let mut prompt = request.query.clone();
                if !request.materials.is_empty() {
                    prompt.push_str("\nMaterials: ");
                    prompt.push_str(&request.materials.join(", "));
                }
                let response = gateway
                    .complete(&ChatRequest::user(format!("tool:{tool}"), prompt))
                    .map_err(|e| ToolboxError::BackendFailure { tool: tool.clone(), message: e.to_string() })?;
                Ok(ToolOutput::text_only(response.text))
            }
            ToolBackend::Retrieval(kind) => self.invoke_retrieval(*kind, &tool, request, ctx),
            ToolBackend::Stub { default_prompt } => match &self.stub_mode {
                StubMode::Unconfigured => Err(ToolboxError::BackendFailure {
                    tool,
                    message: "stub tool invoked with no fixture table or adapter configured".into(),
                }),
                StubMode::Fixtures(table) => table.lookup(&tool, request),
                StubMode::Adapters(map) => match map.get(&tool) {
                    Some(config) => run_adapter(config, &tool, *default_prompt, request),
                    None => Err(ToolboxError::BackendFailure {
                        tool,
                        message: "no adapter configured".into(),
                    }),
                },
            },
        }
    }

    fn invoke_retrieval(
        &self,
        kind: RetrievalKind,
        tool: &str,
        request: &ToolRequest,
        ctx: &ToolContext,
    ) -> Result<ToolOutput, ToolboxError> {
        let gateway = ctx.gateway(tool)?;
        let wrap = |e: kb::KbError| ToolboxError::BackendFailure {
            tool: tool.to_string(),
            message: e.to_string(),
        };
        match kind {
            RetrievalKind::GameSearch => {
                let corpus = ctx.corpus(tool)?;
                let outcome = kb::game_search(corpus, gateway, &request.query).map_err(wrap)?;
                Ok(match outcome {
                    SearchOutcome::Single { file_path, message } => ToolOutput {
                        text: message,
                        produced_files: vec![file_path],
                    },
                    SearchOutcome::Ambiguous { message, .. } => ToolOutput::text_only(message),
                    SearchOutcome::None { message } => ToolOutput::text_only(message),
                })
            }
            RetrievalKind::GameInfo => {
                let file = &request.materials[0];
                let text = kb::game_info_retrieval(gateway, &request.query, Path::new(file))
                    .map_err(wrap)?;
                Ok(ToolOutput::text_only(text))
            }
            RetrievalKind::MatchHistory => {
                let file = &request.materials[0];
                let text = kb::match_history_retrieval(gateway, &request.query, Path::new(file))
                    .map_err(wrap)?;
                Ok(ToolOutput::text_only(text))
            }
            RetrievalKind::RetrievalAugment => {
                let file = &request.materials[0];
                let text = kb::retrieval_augment(gateway, &request.query, Path::new(file))
                    .map_err(wrap)?;
                Ok(ToolOutput::text_only(text))
            }
            RetrievalKind::EntitySearch => {
                let corpus = ctx.corpus(tool)?;
                let hit = kb::entity_search(corpus, gateway, &request.query).map_err(wrap)?;
                Ok(match hit.record {
                    Some(record) => ToolOutput {
                        text: format!(
                            "Identified {} \"{}\". Wiki page file: {}",
                            hit.kind, hit.name, record.source_path
                        ),
                        produced_files: vec![record.source_path.clone()],
                    },
                    None => ToolOutput::text_only(format!(
                        "No matching entity record found (identified {} \"{}\").",
                        hit.kind, hit.name
                    )),
                })
            }
        }
    }
}

fn run_adapter(
    config: &AdapterConfig,
    tool: &str,
    default_prompt: Option<&'static str>,
    request: &ToolRequest,
) -> Result<ToolOutput, ToolboxError> {
    let instruction = match default_prompt {
        Some(p) if request.query.trim().is_empty() => p.trim().to_string(),
        _ => request.query.clone(),
    };
    match config.mode {
        AdapterMode::Command => {
            let output = std::process::Command::new(&config.target)
                .arg(&instruction)
                .args(&request.materials)
                .output()
                .map_err(|e| ToolboxError::BackendFailure {
                    tool: tool.to_string(),
                    message: format!("command {:?}: {e}", config.target),
                })?;
            if !output.status.success() {
                return Err(ToolboxError::BackendFailure {
                    tool: tool.to_string(),
                    message: format!(
                        "command {:?} exited with {}: {}",
                        config.target,
                        output.status,
                        String::from_utf8_lossy(&output.stderr).trim()
                    ),
                });
            }
            Ok(ToolOutput::text_only(String::from_utf8_lossy(&output.stdout).trim_end().to_string()))
        }
        AdapterMode::Endpoint => {
            let client = reqwest::blocking::Client::new();
            let payload = serde_json::json!({
                "tool": tool,
                "query": instruction,
                "materials": request.materials,
            });
            let response = client
                .post(&config.target)
                .json(&payload)
                .send()
                .and_then(|r| r.error_for_status())
                .map_err(|e| ToolboxError::BackendFailure {
                    tool: tool.to_string(),
                    message: e.to_string(),
                })?;
            let body: serde_json::Value = response.json().map_err(|e| ToolboxError::BackendFailure {
                tool: tool.to_string(),
                message: e.to_string(),
            })?;
            let text = body["text"].as_str().unwrap_or_default().to_string();
            let produced_files = body["produced_files"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
                .unwrap_or_default();
            Ok(ToolOutput { text, produced_files })
        }
    }
}

fn builtin_binding(descriptor: ToolDescriptor) -> ToolBinding {
    use RetrievalKind::*;
    let (backend, material_required, produces_material) = match descriptor.name.as_str() {
        "Choice Selection" => (ToolBackend::Prompted, false, false),
        "LLM" => (ToolBackend::Prompted, false, false),
        "Game Search" => (ToolBackend::Retrieval(GameSearch), false, true),
        "Game Info Retrieval" => (ToolBackend::Retrieval(GameInfo), true, false),
        "Match History Retrieval" => (ToolBackend::Retrieval(MatchHistory), true, false),
        "Textual Retrieval Augment" => (ToolBackend::Retrieval(RetrievalAugment), true, false),
        "Textual Entity Search" => (ToolBackend::Retrieval(EntitySearch), false, true),
        "Camera Detection" => (ToolBackend::Stub { default_prompt: Some(CAMERA_PROMPT) }, true, false),
        "Number Recognition" => (ToolBackend::Stub { default_prompt: Some(NUMBER_PROMPT) }, true, false),
        "Score and Time Recognition" => {
            (ToolBackend::Stub { default_prompt: Some(SCORE_TIME_PROMPT) }, true, false)
        }
        "Frame Selection" => (ToolBackend::Stub { default_prompt: None }, true, true),
        // Action Classifier, Commentary Generation, Foul Recognition,
        // Replay Grounding, Entity Recognition, Jersey Color Relevant VQA,
        // Segment
        _ => (ToolBackend::Stub { default_prompt: None }, true, false),
    };
    ToolBinding { descriptor, backend, material_required, produces_material }
}

/// Parses descriptor blocks in the registry text format (the same format
/// `render_descriptions` emits).
pub fn parse_descriptors(text: &str) -> Vec<ToolDescriptor> {
    const LABELS: [&str; 6] =
        ["Name:", "Ability:", "Query Input:", "material Input:", "Output:", "Remark:"];
    let mut out = Vec::new();
    let mut fields: BTreeMap<&str, String> = BTreeMap::new();
    let mut current: Option<&str> = None;

    let mut flush = |fields: &mut BTreeMap<&str, String>| {
        if !fields.is_empty() {
            out.push(ToolDescriptor {
                name: fields.remove("Name:").unwrap_or_default(),
                ability: fields.remove("Ability:").unwrap_or_default(),
                query_input: fields.remove("Query Input:").unwrap_or_default(),
                material_input: fields.remove("material Input:").unwrap_or_default(),
                output: fields.remove("Output:").unwrap_or_default(),
                remark: fields.remove("Remark:").unwrap_or_default(),
            });
            fields.clear();
        }
    };

    for line in text.lines() {
        if line.starts_with("=== Tool Description for TOOL") {
            flush(&mut fields);
            current = None;
            continue;
        }
        if let Some(label) = LABELS.iter().find(|l| line.starts_with(**l)) {
            fields.insert(label, line[label.len()..].trim().to_string());
            current = Some(label);
            continue;
        }
        // continuation line of the current field
        if let (Some(label), false) = (current, line.trim().is_empty()) {
            let entry = fields.entry(label).or_default();
            if !entry.is_empty() {
                entry.push(' ');
            }
            entry.push_str(line.trim());
        }
    }
    flush(&mut fields);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_registry(rows: Vec<FixtureRow>) -> Registry {
        Registry::builtin(StubMode::Fixtures(FixtureTable::new(rows)))
    }

    fn media(name: &str) -> String {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/media").join(name).display().to_string()
    }

    #[test]
    fn builtin_registry_holds_eighteen_tools() {
        let registry = Registry::builtin(StubMode::Unconfigured);
        assert_eq!(registry.len(), 18);
        let text = registry.render_descriptions();
        assert_eq!(text.matches("=== Tool Description for TOOL").count(), 18);
        // rendering is a pure function of the registry
        assert_eq!(text, registry.render_descriptions());
        // the embedded data file is exactly the rendered form
        assert_eq!(text, BUILTIN_DESCRIPTORS.trim_end());
    }

    #[test]
    fn register_rejects_duplicates_and_empty_lookup_fails() {
        let mut registry = Registry::empty();
        let err = registry.resolve("LLM").unwrap_err();
        assert!(matches!(err, ToolboxError::NotFound { .. }));

        let descriptor = ToolDescriptor {
            name: "LLM".into(),
            ability: "a".into(),
            query_input: "q".into(),
            material_input: "m".into(),
            output: "o".into(),
            remark: "r".into(),
        };
        registry
            .register(ToolBinding {
                descriptor: descriptor.clone(),
                backend: ToolBackend::Prompted,
                material_required: false,
                produces_material: false,
            })
            .unwrap();
        let err = registry
            .register(ToolBinding {
                descriptor,
                backend: ToolBackend::Prompted,
                material_required: false,
                produces_material: false,
            })
            .unwrap_err();
        assert!(matches!(err, ToolboxError::DuplicateName(n) if n == "LLM"));
    }

    #[test]
    fn resolve_exact_alias_case_insensitive() {
        let registry = Registry::builtin(StubMode::Unconfigured);
        assert_eq!(registry.canonical("Choice Selection").unwrap(), "Choice Selection");
        assert_eq!(registry.canonical("Game info Retrieval").unwrap(), "Game Info Retrieval");
        assert_eq!(registry.canonical("Shot Change").unwrap(), "Camera Detection");
        assert_eq!(registry.canonical("Vision Language Model").unwrap(), "Jersey Color Relevant VQA");
        assert_eq!(registry.canonical("Text Retrieval Augment").unwrap(), "Textual Retrieval Augment");
        assert_eq!(registry.canonical("llm").unwrap(), "LLM");
        assert_eq!(registry.canonical("  LLM  ").unwrap(), "LLM");
    }

    #[test]
    fn resolve_miss_carries_suggestions() {
        let registry = Registry::builtin(StubMode::Unconfigured);
        let err = registry.resolve("Gane Search").unwrap_err();
        match err {
            ToolboxError::NotFound { suggestions, .. } => {
                assert_eq!(suggestions.first().map(String::as_str), Some("Game Search"));
            }
            other => panic!("expected NotFound, got {other:?}"),
        }
        // the misrouted-tool path depends on this name staying unmapped
        assert!(registry.resolve("Face Recognition").is_err());
    }

    #[test]
    fn fixture_invocations_are_deterministic() {
        let registry = fixture_registry(vec![
            FixtureRow {
                tool: "Camera Detection".into(),
                query_pattern: None,
                materials_pattern: Some("frame.png".into()),
                output_text: "Main camera center".into(),
                produced_files: vec![],
            },
            FixtureRow {
                tool: "Number Recognition".into(),
                query_pattern: None,
                materials_pattern: None,
                output_text: "-1".into(),
                produced_files: vec![],
            },
            FixtureRow {
                tool: "Replay Grounding".into(),
                query_pattern: None,
                materials_pattern: None,
                output_text: media("clip_c.mp4"),
                produced_files: vec![],
            },
        ]);
        let ctx = ToolContext::default();

        let camera = ToolRequest::new("", vec![media("frame.png")]);
        let out = registry.invoke("Camera Detection", &camera, &ctx).unwrap();
        assert_eq!(out.text, "Main camera center");
        assert_eq!(registry.invoke("Camera Detection", &camera, &ctx).unwrap(), out);

        let number = ToolRequest::new("what number?", vec![media("frame.png")]);
        assert_eq!(registry.invoke("Number Recognition", &number, &ctx).unwrap().text, "-1");

        let clips: Vec<String> = ["clip_a.mp4", "clip_b.mp4", "clip_c.mp4", "clip_d.mp4", "clip_e.mp4"]
            .iter()
            .map(|c| media(c))
            .collect();
        let replay = ToolRequest::new("", clips);
        let out = registry.invoke("Replay Grounding", &replay, &ctx).unwrap();
        assert!(out.text.ends_with("clip_c.mp4"));
    }

    #[test]
    fn material_checks() {
        let registry = fixture_registry(vec![]);
        let ctx = ToolContext::default();
        let err = registry
            .invoke("Camera Detection", &ToolRequest::new("q", vec![]), &ctx)
            .unwrap_err();
        assert!(matches!(err, ToolboxError::MaterialMissing { .. }));
        let err = registry
            .invoke("Camera Detection", &ToolRequest::new("q", vec!["/no/such/file.png".into()]), &ctx)
            .unwrap_err();
        assert!(matches!(err, ToolboxError::MaterialMissing { .. }));
    }

    #[test]
    fn fixture_exact_match_beats_substring() {
        let table = FixtureTable::new(vec![
            FixtureRow {
                tool: "LLM".into(),
                query_pattern: Some("score".into()),
                materials_pattern: None,
                output_text: "substring row".into(),
                produced_files: vec![],
            },
            FixtureRow {
                tool: "LLM".into(),
                query_pattern: Some("what is the score".into()),
                materials_pattern: None,
                output_text: "exact row".into(),
                produced_files: vec![],
            },
        ]);
        let exact = table.lookup("LLM", &ToolRequest::new("what is the score", vec![])).unwrap();
        assert_eq!(exact.text, "exact row");
        let sub = table.lookup("LLM", &ToolRequest::new("score update please", vec![])).unwrap();
        assert_eq!(sub.text, "substring row");
        let miss = table.lookup("LLM", &ToolRequest::new("no match here", vec![])).unwrap_err();
        assert!(matches!(miss, ToolboxError::FixtureMiss { .. }));
    }

    #[test]
    fn command_adapter_round_trip() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("echo_tool.sh");
        fs::write(&script, "#!/bin/sh\necho \"tool saw: $1\"\n").unwrap();
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();

        let mut adapters = BTreeMap::new();
        adapters.insert(
            "Segment".to_string(),
            AdapterConfig {
                tool: "Segment".into(),
                mode: AdapterMode::Command,
                target: script.display().to_string(),
            },
        );
        let registry = Registry::builtin(StubMode::Adapters(adapters));
        let request = ToolRequest::new("the ball", vec![media("frame.png")]);
        let out = registry.invoke("Segment", &request, &ToolContext::default()).unwrap();
        assert_eq!(out.text, "tool saw: the ball");
    }
}
