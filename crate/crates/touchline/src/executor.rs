//! The execution agent: iterate over a planned chain with history-aware
//! instruction synthesis, dispatch tools, and return the terminal output.
//!
//! Each turn re-sends the full execution prompt with the accumulated
//! transcript appended; the model answers with exactly one `<Call>` or
//! `<EndCall>` block. The model's emitted tool is authoritative at every
//! step — the planned chain is advisory context. An unresolvable tool name
//! does not abort the run: the error (with nearest-name suggestions) is fed
//! back as a step result so the model can adjust course.

use std::fmt;
use std::path::Path;

use crate::gateway::{ChatRequest, Gateway};
use crate::kb::Corpus;
use crate::planner::{material_manifest, PlanError, PlanResult, Planner, TaskCatalog};
use crate::protocol::{self, StepResult, ToolCall};
use crate::toolbox::{Registry, ToolContext, ToolOutput, ToolRequest, ToolboxError};

const EXEC_PROMPT: &str = include_str!("../data/exec_prompt.txt");

/// One executed step: the instruction the model emitted, the tool it named
/// (canonicalized when it resolves) and the tool's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    pub step_index: usize,
    pub tool_name: String,
    pub instruction: ToolCall,
    pub output: ToolOutput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbortReason {
    PlanFailed(String),
    StepParseFailed(String),
    MaxStepsExceeded,
    GatewayFailure(String),
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::PlanFailed(e) => write!(f, "planning failed: {e}"),
            AbortReason::StepParseFailed(e) => write!(f, "step parse failed: {e}"),
            AbortReason::MaxStepsExceeded => write!(f, "step limit exceeded"),
            AbortReason::GatewayFailure(e) => write!(f, "gateway failure: {e}"),
        }
    }
}

/// Full record of one run: plan, every step, the final answer and status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub question: String,
    pub materials: Vec<String>,
    pub plan: PlanResult,
    pub steps: Vec<HistoryEntry>,
    pub final_answer: String,
    pub status: RunStatus,
}

impl ExecutionTrace {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Deterministic textual form: plan raw/canonical, every rendered
    /// Call/StepResult pair, final answer and status.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("=== Execution Trace ===\n");
        out.push_str(&format!("Question: {}\n", self.question));
        out.push_str(&format!("Materials: {}\n", material_manifest(&self.materials)));
        let status = match &self.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Aborted(reason) => format!("aborted: {reason}"),
        };
        out.push_str(&format!("Status: {status}\n"));
        out.push_str("\n--- Plan ---\n");
        out.push_str(&format!("Known Info: {}\n", render_known_info(&self.plan.known_info)));
        out.push_str(&format!("Chain: {}\n", render_chain(&self.plan.chain)));
        out.push_str("Raw response:\n");
        out.push_str(&self.plan.raw_response);
        out.push('\n');
        for entry in &self.steps {
            out.push_str(&format!("\n--- Step {}: {} ---\n", entry.step_index, entry.tool_name));
            out.push_str(&protocol::render_call(&entry.instruction));
            out.push('\n');
            out.push_str(&protocol::render_step_result(&StepResult::new(entry.output.text.clone())));
            out.push('\n');
        }
        out.push_str("\n--- Final Answer ---\n");
        out.push_str(&self.final_answer);
        out.push('\n');
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render())
    }
}

/// `{$Tag$, ...}` decoration for known-info tags.
pub fn render_known_info(tags: &[String]) -> String {
    if tags.is_empty() {
        "None".to_string()
    } else {
        let decorated: Vec<String> = tags.iter().map(|t| format!("${t}$")).collect();
        format!("{{{}}}", decorated.join(", "))
    }
}

/// `[*Tool A* -> *Tool B*]` decoration for a chain.
pub fn render_chain(chain: &[String]) -> String {
    if chain.is_empty() {
        "[]".to_string()
    } else {
        let decorated: Vec<String> = chain.iter().map(|t| format!("*{t}*")).collect();
        format!("[{}]", decorated.join(" -> "))
    }
}

/// Builds the execution prompt for the next step: question, material
/// manifest, known info, the decorated chain, the full toolbox text, and
/// the transcript of every prior step.
pub fn build_execution_prompt(
    question: &str,
    materials: &[String],
    plan: &PlanResult,
    registry: &Registry,
    history: &[HistoryEntry],
) -> String {
    let history_section = if history.is_empty() {
        "The following is all our execution history, now you can start with your call of first step:".to_string()
    } else {
        let transcript: Vec<String> = history
            .iter()
            .map(|entry| {
                format!(
                    "{}\n{}",
                    protocol::render_call(&entry.instruction),
                    protocol::render_step_result(&StepResult::new(entry.output.text.clone()))
                )
            })
            .collect();
        format!(
            "The following is all our execution history:\n\n{}\n\nNow you can continue with your call of the next step:",
            transcript.join("\n\n")
        )
    };
    EXEC_PROMPT
        .replace("{query}", question)
        .replace("{material}", &material_manifest(materials))
        .replace("{known_info}", &render_known_info(&plan.known_info))
        .replace("{chain}", &render_chain(&plan.chain))
        .replace("{toolbox}", &registry.render_descriptions())
        .replace("{history_section}", &history_section)
}

/// Mutable state of one run; owned exclusively by that run.
pub struct RunState {
    pub question: String,
    pub plan: PlanResult,
    pub steps: Vec<HistoryEntry>,
    /// Original question materials plus files produced by earlier steps.
    pub material_pool: Vec<String>,
}

/// What one step produced.
pub enum StepOutcome {
    Continued,
    Final(String),
}

pub enum StepError {
    Parse(String),
    Gateway(String),
}

/// The end-to-end agent: plan, then execute.
pub struct Agent<'a> {
    registry: &'a Registry,
    catalog: &'a TaskCatalog,
    gateway: &'a Gateway,
    corpus: Option<&'a Corpus>,
    max_plan_retries: u32,
    min_steps_floor: usize,
    reprompt_budget: u32,
}

impl<'a> Agent<'a> {
    pub fn new(
        registry: &'a Registry,
        catalog: &'a TaskCatalog,
        gateway: &'a Gateway,
        corpus: Option<&'a Corpus>,
    ) -> Self {
        Self {
            registry,
            catalog,
            gateway,
            corpus,
            max_plan_retries: 2,
            min_steps_floor: 6,
            reprompt_budget: 1,
        }
    }

    pub fn with_limits(mut self, max_plan_retries: u32, min_steps_floor: usize) -> Self {
        self.max_plan_retries = max_plan_retries;
        self.min_steps_floor = min_steps_floor;
        self
    }

    pub fn plan(&self, question: &str, materials: &[String]) -> Result<PlanResult, PlanError> {
        Planner::new(self.registry, self.catalog, self.gateway)
            .with_max_retries(self.max_plan_retries)
            .plan(question, materials)
    }

    /// Runs one step: prompt, parse one call, resolve, invoke, append.
    /// Unknown tools and invocation failures become error step results the
    /// model sees next turn; only malformed output past the re-prompt
    /// budget or a dead gateway surfaces as an error.
    pub fn step(&self, state: &mut RunState) -> Result<StepOutcome, StepError> {
        let prompt = build_execution_prompt(
            &state.question,
            &state.material_pool,
            &state.plan,
            self.registry,
            &state.steps,
        );
        let mut request = ChatRequest::user("executor", prompt);
        let mut call = None;
        for attempt in 0..=self.reprompt_budget {
            let response =
                self.gateway.complete(&request).map_err(|e| StepError::Gateway(e.to_string()))?;
            match protocol::parse_call(&response.text) {
                Ok(parsed) => {
                    call = Some(parsed);
                    break;
                }
                Err(err) => {
                    if attempt == self.reprompt_budget {
                        return Err(StepError::Parse(err.to_string()));
                    }
                    request = request.with_followup(
                        response.text,
                        format!(
                            "Your response could not be parsed ({err}). Reply with exactly one <Call>…</Call> or <EndCall>…</EndCall> block and nothing else."
                        ),
                    );
                }
            }
        }
        let call = call.expect("loop either sets call or returns");

        let step_index = state.steps.len() + 1;
        match self.registry.canonical(&call.tool_name) {
            Err(ToolboxError::NotFound { name, suggestions }) => {
                let hint = if suggestions.is_empty() {
                    String::new()
                } else {
                    format!(" Did you mean: {}?", suggestions.join(", "))
                };
                let text = format!(
                    "Error: \"{name}\" is not a registered tool.{hint} Choose a tool from the toolbox and continue."
                );
                state.steps.push(HistoryEntry {
                    step_index,
                    tool_name: call.tool_name.clone(),
                    instruction: call,
                    output: ToolOutput::text_only(text),
                });
                Ok(StepOutcome::Continued)
            }
            Err(other) => Err(StepError::Gateway(other.to_string())),
            Ok(canonical) => {
                let request = ToolRequest::new(call.query.clone(), call.materials.clone());
                let ctx = ToolContext { gateway: Some(self.gateway), corpus: self.corpus };
                match self.registry.invoke(&canonical, &request, &ctx) {
                    Ok(output) => {
                        for produced in &output.produced_files {
                            if !state.material_pool.contains(produced) {
                                state.material_pool.push(produced.clone());
                            }
                        }
                        let terminal = call.terminal;
                        let text = output.text.clone();
                        state.steps.push(HistoryEntry {
                            step_index,
                            tool_name: canonical,
                            instruction: call,
                            output,
                        });
                        if terminal {
                            Ok(StepOutcome::Final(text))
                        } else {
                            Ok(StepOutcome::Continued)
                        }
                    }
                    Err(err) => {
                        let text = format!("Error: {err}. Adjust your next call accordingly.");
                        state.steps.push(HistoryEntry {
                            step_index,
                            tool_name: canonical,
                            instruction: call,
                            output: ToolOutput::text_only(text),
                        });
                        Ok(StepOutcome::Continued)
                    }
                }
            }
        }
    }

    /// Iterates [`Agent::step`] until a terminal output or the hard limit
    /// (twice the planned chain length, floored). Failures abort the trace
    /// rather than raising, so a harness can score it as incorrect.
    pub fn run(&self, question: &str, materials: &[String], plan: PlanResult) -> ExecutionTrace {
        let limit = (2 * plan.chain.len()).max(self.min_steps_floor);
        let mut state = RunState {
            question: question.to_string(),
            plan,
            steps: Vec::new(),
            material_pool: materials.to_vec(),
        };
        let mut final_answer = None;
        let mut abort = None;
        while final_answer.is_none() && abort.is_none() {
            if state.steps.len() >= limit {
                abort = Some(AbortReason::MaxStepsExceeded);
                break;
            }
            match self.step(&mut state) {
                Ok(StepOutcome::Continued) => {}
                Ok(StepOutcome::Final(text)) => final_answer = Some(text),
                Err(StepError::Parse(e)) => abort = Some(AbortReason::StepParseFailed(e)),
                Err(StepError::Gateway(e)) => abort = Some(AbortReason::GatewayFailure(e)),
            }
        }
        ExecutionTrace {
            question: question.to_string(),
            materials: materials.to_vec(),
            plan: state.plan,
            steps: state.steps,
            final_answer: final_answer.clone().unwrap_or_default(),
            status: match abort {
                None => RunStatus::Completed,
                Some(reason) => RunStatus::Aborted(reason),
            },
        }
    }

    /// The full open-ended pipeline: plan then run. Options never reach
    /// this path. A failed plan yields an aborted trace with an empty
    /// answer instead of an error.
    pub fn answer(&self, question: &str, materials: &[String]) -> (String, ExecutionTrace) {
        match self.plan(question, materials) {
            Ok(plan) => {
                let trace = self.run(question, materials, plan);
                (trace.final_answer.clone(), trace)
            }
            Err(err) => {
                let trace = ExecutionTrace {
                    question: question.to_string(),
                    materials: materials.to_vec(),
                    plan: PlanResult {
                        known_info: Vec::new(),
                        chain: Vec::new(),
                        raw_response: String::new(),
                    },
                    steps: Vec::new(),
                    final_answer: String::new(),
                    status: RunStatus::Aborted(AbortReason::PlanFailed(err.to_string())),
                };
                (String::new(), trace)
            }
        }
    }
}
