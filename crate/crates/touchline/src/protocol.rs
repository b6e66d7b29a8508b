//! The structured-instruction grammar exchanged between the execution agent
//! and the runtime.
//!
//! Instructions travel as `<Call>`/`<EndCall>` blocks carrying `<Purpose>`,
//! `<Query>`, `<Material>` and `<Tool>` elements; tool feedback travels back
//! as `<StepResult><Answer>…</Answer></StepResult>`. Parsing tolerates prose
//! around the outermost markers (models chatter), rendering is deterministic.
//! Element content is taken verbatim up to the first matching close tag; the
//! grammar has no escaping scheme.

use thiserror::Error;

/// Every marker spelling of the grammar, case-sensitive.
pub const MARKERS: [&str; 16] = [
    "<Call>",
    "</Call>",
    "<EndCall>",
    "</EndCall>",
    "<Purpose>",
    "</Purpose>",
    "<Query>",
    "</Query>",
    "<Material>",
    "</Material>",
    "<Tool>",
    "</Tool>",
    "<StepResult>",
    "</StepResult>",
    "<Answer>",
    "</Answer>",
];

/// One structured instruction emitted by the execution agent.
///
/// `terminal` is true iff the instruction was (or will be) wrapped in
/// `<EndCall>` markers, marking the step whose output becomes the final
/// answer of the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolCall {
    pub purpose: String,
    pub query: String,
    pub materials: Vec<String>,
    pub tool_name: String,
    pub terminal: bool,
}

impl ToolCall {
    /// Checks the invariants that make a call renderable and round-trippable:
    /// non-empty tool name, materials free of list syntax, and no field
    /// containing a marker spelling (the grammar has no escaping).
    pub fn validate(&self) -> Result<(), String> {
        if self.tool_name.trim().is_empty() {
            return Err("tool_name is empty".into());
        }
        for field in [&self.purpose, &self.query, &self.tool_name] {
            if let Some(m) = contains_marker(field) {
                return Err(format!("field contains protocol marker {m}"));
            }
        }
        for m in &self.materials {
            if m.is_empty() {
                return Err("materials contains an empty string".into());
            }
            if m.trim() != m {
                return Err(format!("material {m:?} has surrounding whitespace"));
            }
            if m == "None" {
                return Err("material equals the reserved token \"None\"".into());
            }
            if m.contains(['"', ',', '[', ']', '\n', '\r']) {
                return Err(format!("material {m:?} contains list syntax"));
            }
            if m.len() >= 2 && m.starts_with('\'') && m.ends_with('\'') {
                return Err(format!("material {m:?} is single-quoted"));
            }
            if let Some(mk) = contains_marker(m) {
                return Err(format!("material contains protocol marker {mk}"));
            }
        }
        Ok(())
    }
}

/// The tool output as echoed back to the execution agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub answer: String,
}

impl StepResult {
    pub fn new(answer: impl Into<String>) -> Self {
        Self { answer: answer.into() }
    }

    pub fn validate(&self) -> Result<(), String> {
        match contains_marker(&self.answer) {
            Some(m) => Err(format!("answer contains protocol marker {m}")),
            None => Ok(()),
        }
    }
}

/// The textual surface form of a plan: known-information tags plus the
/// ordered tool chain, exactly as decomposed from the model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanParse {
    pub known_info: Vec<String>,
    pub chain: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no {expected} block found")]
    MissingBlock { expected: &'static str },
    #[error("missing <{field}> element in {span:?}")]
    MissingField { field: &'static str, span: String },
    #[error("ambiguous markers near {span:?}")]
    AmbiguousBlock { span: String },
    #[error("no \"Tool Chain:\" line found")]
    NoChainLine,
    #[error("tool chain is empty")]
    EmptyChain,
}

fn contains_marker(s: &str) -> Option<&'static str> {
    MARKERS.iter().find(|m| s.contains(*m)).copied()
}

fn clip(s: &str) -> String {
    const LIMIT: usize = 120;
    if s.len() <= LIMIT {
        s.to_string()
    } else {
        let mut end = LIMIT;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

fn occurrences(text: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(needle) {
        out.push(from + pos);
        from += pos + needle.len();
    }
    out
}

/// Renders the material list: empty renders as the literal `None`,
/// otherwise a bracketed comma-separated list of double-quoted paths.
pub fn render_materials(materials: &[String]) -> String {
    if materials.is_empty() {
        "None".to_string()
    } else {
        let quoted: Vec<String> = materials.iter().map(|m| format!("\"{m}\"")).collect();
        format!("[{}]", quoted.join(", "))
    }
}

/// Parses the three accepted material surface forms: the literal `None`,
/// a single bare path, or a bracketed comma-separated list with optional
/// quoting. Always canonicalizes to a list.
pub fn parse_materials(content: &str) -> Vec<String> {
    let t = content.trim();
    if t == "None" || t.is_empty() {
        return Vec::new();
    }
    if t.starts_with('[') && t.ends_with(']') && t.len() >= 2 {
        return t[1..t.len() - 1]
            .split(',')
            .map(|item| {
                let item = item.trim();
                let item = strip_symmetric_quotes(item);
                item.to_string()
            })
            .filter(|item| !item.is_empty())
            .collect();
    }
    vec![strip_symmetric_quotes(t).to_string()]
}

fn strip_symmetric_quotes(s: &str) -> &str {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Renders a call block: `<Call>` (or `<EndCall>` when terminal) holding
/// the four elements in fixed order, one per line.
pub fn render_call(call: &ToolCall) -> String {
    let (open, close) = if call.terminal {
        ("<EndCall>", "</EndCall>")
    } else {
        ("<Call>", "</Call>")
    };
    format!(
        "{open}\n<Purpose>{}</Purpose>\n<Query>{}</Query>\n<Material>{}</Material>\n<Tool>{}</Tool>\n{close}",
        call.purpose,
        call.query,
        render_materials(&call.materials),
        call.tool_name,
    )
}

/// Finds the single element `<name>…</name>` inside `inner` and returns its
/// verbatim content. Duplicated open tags are ambiguous, an absent open or
/// close tag is a missing field.
fn extract_element(inner: &str, name: &'static str) -> Result<String, ParseError> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let opens = occurrences(inner, &open);
    match opens.len() {
        0 => Err(ParseError::MissingField { field: name, span: clip(inner) }),
        1 => {
            let start = opens[0] + open.len();
            match inner[start..].find(&close) {
                Some(rel) => Ok(inner[start..start + rel].to_string()),
                None => Err(ParseError::MissingField { field: name, span: clip(&inner[opens[0]..]) }),
            }
        }
        _ => Err(ParseError::AmbiguousBlock { span: clip(&inner[opens[1]..]) }),
    }
}

/// Extracts the single block `open…close` from `text`, tolerating arbitrary
/// prose outside the markers. `blocks` lists every open marker that counts
/// toward the exactly-one rule (Call and EndCall share one budget).
fn extract_block(
    text: &str,
    expected: &'static str,
    blocks: &[(&'static str, &'static str)],
) -> Result<(String, &'static str), ParseError> {
    let mut found: Vec<(usize, &'static str, &'static str)> = Vec::new();
    for (open, close) in blocks {
        for pos in occurrences(text, open) {
            found.push((pos, open, close));
        }
    }
    match found.len() {
        0 => Err(ParseError::MissingBlock { expected }),
        1 => {
            let (pos, open, close) = found[0];
            let start = pos + open.len();
            match text[start..].find(close) {
                Some(rel) => Ok((text[start..start + rel].to_string(), open)),
                None => Err(ParseError::MissingBlock { expected }),
            }
        }
        _ => {
            found.sort_by_key(|(pos, _, _)| *pos);
            Err(ParseError::AmbiguousBlock { span: clip(&text[found[1].0..]) })
        }
    }
}

/// Parses exactly one `<Call>` or `<EndCall>` block out of `text`; inner
/// element order is not required. `terminal` is set by the enclosing marker.
pub fn parse_call(text: &str) -> Result<ToolCall, ParseError> {
    let (inner, open) = extract_block(
        text,
        "<Call> or <EndCall>",
        &[("<Call>", "</Call>"), ("<EndCall>", "</EndCall>")],
    )?;
    let purpose = extract_element(&inner, "Purpose")?;
    let query = extract_element(&inner, "Query")?;
    let materials = parse_materials(&extract_element(&inner, "Material")?);
    let tool_name = extract_element(&inner, "Tool")?;
    Ok(ToolCall {
        purpose,
        query,
        materials,
        tool_name,
        terminal: open == "<EndCall>",
    })
}

/// Renders the feedback block shown back to the execution agent.
pub fn render_step_result(result: &StepResult) -> String {
    format!("<StepResult>\n<Answer>{}</Answer>\n</StepResult>", result.answer)
}

pub fn parse_step_result(text: &str) -> Result<StepResult, ParseError> {
    let (inner, _) = extract_block(text, "<StepResult>", &[("<StepResult>", "</StepResult>")])?;
    let answer = extract_element(&inner, "Answer")?;
    Ok(StepResult { answer })
}

/// Parses the planner's Part-1 response: known-info tags come from `{$…$}`
/// tokens on the "Known Info:" line, the chain from the "Tool Chain:" line
/// split on `->` with `*…*` and bracket decoration stripped. Order and
/// multiplicity are preserved.
pub fn parse_plan(text: &str) -> Result<PlanParse, ParseError> {
    let known_info = text
        .lines()
        .find(|line| line.contains("Known Info:"))
        .map(|line| {
            let rest = &line[line.find("Known Info:").unwrap() + "Known Info:".len()..];
            dollar_tokens(rest)
        })
        .unwrap_or_default();

    let chain_line = text
        .lines()
        .find(|line| line.contains("Tool Chain:"))
        .ok_or(ParseError::NoChainLine)?;
    let rest = &chain_line[chain_line.find("Tool Chain:").unwrap() + "Tool Chain:".len()..];
    let chain = split_chain(rest);
    if chain.is_empty() {
        return Err(ParseError::EmptyChain);
    }
    Ok(PlanParse { known_info, chain })
}

fn dollar_tokens(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('$') {
        let after = &rest[open + 1..];
        match after.find('$') {
            Some(close) => {
                let token = after[..close].trim();
                if !token.is_empty() {
                    tokens.push(token.to_string());
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    tokens
}

/// Splits a decorated chain like `[*Game Search* -> *LLM*]` into bare names.
pub fn split_chain(s: &str) -> Vec<String> {
    let mut t = s.trim();
    t = t.strip_prefix('[').unwrap_or(t);
    t = t.strip_suffix(']').unwrap_or(t);
    t.split("->")
        .map(|name| name.trim().trim_matches('*').trim().to_string())
        .filter(|name| !name.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const C5_CALL_SKELETON: &str = "<Call>\n<Purpose>Brief, clear statement of this step's goal in context of overall analysis</Purpose>\n<Query>[Query/question here(string). IMPORTANT!:: Such query is highly relevant to the toolbox descriptions. you need to think carefully about your purpose this step and generate appropriate query.]</Query>\n<Material>[Material list here(a string showing list form). Here as well, you need to think carefully considering the purpose and toolbox.]</Material>\n<Tool>[Tool name here(string)]</Tool>\n</Call>";

    const C5_ENDCALL_SKELETON: &str = "<EndCall>\n<Purpose>Brief, clear statement of this step's goal in context of overall analysis</Purpose>\n<Query>[Query/question here(string)]</Query>\n<Material>[Material list with file paths here(a string showing list form)]</Material>\n<Tool>[Tool name here(string)]</Tool>\n</EndCall>";

    #[test]
    fn parses_call_skeleton() {
        let call = parse_call(C5_CALL_SKELETON).unwrap();
        assert!(!call.terminal);
        assert_eq!(
            call.purpose,
            "Brief, clear statement of this step's goal in context of overall analysis"
        );
        assert!(call.query.starts_with("[Query/question here(string)."));
        assert_eq!(call.tool_name, "[Tool name here(string)]");
    }

    #[test]
    fn parses_endcall_skeleton_as_terminal() {
        let call = parse_call(C5_ENDCALL_SKELETON).unwrap();
        assert!(call.terminal);
        assert_eq!(call.tool_name, "[Tool name here(string)]");
    }

    #[test]
    fn renders_camera_detection_call() {
        let call = ToolCall {
            purpose: "classify camera".into(),
            query: "What is the camera position in this frame?".into(),
            materials: vec!["frame.png".into()],
            tool_name: "Camera Detection".into(),
            terminal: false,
        };
        let text = render_call(&call);
        assert!(text.starts_with("<Call>\n"));
        assert!(text.contains("<Tool>Camera Detection</Tool>"));
        assert!(text.contains("<Material>[\"frame.png\"]</Material>"));
        assert!(text.ends_with("</Call>"));
        assert_eq!(parse_call(&text).unwrap(), call);
    }

    #[test]
    fn empty_materials_render_as_none() {
        let call = ToolCall {
            purpose: "p".into(),
            query: "q".into(),
            materials: vec![],
            tool_name: "LLM".into(),
            terminal: true,
        };
        let text = render_call(&call);
        assert!(text.contains("<Material>None</Material>"));
        assert!(text.starts_with("<EndCall>"));
        assert_eq!(parse_call(&text).unwrap(), call);
    }

    #[test]
    fn tolerates_prose_and_bracketed_materials() {
        let text = "Sure, I'll ground the replay now.\n<Call>\n<Tool>Replay Grounding</Tool>\n<Purpose>find the replayed clip</Purpose>\n<Query>which clip is replayed?</Query>\n<Material>[\"a.mp4\", \"b.mp4\"]</Material>\n</Call>\nLet me know the result.";
        let call = parse_call(text).unwrap();
        assert_eq!(call.materials, vec!["a.mp4".to_string(), "b.mp4".to_string()]);
        assert_eq!(call.tool_name, "Replay Grounding");
        assert!(!call.terminal);
    }

    #[test]
    fn material_surface_forms() {
        assert_eq!(parse_materials("None"), Vec::<String>::new());
        assert_eq!(parse_materials("  None  "), Vec::<String>::new());
        assert_eq!(parse_materials("clip.mp4"), vec!["clip.mp4"]);
        assert_eq!(parse_materials("['a.mp4', 'b.mp4']"), vec!["a.mp4", "b.mp4"]);
        assert_eq!(parse_materials("[a.mp4,b.mp4]"), vec!["a.mp4", "b.mp4"]);
        assert_eq!(parse_materials("[]"), Vec::<String>::new());
    }

    #[test]
    fn two_blocks_are_ambiguous() {
        let text = format!("{C5_CALL_SKELETON}\n{C5_CALL_SKELETON}");
        assert!(matches!(parse_call(&text), Err(ParseError::AmbiguousBlock { .. })));
        let mixed = format!("{C5_CALL_SKELETON}\n{C5_ENDCALL_SKELETON}");
        assert!(matches!(parse_call(&mixed), Err(ParseError::AmbiguousBlock { .. })));
    }

    #[test]
    fn duplicate_inner_element_is_ambiguous() {
        let text = "<Call>\n<Purpose>a</Purpose>\n<Purpose>b</Purpose>\n<Query>q</Query>\n<Material>None</Material>\n<Tool>LLM</Tool>\n</Call>";
        assert!(matches!(parse_call(text), Err(ParseError::AmbiguousBlock { .. })));
    }

    #[test]
    fn missing_block_and_field() {
        assert_eq!(
            parse_call("no markers at all"),
            Err(ParseError::MissingBlock { expected: "<Call> or <EndCall>" })
        );
        let text = "<Call>\n<Purpose>p</Purpose>\n<Query>q</Query>\n<Material>None</Material>\n</Call>";
        assert!(matches!(
            parse_call(text),
            Err(ParseError::MissingField { field: "Tool", .. })
        ));
    }

    #[test]
    fn step_result_round_trip() {
        let r = StepResult::new("corner");
        assert_eq!(render_step_result(&r), "<StepResult>\n<Answer>corner</Answer>\n</StepResult>");
        assert_eq!(parse_step_result(&render_step_result(&r)).unwrap(), r);

        let empty = StepResult::new("");
        assert_eq!(parse_step_result(&render_step_result(&empty)).unwrap(), empty);
    }

    #[test]
    fn plan_parse_c4_query_1() {
        let text = "Known Info: {$VideoClip$}\n\nTool Chain: [*Shot Change* -> *Camera Detection* -> *LLM*]";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.known_info, vec!["VideoClip"]);
        assert_eq!(plan.chain, vec!["Shot Change", "Camera Detection", "LLM"]);
    }

    #[test]
    fn plan_parse_c4_query_2() {
        let text = "Known Info: {$GameContext$}\n\nTool Chain: [*Game Search* -> *Game info Retrieval* -> *Match History Retrieval* -> *LLM*]";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.known_info, vec!["GameContext"]);
        assert_eq!(
            plan.chain,
            vec!["Game Search", "Game info Retrieval", "Match History Retrieval", "LLM"]
        );
    }

    #[test]
    fn plan_parse_c4_query_3() {
        let text = "Known Info: {$VideoClip$, $GameContext$}\n\nTool Chain: [*Vision Language Model* -> *Entity Recognition* -> *Text Retrieval Augment* -> *LLM*]";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.known_info, vec!["VideoClip", "GameContext"]);
        assert_eq!(plan.chain.len(), 4);
        assert_eq!(plan.chain[0], "Vision Language Model");
    }

    #[test]
    fn plan_errors() {
        assert_eq!(parse_plan("Known Info: {$X$}"), Err(ParseError::NoChainLine));
        assert_eq!(parse_plan("Tool Chain: []"), Err(ParseError::EmptyChain));
    }

    #[test]
    fn plan_preserves_duplicates() {
        let plan = parse_plan("Tool Chain: [*Camera Detection* -> *Camera Detection* -> *LLM*]").unwrap();
        assert_eq!(plan.chain, vec!["Camera Detection", "Camera Detection", "LLM"]);
    }

    #[test]
    fn validate_rejects_marker_content() {
        let call = ToolCall {
            purpose: "p </Purpose> extra".into(),
            query: "q".into(),
            materials: vec![],
            tool_name: "LLM".into(),
            terminal: false,
        };
        assert!(call.validate().is_err());
        let call = ToolCall {
            purpose: "p".into(),
            query: "q".into(),
            materials: vec!["a,b".into()],
            tool_name: "LLM".into(),
            terminal: false,
        };
        assert!(call.validate().is_err());
    }
}
