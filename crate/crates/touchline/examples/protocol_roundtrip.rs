//! The structured-instruction grammar: render a call, parse model output
//! with prose around it, and decompose a planning response.

use touchline::protocol::{self, StepResult, ToolCall};

fn main() {
    let call = ToolCall {
        purpose: "Classify the camera position of the selected frame".into(),
        query: "What is the camera position in this picture?".into(),
        materials: vec!["frame_0420.png".into()],
        tool_name: "Camera Detection".into(),
        terminal: false,
    };
    let rendered = protocol::render_call(&call);
    println!("rendered instruction:\n{rendered}\n");

    let parsed = protocol::parse_call(&rendered).expect("own rendering parses");
    assert_eq!(parsed, call);

    // models chatter; parsing only cares about the single block
    let noisy = format!("Sure — here is my next step.\n{rendered}\nLet me know how it goes!");
    let parsed = protocol::parse_call(&noisy).expect("prose-tolerant");
    println!("parsed tool from noisy output: {}", parsed.tool_name);

    let feedback = protocol::render_step_result(&StepResult::new("Main camera center"));
    println!("\nfeedback block:\n{feedback}");

    let plan = protocol::parse_plan(
        "Known Info: {$VideoClip$}\n\nTool Chain: [*Shot Change* -> *Camera Detection* -> *LLM*]",
    )
    .expect("plan parses");
    println!("\nplanned chain: {:?}", plan.chain);
}
