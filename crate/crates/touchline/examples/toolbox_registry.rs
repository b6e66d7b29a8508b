//! The declarative tool registry: descriptors, alias resolution with
//! nearest-name suggestions, and deterministic fixture-backed invocation.

use std::path::Path;

use touchline::toolbox::{
    FixtureRow, FixtureTable, Registry, StubMode, ToolContext, ToolRequest, ToolboxError,
};

fn main() {
    let frame = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/media/frame.png")
        .display()
        .to_string();
    let registry = Registry::builtin(StubMode::Fixtures(FixtureTable::new(vec![FixtureRow {
        tool: "Camera Detection".into(),
        query_pattern: None,
        materials_pattern: Some("frame.png".into()),
        output_text: "Main camera center".into(),
        produced_files: vec![],
    }])));

    println!("{} tools; first descriptor block:\n", registry.len());
    let text = registry.render_descriptions();
    println!("{}\n", text.split("\n\n=== ").next().unwrap_or_default());

    // drifted names resolve through the alias table
    for name in ["Shot Change", "Vision Language Model", "Game info Retrieval"] {
        println!("{name:<22} -> {}", registry.canonical(name).unwrap());
    }

    // typos come back with suggestions for the repair loop
    match registry.resolve("Gane Search") {
        Err(ToolboxError::NotFound { suggestions, .. }) => {
            println!("Gane Search            -> unknown, suggestions: {suggestions:?}");
        }
        other => panic!("unexpected: {other:?}"),
    }

    // fixture-backed tools answer deterministically
    let request = ToolRequest::new("", vec![frame]);
    let output = registry.invoke("Camera Detection", &request, &ToolContext::default()).unwrap();
    println!("\nCamera Detection on the bundled frame: {}", output.text);
}
