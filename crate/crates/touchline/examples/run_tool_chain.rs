//! The full pipeline on the bundled match corpus: plan a four-tool chain,
//! execute it step by step against the scripted gateway, and print the
//! resulting trace.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use touchline::executor::Agent;
use touchline::gateway::{Gateway, ScriptedBackend};
use touchline::kb;
use touchline::planner::TaskCatalog;
use touchline::toolbox::{Registry, StubMode};

fn main() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    std::env::set_current_dir(root)?; // fixture tables use repo-relative paths

    let registry = Registry::builtin(StubMode::Unconfigured);
    let catalog = TaskCatalog::builtin();
    let corpus = kb::ingest(
        Path::new("fixtures/corpus/entities"),
        Path::new("fixtures/corpus/matches/index.csv"),
    )?;
    let backend = ScriptedBackend::from_file(Path::new("fixtures/scripted/q2_golden.json"))?;
    let gateway = Gateway::new(Arc::new(backend));

    let agent = Agent::new(&registry, &catalog, &gateway, Some(&corpus));
    let question = "What was the final score of the game 2015-02-21 - 18-00 Chelsea vs Burnley?";
    let (answer, trace) = agent.answer(question, &[]);

    println!("{}", trace.render());
    println!("steps executed: {}", trace.steps.len());
    println!("final answer: {answer}");
    Ok(())
}
