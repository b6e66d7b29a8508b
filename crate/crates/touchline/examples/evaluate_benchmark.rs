//! Benchmark evaluation on the bundled thirteen-item fixture set: the agent
//! answers open-ended (options withheld), answers are mapped to options,
//! and accuracy aggregates with sample weighting.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use touchline::executor::Agent;
use touchline::gateway::{Gateway, ScriptedBackend};
use touchline::harness::{self, ReportFormat};
use touchline::planner::TaskCatalog;
use touchline::toolbox::{Registry, StubMode};

fn main() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let items = harness::load_dataset(&root.join("fixtures/datasets/thirteen.jsonl"))?;
    println!("loaded {} items across {} tasks\n", items.len(), harness::task_counts(&items).len());

    let registry = Registry::builtin(StubMode::Unconfigured);
    let catalog = TaskCatalog::builtin();
    let backend = ScriptedBackend::from_file(&root.join("fixtures/scripted/thirteen.json"))?;
    let gateway = Gateway::new(Arc::new(backend));
    let agent = Agent::new(&registry, &catalog, &gateway, None);

    let report = harness::evaluate(&items, &agent, &gateway, 4, None)?;
    print!("{}", harness::render_report(&report, ReportFormat::Human));

    // the aggregation also runs standalone over published per-task numbers
    let accuracy = report.per_task.iter().map(|(t, s)| (*t, s.accuracy)).collect();
    let counts = harness::task_counts(&items);
    let (categories, overall) = harness::aggregate(&accuracy, &counts)?;
    println!("\nrecomputed from per-task numbers: {categories:?}, overall {overall}");
    Ok(())
}
