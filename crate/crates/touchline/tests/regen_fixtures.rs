//! Regenerates the committed scripted tables, datasets and golden files.
//! Run manually after intentional format changes:
//!
//! ```bash
//! cargo test --test regen_fixtures -- --ignored
//! ```

mod common;

use common::*;
use touchline::executor::Agent;
use touchline::gateway::Gateway;
use touchline::harness::{self, ReportFormat};
use touchline::kb;
use touchline::planner::TaskCatalog;
use touchline::toolbox::{Registry, StubMode};

#[test]
#[ignore = "rewrites committed fixtures"]
fn regen_fixtures() {
    // scripted tables and datasets
    write_rules(&q2_golden_rules(), &fixture("scripted/q2_golden.json"));
    let thirteen = thirteen_fixture();
    write_jsonl(&thirteen.items, &fixture("datasets/thirteen.jsonl"));
    write_rules(&thirteen.rules, &fixture("scripted/thirteen.json"));

    std::fs::create_dir_all(fixture("golden")).unwrap();

    // golden trace (relative corpus paths keep the file portable)
    let registry = Registry::builtin(StubMode::Unconfigured);
    let catalog = TaskCatalog::builtin();
    let corpus = kb::ingest(
        std::path::Path::new("fixtures/corpus/entities"),
        std::path::Path::new("fixtures/corpus/matches/index.csv"),
    )
    .unwrap();
    let gateway = Gateway::scripted(q2_golden_rules());
    let agent = Agent::new(&registry, &catalog, &gateway, Some(&corpus));
    let (answer, trace) = agent.answer(Q2_QUESTION, &[]);
    assert_eq!(answer, Q2_FINAL_ANSWER);
    assert!(trace.completed());
    std::fs::write(fixture("golden/q2_trace.txt"), trace.render()).unwrap();

    // golden evaluation report over the thirteen-item set
    let gateway = Gateway::scripted(thirteen.rules.clone());
    let agent = Agent::new(&registry, &catalog, &gateway, None);
    let report = harness::evaluate(&thirteen.items, &agent, &gateway, 4, None).unwrap();
    std::fs::write(
        fixture("golden/thirteen_report.txt"),
        harness::render_report(&report, ReportFormat::Human),
    )
    .unwrap();
    std::fs::write(
        fixture("golden/thirteen_report.json"),
        harness::render_report(&report, ReportFormat::Json),
    )
    .unwrap();
}
