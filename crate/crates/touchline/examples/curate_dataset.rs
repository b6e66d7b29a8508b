//! Dataset curation: template-based question generation, multiple-choice
//! conversion with category distractors, and the review worksheet.

use std::collections::BTreeMap;
use std::error::Error;

use touchline::curation::{
    self, AnnotationRecord, DistractorStrategy, TemplateBank, to_multichoice,
};
use touchline::harness::Task;

fn main() -> Result<(), Box<dyn Error>> {
    let bank = TemplateBank::builtin();
    let pool: Vec<String> = ["corner", "goal", "free kick", "penalty", "offside", "save"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let mut items = Vec::new();
    for (i, label) in ["corner", "goal", "penalty"].iter().enumerate() {
        let mut payload = BTreeMap::new();
        payload.insert("answer".to_string(), label.to_string());
        let record = AnnotationRecord {
            id: format!("ev-{i:03}"),
            source: "event-labels".into(),
            task: Task::Q9,
            payload,
            materials: vec![format!("clips/event_{i}.mp4")],
        };
        let openqa = curation::template_generate(&bank, &record, 11)?;
        let item = to_multichoice(&openqa, &pool, DistractorStrategy::Category, 11, None)?;
        println!("{}: {}", item.id, item.question);
        for (slot, option) in item.options.iter().enumerate() {
            let mark = if slot + 1 == item.answer_index as usize { "*" } else { " " };
            println!("  {mark} O{}: {option}", slot + 1);
        }
        items.push(item);
    }

    let report = curation::validate_dataset(&items, &curation::default_targets());
    println!("\nvalidation findings: {}", report.findings.len());
    for finding in &report.findings {
        println!("  [{}] {}: {}", finding.kind, finding.id, finding.message);
    }
    let worksheet = curation::render_worksheet(&items, &report);
    println!("\nworksheet preview:\n{}", worksheet.lines().take(5).collect::<Vec<_>>().join("\n"));
    Ok(())
}
