//! Structured match search over the bundled corpus: query extraction,
//! candidate filtering with team-name containment, and the three search
//! outcomes.

use std::error::Error;
use std::path::Path;

use touchline::gateway::{Gateway, ScriptedRule};
use touchline::kb::{self, filter_candidates, MatchQuery, SearchOutcome};

fn main() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = kb::ingest(
        &root.join("fixtures/corpus/entities"),
        &root.join("fixtures/corpus/matches/index.csv"),
    )?;
    println!("corpus: {} matches indexed", corpus.match_count());

    // containment keeps "Chelsea" ⊆ "Chelsea FC" and drops unrelated teams
    let query = MatchQuery { team1: Some("Chelsea".into()), ..Default::default() };
    let survivors = filter_candidates(&query, corpus.matches());
    println!("\n\"Chelsea\" alone keeps {} candidates:", survivors.len());
    for record in &survivors {
        println!("  {} vs {} on {}", record.home_team, record.away_team,
            record.date.clone().unwrap_or_else(|| "unknown".into()));
    }

    // a full question narrows to a single file
    let gateway = Gateway::scripted(vec![ScriptedRule::substring(
        "Input text:",
        "league: unknown\nseason: unknown\ndate: 2015-02-21\nyear: 2015\nmonth: 02\nday: 21\ntime: 18:00\nscore: unknown\nteam1: Chelsea\nteam2: Burnley",
    )]);
    let outcome = kb::game_search(&corpus, &gateway, "final score of Chelsea vs Burnley?")?;
    match outcome {
        SearchOutcome::Single { file_path, message } => {
            println!("\nsingle hit: {file_path}");
            println!("advisory: {message}");
        }
        SearchOutcome::Ambiguous { summaries, .. } => {
            println!("\nambiguous among {} candidates", summaries.len());
        }
        SearchOutcome::None { message } => println!("\n{message}"),
    }
    Ok(())
}
