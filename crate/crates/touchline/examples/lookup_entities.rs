//! Entity lookup ladder: exact match, order/punctuation-insensitive
//! normalization, and bounded fuzzy matching.

use std::error::Error;
use std::path::Path;

use touchline::kb;

fn main() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = kb::ingest(
        &root.join("fixtures/corpus/entities"),
        &root.join("fixtures/corpus/matches/index.csv"),
    )?;
    println!("corpus: {} entities", corpus.entity_count());

    for query in ["Lionel Messi", "messi, lionel", "LIONEL MESSI", "Lionel Mesi", "Leo Messi"] {
        match corpus.find_entity("player", query) {
            Some(record) => println!("{query:<15} -> {} ({})", record.name, record.source_path),
            None => println!("{query:<15} -> no unique match"),
        }
    }

    // kinds are separate namespaces
    assert!(corpus.find_entity("referee", "Lionel Messi").is_none());
    let venue = corpus.find_entity("venue", "camp nou").expect("venue resolves");
    println!("\nvenue page excerpt: {}", venue.page.lines().next().unwrap_or_default());
    Ok(())
}
