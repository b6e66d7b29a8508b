//! Record/replay caching for model calls: record responses once, replay
//! them byte-identically with the strict offline backend.

use std::error::Error;
use std::sync::Arc;

use touchline::gateway::{
    Backend, ChatRequest, Gateway, RecordingBackend, ReplayBackend, ResponseCache,
    ScriptedBackend, ScriptedRule,
};

fn main() -> Result<(), Box<dyn Error>> {
    let cache_dir = std::env::temp_dir().join("touchline-replay-example");
    let _ = std::fs::remove_dir_all(&cache_dir);

    // stand-in for a live endpoint
    let upstream: Arc<dyn Backend> = Arc::new(ScriptedBackend::new(vec![
        ScriptedRule::substring("who won", "Chelsea won 2 - 1."),
        ScriptedRule::substring("who scored", "Hazard and Costa scored."),
    ]));

    // record pass
    let cache = Arc::new(ResponseCache::open(&cache_dir)?);
    let recorder = Gateway::new(Arc::new(RecordingBackend::new(upstream, cache)));
    let first = recorder.complete(&ChatRequest::user("example", "who won the match?"))?;
    recorder.complete(&ChatRequest::user("example", "who scored?"))?;
    println!("recorded: {}", first.text);

    // replay pass: a fresh handle over the same directory, no upstream
    let replay = ReplayBackend::open(&cache_dir)?;
    let cached = replay.complete(&ChatRequest::user("example", "who won the match?"))?;
    assert_eq!(cached.text, first.text);
    println!("replayed: {}", cached.text);

    let miss = replay.complete(&ChatRequest::user("example", "a question never recorded"));
    println!("unrecorded request fails loudly: {}", miss.unwrap_err());
    println!("cache stats: {:?}", replay.cache().stats());
    Ok(())
}
