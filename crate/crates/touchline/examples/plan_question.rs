//! Tool-chain planning against a scripted gateway: build the decomposition
//! prompt, obtain the chain, and canonicalize drifted tool names.

use touchline::gateway::{Gateway, ScriptedRule};
use touchline::planner::{Planner, TaskCatalog};
use touchline::toolbox::{Registry, StubMode};

fn main() {
    let registry = Registry::builtin(StubMode::Unconfigured);
    let catalog = TaskCatalog::builtin();

    let question = "What was the final score of the game 2015-02-21 - 18-00 Chelsea vs Burnley?";
    // the canned response uses "Game info Retrieval" (lowercase i) on
    // purpose: the validator maps it onto the canonical registry name
    let gateway = Gateway::scripted(vec![ScriptedRule::substring(
        format!("Query: \"{question}\""),
        "Known Info: {$GameContext$}\n\nTool Chain: [*Game Search* -> *Game info Retrieval* -> *Match History Retrieval* -> *LLM*]",
    )]);

    let planner = Planner::new(&registry, &catalog, &gateway);
    let prompt = planner.build_prompt(question, &[]);
    println!("planning prompt is {} chars, {} tool descriptors\n", prompt.len(), 18);

    let plan = planner.plan(question, &[]).expect("plan succeeds");
    println!("known info: {:?}", plan.known_info);
    println!("canonical chain:");
    for (i, tool) in plan.chain.iter().enumerate() {
        println!("  {}. {tool}", i + 1);
    }
}
