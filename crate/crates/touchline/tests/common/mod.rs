//! Shared builders for scripted fixtures used across integration tests:
//! the four-step golden match-question run and generated N-item evaluation
//! sets. Every builder is deterministic.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use touchline::gateway::ScriptedRule;
use touchline::harness::{QAItem, Task};

pub const Q2_QUESTION: &str =
    "What was the final score of the game 2015-02-21 - 18-00 Chelsea vs Burnley?";

pub const Q2_FINAL_ANSWER: &str = "The final score of the game was Chelsea 1 - 1 Burnley.";

pub fn crate_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(path: &str) -> PathBuf {
    crate_root().join("fixtures").join(path)
}

fn call_block(purpose: &str, query: &str, materials: &str, tool: &str, terminal: bool) -> String {
    let (open, close) = if terminal { ("<EndCall>", "</EndCall>") } else { ("<Call>", "</Call>") };
    format!(
        "{open}\n<Purpose>{purpose}</Purpose>\n<Query>{query}</Query>\n<Material>{materials}</Material>\n<Tool>{tool}</Tool>\n{close}"
    )
}

/// The scripted table driving the golden four-step run
/// [Game Search -> Game Info Retrieval -> Match History Retrieval -> LLM].
///
/// Rules for later steps key on distinctive substrings of the previous
/// step's output, and are ordered most-recent-step first because every
/// executor prompt embeds the whole transcript.
pub fn q2_golden_rules() -> Vec<ScriptedRule> {
    let match_file = "fixtures/corpus/matches/chelsea_burnley_2015-02-21.json";
    vec![
        // step 4: after the match-history answer arrived
        ScriptedRule::substring(
            "led 1 - 0 through Ivanovic",
            call_block(
                "Synthesize the retrieved information into the final answer",
                "Based on the retrieved information, what was the final score of the game between Chelsea and Burnley on 2015-02-21?",
                "None",
                "LLM",
                true,
            ),
        ),
        // step 3: after the game-info answer arrived
        ScriptedRule::substring(
            "[ANSWER]: The final score was Chelsea 1 - 1 Burnley.",
            call_block(
                "Cross-check the score against the recorded match events",
                "How did the goals unfold and what was the final score?",
                &format!("[\"{match_file}\"]"),
                "Match History Retrieval",
                false,
            ),
        ),
        // step 2: after game search returned the file path
        ScriptedRule::substring(
            "we found the most probable match in the database",
            call_block(
                "Retrieve the pre-kickoff information and final score from the match file",
                "Who played and what was the final score of this match?",
                &format!("[\"{match_file}\"]"),
                "Game Info Retrieval",
                false,
            ),
        ),
        // step 1: empty history
        ScriptedRule::substring(
            "start with your call of first step",
            call_block(
                "Identify which match the question refers to and retrieve its file",
                Q2_QUESTION,
                "None",
                "Game Search",
                false,
            ),
        ),
        // structured extraction inside Game Search
        ScriptedRule::substring(
            &format!("Input text: \"{Q2_QUESTION}\""),
            "league: unknown\nseason: unknown\ndate: 2015-02-21\nyear: 2015\nmonth: 02\nday: 21\ntime: 18:00\nscore: unknown\nteam1: Chelsea\nteam2: Burnley",
        ),
        // Game Info Retrieval prompt
        ScriptedRule::substring(
            "The match related information has been found",
            "[ANSWER]: The final score was Chelsea 1 - 1 Burnley. [EXPLANATION & REASONING]: The info block lists the final score as 1 - 1 for the 2015-02-21 fixture at Stamford Bridge.",
        ),
        // Match History Retrieval prompt
        ScriptedRule::substring(
            "The match history information has been found",
            "[ANSWER]: Chelsea led 1 - 0 through Ivanovic before Mee equalised at 81'; it ended 1 - 1. [EXPLANATION & REASONING]: The event list records goals at 14' and 81'.",
        ),
        // terminal LLM synthesis
        ScriptedRule::substring(
            "Based on the retrieved information, what was the final score",
            Q2_FINAL_ANSWER,
        ),
        // planner response: the worked Query-2 exemplar, drifted name and all
        ScriptedRule::substring(
            &format!("Query: \"{Q2_QUESTION}\""),
            "Known Info: {$GameContext$}\n\nTool Chain: [*Game Search* -> *Game info Retrieval* -> *Match History Retrieval* -> *LLM*]",
        ),
    ]
}

/// Scripted table reproducing the misrouted-tool shape: the model names an
/// unregistered tool at step 1, receives the error step result, then
/// recovers with a valid terminal call.
pub fn misrouted_rules() -> Vec<ScriptedRule> {
    vec![
        ScriptedRule::substring(
            "is not a registered tool",
            call_block(
                "Recover by searching for the game instead",
                "final answer after recovery",
                "None",
                "LLM",
                true,
            ),
        ),
        ScriptedRule::substring(
            "start with your call of first step",
            call_block(
                "Identify the player by the face in the clip",
                "who appears in this clip?",
                "None",
                "Face Recognition",
                false,
            ),
        ),
        ScriptedRule::exact("final answer after recovery", "recovered answer"),
        ScriptedRule::substring(
            "Query: \"misrouted fixture question?\"",
            "Known Info: {$VideoClip$}\nTool Chain: [*Game Search* -> *LLM*]",
        ),
    ]
}

/// One generated evaluation item plus whether the scripted choice selection
/// answers it correctly.
pub struct FixtureSpec {
    pub items: Vec<QAItem>,
    pub rules: Vec<ScriptedRule>,
    pub correct: Vec<bool>,
}

/// Builds `n` single-step items cycling through the thirteen tasks, with a
/// scripted table covering planner, executor, LLM tool and choice
/// selection for each. Items where `i % 7 == 3` are answered with a wrong
/// option. Choice rules come first, then planner, executor and tool rules:
/// the choice prompt embeds the whole trace, so its rules must shadow the
/// others.
pub fn scripted_eval_fixture(n: usize) -> FixtureSpec {
    let mut items = Vec::new();
    let mut correct = Vec::new();
    let mut choice_rules = Vec::new();
    let mut planner_rules = Vec::new();
    let mut exec_rules = Vec::new();
    let mut tool_rules = Vec::new();

    for i in 0..n {
        let task = Task::ALL[i % Task::ALL.len()];
        let id = format!("fx-{:03}", i + 1);
        let question = format!("Fixture question {id}: which keyword is expected here?");
        let options: Vec<String> =
            ["alpha", "bravo", "charlie", "delta"].iter().map(|o| format!("{o}-{id}")).collect();
        let answer_index = (i % 4) as u8 + 1;
        let is_correct = i % 7 != 3;
        let picked = if is_correct {
            answer_index
        } else {
            answer_index % 4 + 1 // deterministic wrong slot
        };

        choice_rules.push(ScriptedRule::substring(
            format!("This football question is \"{question}\""),
            format!("O{picked}"),
        ));
        planner_rules.push(ScriptedRule::substring(
            format!("Query: \"{question}\""),
            "Known Info: {$GameContext$}\nTool Chain: [*LLM*]".to_string(),
        ));
        exec_rules.push(ScriptedRule::substring(
            format!("tool chain to answer the question:\n\n\"{question}\""),
            call_block(
                "Answer directly from general knowledge",
                &format!("fixture answer request {id}"),
                "None",
                "LLM",
                true,
            ),
        ));
        tool_rules.push(ScriptedRule::exact(
            format!("fixture answer request {id}"),
            format!("The expected keyword is {}.", options[answer_index as usize - 1]),
        ));

        items.push(QAItem {
            id,
            task,
            question,
            options,
            answer_index,
            materials: vec![],
            modality: None,
        });
        correct.push(is_correct);
    }

    let mut rules = choice_rules;
    rules.extend(planner_rules);
    rules.extend(exec_rules);
    rules.extend(tool_rules);
    FixtureSpec { items, rules, correct }
}

/// All-correct thirteen-item fixture, one item per task.
pub fn thirteen_fixture() -> FixtureSpec {
    let mut spec = scripted_eval_fixture(13);
    // overwrite the wrong-answer slot: the thirteen-item golden is all-correct
    for (i, item) in spec.items.iter().enumerate() {
        if !spec.correct[i] {
            let rule = spec
                .rules
                .iter_mut()
                .find(|r| r.pattern.contains(&format!("This football question is \"{}\"", item.question)))
                .expect("choice rule exists");
            rule.response_text = format!("O{}", item.answer_index);
            spec.correct[i] = true;
        }
    }
    spec
}

pub fn write_jsonl(items: &[QAItem], path: &Path) {
    let mut body = String::new();
    for item in items {
        body.push_str(&serde_json::to_string(item).unwrap());
        body.push('\n');
    }
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, body).unwrap();
}

pub fn write_rules(rules: &[ScriptedRule], path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let body = serde_json::to_string_pretty(rules).unwrap();
    std::fs::write(path, format!("{body}\n")).unwrap();
}
