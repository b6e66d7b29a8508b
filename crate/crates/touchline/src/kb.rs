//! Local soccer knowledge base: wiki-style entity records plus indexed
//! match files, with entity lookup, structured match search and
//! info/history retrieval.
//!
//! The corpus is built once from pre-collected files and is immutable
//! afterwards; every query path is read-only.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::text::{self, levenshtein, names_contain};

const EXTRACT_PROMPT: &str = include_str!("../data/game_extract.txt");
const SELECT_PROMPT: &str = include_str!("../data/game_select.txt");
const ENTITY_PROMPT: &str = include_str!("../data/entity_search.txt");
const HISTORY_PROMPT: &str = include_str!("../data/match_history.txt");
const INFO_PROMPT: &str = include_str!("../data/game_info.txt");
const AUGMENT_PROMPT: &str = include_str!("../data/retrieval_augment.txt");

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("match-query extraction stayed malformed after a re-prompt: {response:?}")]
    ExtractionMalformed { response: String },
    #[error("entity tuple stayed malformed after a re-prompt: {response:?}")]
    TupleMalformed { response: String },
    #[error("file missing: {0}")]
    FileMissing(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> KbError {
    KbError::Parse { file: file.display().to_string(), line, message: message.into() }
}

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

pub const ENTITY_KINDS: [&str; 4] = ["player", "team", "referee", "venue"];

/// One wiki-style entity record loaded from a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub kind: String,
    pub name: String,
    pub page: String,
    pub image_refs: Vec<String>,
    pub source_path: String,
}

/// Order-insensitive normalized form used as the corpus uniqueness key:
/// case/diacritics folded, punctuation stripped, tokens sorted.
pub fn normalized_name(s: &str) -> String {
    let mut tokens = text::tokens(s);
    tokens.sort();
    tokens.join(" ")
}

// ---------------------------------------------------------------------------
// Matches
// ---------------------------------------------------------------------------

pub const LEAGUES: [&str; 6] = [
    "england_epl",
    "germany_bundesliga",
    "europe_uefa-champions-league",
    "italy_serie-a",
    "france_league-1",
    "spain_laliga",
];

/// One indexed match row. Optional fields hold `None` where the index says
/// `unknown`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub league: String,
    pub season: Option<String>,
    pub date: Option<String>,
    pub year: Option<u32>,
    pub month: Option<u32>,
    pub day: Option<u32>,
    pub time: Option<String>,
    pub score: Option<String>,
    pub home_team: String,
    pub away_team: String,
    pub file_path: String,
}

/// Structured match-search fields extracted from a question. A field is
/// `None` unless explicitly derivable from the question text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchQuery {
    pub league: Option<String>,
    pub season: Option<String>,
    pub date: Option<String>,
    pub year: Option<u32>,
    pub month: Option<u32>,
    pub day: Option<u32>,
    pub time: Option<String>,
    pub score: Option<String>,
    pub team1: Option<String>,
    pub team2: Option<String>,
}

impl MatchQuery {
    fn render_info(&self) -> String {
        fn show(v: &Option<String>) -> String {
            v.clone().unwrap_or_else(|| "unknown".into())
        }
        fn show_num(v: Option<u32>) -> String {
            v.map(|n| n.to_string()).unwrap_or_else(|| "unknown".into())
        }
        format!(
            "league: {}\nseason: {}\ndate: {}\nyear: {}\nmonth: {}\nday: {}\ntime: {}\nscore: {}\nteam1: {}\nteam2: {}",
            show(&self.league),
            show(&self.season),
            show(&self.date),
            show_num(self.year),
            show_num(self.month),
            show_num(self.day),
            show(&self.time),
            show(&self.score),
            show(&self.team1),
            show(&self.team2),
        )
    }
}

/// Candidate facts surfaced when a search stays ambiguous; deliberately
/// carries no file path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSummary {
    pub league: String,
    pub season: Option<String>,
    pub date: Option<String>,
    pub time: Option<String>,
    pub score: Option<String>,
    pub home_team: String,
    pub away_team: String,
}

impl fmt::Display for CandidateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unknown = || "unknown".to_string();
        write!(
            f,
            "{} vs {} ({}, season {}, date {}, time {}, score {})",
            self.home_team,
            self.away_team,
            self.league,
            self.season.clone().unwrap_or_else(unknown),
            self.date.clone().unwrap_or_else(unknown),
            self.time.clone().unwrap_or_else(unknown),
            self.score.clone().unwrap_or_else(unknown),
        )
    }
}

impl From<&MatchRecord> for CandidateSummary {
    fn from(r: &MatchRecord) -> Self {
        Self {
            league: r.league.clone(),
            season: r.season.clone(),
            date: r.date.clone(),
            time: r.time.clone(),
            score: r.score.clone(),
            home_team: r.home_team.clone(),
            away_team: r.away_team.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Single { file_path: String, message: String },
    Ambiguous { summaries: Vec<CandidateSummary>, message: String },
    None { message: String },
}

// ---------------------------------------------------------------------------
// Match detail files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub minute: serde_json::Value,
    #[serde(rename = "type")]
    pub event_type: String,
    #[serde(default)]
    pub team: String,
    #[serde(default)]
    pub player: String,
    #[serde(default)]
    pub detail: String,
}

/// A match detail file: an `info` block of pre-kickoff facts plus final
/// score, and the ordered `history` event list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchDetail {
    pub info: BTreeMap<String, serde_json::Value>,
    pub history: Vec<HistoryEvent>,
}

impl MatchDetail {
    pub fn load(path: &Path) -> Result<Self, KbError> {
        if !path.exists() {
            return Err(KbError::FileMissing(path.display().to_string()));
        }
        let raw = fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| parse_err(path, e.line(), e.to_string()))
    }

    pub fn render_info(&self) -> String {
        self.info
            .iter()
            .map(|(k, v)| format!("{k}: {}", render_value(v)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn render_history(&self) -> String {
        if self.history.is_empty() {
            return "(no recorded events)".to_string();
        }
        self.history
            .iter()
            .map(|e| {
                format!(
                    "{}' | {} | {} | {} | {}",
                    render_value(&e.minute),
                    e.event_type,
                    e.team,
                    e.player,
                    e.detail
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn render_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => {
            items.iter().map(render_value).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Corpus & ingest
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Corpus {
    entities: Vec<EntityRecord>,
    exact: BTreeMap<(String, String), usize>,
    normalized: BTreeMap<(String, String), usize>,
    matches: Vec<MatchRecord>,
}

impl Corpus {
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn match_count(&self) -> usize {
        self.matches.len()
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn entities(&self) -> &[EntityRecord] {
        &self.entities
    }

    pub fn find_exact(&self, kind: &str, name: &str) -> Option<&EntityRecord> {
        self.exact.get(&(kind.to_string(), name.to_string())).map(|&i| &self.entities[i])
    }

    /// Full lookup ladder: exact, then normalized, then bounded fuzzy
    /// (normalized edit distance ≤ 0.2 of the name length, best unique hit).
    pub fn find_entity(&self, kind: &str, name: &str) -> Option<&EntityRecord> {
        if let Some(hit) = self.find_exact(kind, name) {
            return Some(hit);
        }
        let norm = normalized_name(name);
        if let Some(&i) = self.normalized.get(&(kind.to_string(), norm.clone())) {
            return Some(&self.entities[i]);
        }
        if norm.is_empty() {
            return None;
        }
        let budget = 0.2 * norm.chars().count() as f64;
        let mut best: Option<(usize, usize)> = None; // (distance, index)
        let mut tied = false;
        for (i, record) in self.entities.iter().enumerate() {
            if record.kind != kind {
                continue;
            }
            let d = levenshtein(&norm, &normalized_name(&record.name));
            if d as f64 > budget {
                continue;
            }
            match best {
                Some((bd, _)) if d > bd => {}
                Some((bd, _)) if d == bd => tied = true,
                _ => {
                    best = Some((d, i));
                    tied = false;
                }
            }
        }
        match (best, tied) {
            (Some((_, i)), false) => Some(&self.entities[i]),
            _ => None,
        }
    }
}

/// Builds the in-memory corpus from an entity directory and a match index.
///
/// Entity files carry a small header (`kind:`, `name:`, optional `images:`),
/// a `---` separator, and the page body. The match index is a delimited
/// table with exactly the candidate columns of the search prompt.
pub fn ingest(entity_dir: &Path, match_index: &Path) -> Result<Corpus, KbError> {
    let mut entities = Vec::new();
    let mut exact = BTreeMap::new();
    let mut normalized = BTreeMap::new();

    let mut entries: Vec<_> = fs::read_dir(entity_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    for path in entries {
        let record = parse_entity_file(&path)?;
        let exact_key = (record.kind.clone(), record.name.clone());
        let norm_key = (record.kind.clone(), normalized_name(&record.name));
        if exact.contains_key(&exact_key) || normalized.contains_key(&norm_key) {
            return Err(parse_err(
                &path,
                1,
                format!("duplicate entity ({}, {:?})", record.kind, record.name),
            ));
        }
        let idx = entities.len();
        exact.insert(exact_key, idx);
        normalized.insert(norm_key, idx);
        entities.push(record);
    }

    let matches = parse_match_index(match_index)?;
    Ok(Corpus { entities, exact, normalized, matches })
}

fn parse_entity_file(path: &Path) -> Result<EntityRecord, KbError> {
    let raw = fs::read_to_string(path)?;
    let mut kind = None;
    let mut name = None;
    let mut image_refs = Vec::new();
    let mut body_start = None;
    for (i, line) in raw.lines().enumerate() {
        if line.trim() == "---" {
            body_start = Some(i + 1);
            break;
        }
        if let Some(v) = line.strip_prefix("kind:") {
            let v = v.trim().to_lowercase();
            if !ENTITY_KINDS.contains(&v.as_str()) {
                return Err(parse_err(path, i + 1, format!("unknown entity kind {v:?}")));
            }
            kind = Some(v);
        } else if let Some(v) = line.strip_prefix("name:") {
            name = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("images:") {
            image_refs = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
        }
    }
    let kind = kind.ok_or_else(|| parse_err(path, 1, "missing kind: header"))?;
    let name = name.ok_or_else(|| parse_err(path, 1, "missing name: header"))?;
    if name.is_empty() {
        return Err(parse_err(path, 1, "empty entity name"));
    }
    let body_start = body_start.ok_or_else(|| parse_err(path, 1, "missing --- separator"))?;
    let page: String = raw.lines().skip(body_start).collect::<Vec<_>>().join("\n");
    if page.trim().is_empty() {
        return Err(parse_err(path, body_start + 1, "empty page body"));
    }
    Ok(EntityRecord {
        kind,
        name,
        page,
        image_refs,
        source_path: path.display().to_string(),
    })
}

fn parse_match_index(path: &Path) -> Result<Vec<MatchRecord>, KbError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<IndexRow>().enumerate() {
        let line = i + 2; // header is line 1
        let row = row.map_err(|e| parse_err(path, line, e.to_string()))?;
        let league = row.league.trim().to_string();
        if league != "unknown" && !LEAGUES.contains(&league.as_str()) {
            return Err(parse_err(path, line, format!("league {league:?} not in the closed set")));
        }
        if row.home_team.trim().is_empty() || row.away_team.trim().is_empty() {
            return Err(parse_err(path, line, "empty team name"));
        }
        let file_path = base.join(row.file_path.trim()).display().to_string();
        let detail = Path::new(&file_path);
        if !detail.exists() {
            return Err(parse_err(path, line, format!("detail file {file_path:?} does not exist")));
        }
        MatchDetail::load(detail)?;
        out.push(MatchRecord {
            league,
            season: opt_str(&row.season),
            date: opt_str(&row.date),
            year: opt_num(&row.year),
            month: opt_num(&row.month),
            day: opt_num(&row.day),
            time: opt_str(&row.time),
            score: opt_str(&row.score),
            home_team: row.home_team.trim().to_string(),
            away_team: row.away_team.trim().to_string(),
            file_path,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct IndexRow {
    league: String,
    season: String,
    date: String,
    year: String,
    month: String,
    day: String,
    time: String,
    score: String,
    home_team: String,
    away_team: String,
    file_path: String,
}

fn opt_str(v: &str) -> Option<String> {
    let v = v.trim();
    if v.is_empty() || v.eq_ignore_ascii_case("unknown") {
        None
    } else {
        Some(v.to_string())
    }
}

fn opt_num(v: &str) -> Option<u32> {
    opt_str(v)?.parse().ok()
}

// ---------------------------------------------------------------------------
// Structured extraction
// ---------------------------------------------------------------------------

const EXTRACT_FIELDS: [&str; 10] =
    ["league", "season", "date", "year", "month", "day", "time", "score", "team1", "team2"];

/// Sends the extraction prompt and parses the ten labelled lines.
/// Unparseable lines become unknown; a response with no recognizable line
/// at all is re-prompted once.
pub fn extract_match_query(gateway: &Gateway, question: &str) -> Result<MatchQuery, KbError> {
    let prompt = EXTRACT_PROMPT.replace("{question}", question);
    let mut request = ChatRequest::user("tool:Game Search:extract", prompt);
    let first = gateway.complete(&request)?;
    if let Some(query) = parse_extraction(&first.text) {
        return Ok(query);
    }
    request = request.with_followup(
        first.text.clone(),
        "Your previous response did not follow the required format. Respond again with exactly the ten labelled lines (league, season, date, year, month, day, time, score, team1, team2) and nothing else.",
    );
    let second = gateway.complete(&request)?;
    parse_extraction(&second.text)
        .ok_or(KbError::ExtractionMalformed { response: second.text })
}

fn parse_extraction(text: &str) -> Option<MatchQuery> {
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        for field in EXTRACT_FIELDS {
            if values.contains_key(field) {
                continue;
            }
            let label = format!("{field}:");
            if line.len() >= label.len() && line[..label.len()].eq_ignore_ascii_case(&label) {
                values.insert(field, line[label.len()..].trim().to_string());
                break;
            }
        }
    }
    if values.is_empty() {
        return None;
    }
    let get = |field: &str| -> Option<String> { values.get(field).and_then(|v| opt_str(v)) };
    let mut query = MatchQuery {
        league: get("league").filter(|v| LEAGUES.contains(&v.as_str())),
        season: get("season").filter(|v| is_season(v)),
        date: get("date").filter(|v| is_date(v)),
        year: get("year").and_then(|v| v.parse().ok()),
        month: get("month").and_then(|v| v.parse().ok()),
        day: get("day").and_then(|v| v.parse().ok()),
        time: get("time").filter(|v| parse_time(v).is_some()),
        score: get("score").filter(|v| parse_score(v).is_some()),
        team1: get("team1"),
        team2: get("team2"),
    };
    if query.team1.is_none() && query.team2.is_some() {
        query.team1 = query.team2.take();
    }
    Some(query)
}

fn is_season(v: &str) -> bool {
    let parts: Vec<&str> = v.split('-').collect();
    parts.len() == 2 && parts.iter().all(|p| p.len() == 4 && p.chars().all(|c| c.is_ascii_digit()))
}

fn is_date(v: &str) -> bool {
    let parts: Vec<&str> = v.split('-').collect();
    parts.len() == 3
        && parts[0].len() == 4
        && parts.iter().all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

/// Minute-granularity time: accepts `18:00` and `18-00`.
pub fn parse_time(v: &str) -> Option<(u32, u32)> {
    let v = v.trim();
    let (h, m) = v.split_once([':', '-'])?;
    let h: u32 = h.trim().parse().ok()?;
    let m: u32 = m.trim().parse().ok()?;
    (h < 24 && m < 60).then_some((h, m))
}

/// Score in `x - x` form with flexible spacing.
pub fn parse_score(v: &str) -> Option<(u32, u32)> {
    let (a, b) = v.trim().split_once('-')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

// ---------------------------------------------------------------------------
// Candidate filtering & game search
// ---------------------------------------------------------------------------

/// Applies the exclusion rules to a candidate set: a candidate is dropped
/// when any known query team fails the bidirectional token-containment test
/// against both candidate team names, or when any known scalar field
/// (date, season, league, score, time) contradicts under exact normalized
/// comparison. An empty result is valid.
pub fn filter_candidates(query: &MatchQuery, candidates: &[MatchRecord]) -> Vec<MatchRecord> {
    candidates.iter().filter(|c| candidate_passes(query, c)).cloned().collect()
}

fn candidate_passes(query: &MatchQuery, candidate: &MatchRecord) -> bool {
    for team in [&query.team1, &query.team2].into_iter().flatten() {
        if !names_contain(team, &candidate.home_team) && !names_contain(team, &candidate.away_team) {
            return false;
        }
    }
    if let (Some(a), Some(b)) = (&query.date, &candidate.date) {
        if a != b {
            return false;
        }
    }
    if let (Some(a), Some(b)) = (&query.season, &candidate.season) {
        if a != b {
            return false;
        }
    }
    if let Some(league) = &query.league {
        if candidate.league != "unknown" && *league != candidate.league {
            return false;
        }
    }
    if let (Some(a), Some(b)) = (
        query.score.as_deref().and_then(parse_score),
        candidate.score.as_deref().and_then(parse_score),
    ) {
        if a != b {
            return false;
        }
    }
    if let (Some(a), Some(b)) = (
        query.time.as_deref().and_then(parse_time),
        candidate.time.as_deref().and_then(parse_time),
    ) {
        if a != b {
            return false;
        }
    }
    true
}

/// Scalar pre-filter applied to the whole index before team linkage; also
/// narrows by year/month/day when both sides know them.
fn prefilter<'a>(query: &MatchQuery, rows: &'a [MatchRecord]) -> Vec<&'a MatchRecord> {
    rows.iter()
        .filter(|r| {
            if let (Some(a), Some(b)) = (query.year, r.year) {
                if a != b {
                    return false;
                }
            }
            if let (Some(a), Some(b)) = (query.month, r.month) {
                if a != b {
                    return false;
                }
            }
            if let (Some(a), Some(b)) = (query.day, r.day) {
                if a != b {
                    return false;
                }
            }
            true
        })
        .collect()
}

fn render_candidates(rows: &[MatchRecord]) -> String {
    let unknown = || "unknown".to_string();
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "Candidate {}:\n- League: {}\n- Season: {}\n- Date: {}\n- Year: {}\n- Month: {}\n- Day: {}\n- Time: {}\n- Score: {}\n- Home Team: {}\n- Away Team: {}\n- file_path: {}",
                i + 1,
                r.league,
                r.season.clone().unwrap_or_else(unknown),
                r.date.clone().unwrap_or_else(unknown),
                r.year.map(|v| v.to_string()).unwrap_or_else(unknown),
                r.month.map(|v| v.to_string()).unwrap_or_else(unknown),
                r.day.map(|v| v.to_string()).unwrap_or_else(unknown),
                r.time.clone().unwrap_or_else(unknown),
                r.score.clone().unwrap_or_else(unknown),
                r.home_team,
                r.away_team,
                r.file_path,
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn single_message(record: &MatchRecord) -> String {
    let unknown = || "unknown".to_string();
    format!(
        "The given information seems incomplete, but we found the most probable match in the database with this file path: {}. The match is {} (home) vs {} (away) on {} at {}, {} season {}, final score {}.",
        record.file_path,
        record.home_team,
        record.away_team,
        record.date.clone().unwrap_or_else(unknown),
        record.time.clone().unwrap_or_else(unknown),
        record.league,
        record.season.clone().unwrap_or_else(unknown),
        record.score.clone().unwrap_or_else(unknown),
    )
}

/// Retrieves the match a question refers to: structured extraction, scalar
/// pre-filtering, team-containment filtering, then either a deterministic
/// single hit, a model-arbitrated pick among comparable survivors, or an
/// ambiguous/none outcome.
pub fn game_search(
    corpus: &Corpus,
    gateway: &Gateway,
    question: &str,
) -> Result<SearchOutcome, KbError> {
    let query = extract_match_query(gateway, question)?;
    let narrowed: Vec<MatchRecord> =
        prefilter(&query, corpus.matches()).into_iter().cloned().collect();
    let survivors = filter_candidates(&query, &narrowed);
    match survivors.len() {
        0 => Ok(SearchOutcome::None {
            message: "No matching file: the database holds no match consistent with the given information.".into(),
        }),
        1 => Ok(SearchOutcome::Single {
            file_path: survivors[0].file_path.clone(),
            message: single_message(&survivors[0]),
        }),
        _ => {
            let prompt = SELECT_PROMPT
                .replace("{question}", question)
                .replace("{info}", &query.render_info())
                .replace("{candidates}", &render_candidates(&survivors));
            let response =
                gateway.complete(&ChatRequest::user("tool:Game Search:select", prompt))?;
            let picked: Vec<&MatchRecord> = survivors
                .iter()
                .filter(|r| response.text.contains(&r.file_path))
                .collect();
            if picked.len() == 1 {
                Ok(SearchOutcome::Single {
                    file_path: picked[0].file_path.clone(),
                    message: response.text,
                })
            } else {
                Ok(SearchOutcome::Ambiguous {
                    summaries: survivors.iter().map(CandidateSummary::from).collect(),
                    message: response.text,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Retrieval prompts
// ---------------------------------------------------------------------------

fn ask(gateway: &Gateway, tag: &str, prompt: String) -> Result<String, KbError> {
    Ok(gateway.complete(&ChatRequest::user(tag, prompt))?.text)
}

/// Answers a question from the match's pre-kickoff info block and final
/// score; the response is returned verbatim.
pub fn game_info_retrieval(gateway: &Gateway, query: &str, file: &Path) -> Result<String, KbError> {
    let detail = MatchDetail::load(file)?;
    let prompt = INFO_PROMPT
        .replace("{query}", query)
        .replace("{match_info}", &detail.render_info());
    ask(gateway, "tool:Game Info Retrieval", prompt)
}

/// Answers a question from the match's ordered history event list.
pub fn match_history_retrieval(
    gateway: &Gateway,
    query: &str,
    file: &Path,
) -> Result<String, KbError> {
    let detail = MatchDetail::load(file)?;
    let prompt = HISTORY_PROMPT
        .replace("{query}", query)
        .replace("{match_history}", &detail.render_history());
    ask(gateway, "tool:Match History Retrieval", prompt)
}

/// Answers a question from an arbitrary reference file (entity pages and
/// the like).
pub fn retrieval_augment(gateway: &Gateway, query: &str, file: &Path) -> Result<String, KbError> {
    if !file.exists() {
        return Err(KbError::FileMissing(file.display().to_string()));
    }
    let context = fs::read_to_string(file)?;
    let prompt = AUGMENT_PROMPT.replace("{query}", query).replace("{context}", &context);
    ask(gateway, "tool:Textual Retrieval Augment", prompt)
}

// ---------------------------------------------------------------------------
// Entity search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityHit<'a> {
    pub kind: String,
    pub name: String,
    pub record: Option<&'a EntityRecord>,
}

/// Identifies the entity a question is about and resolves it in the corpus:
/// exact lookup beats normalized lookup beats bounded fuzzy lookup.
pub fn entity_search<'a>(
    corpus: &'a Corpus,
    gateway: &Gateway,
    question: &str,
) -> Result<EntityHit<'a>, KbError> {
    let prompt = ENTITY_PROMPT.replace("{question}", question);
    let mut request = ChatRequest::user("tool:Textual Entity Search", prompt);
    let first = gateway.complete(&request)?;
    let tuple = match parse_tuple(&first.text) {
        Some(t) => t,
        None => {
            request = request.with_followup(
                first.text,
                "Your previous response was not a valid tuple. Respond with exactly (type, name) and nothing else.",
            );
            let second = gateway.complete(&request)?;
            parse_tuple(&second.text)
                .ok_or(KbError::TupleMalformed { response: second.text })?
        }
    };
    let (raw_kind, name) = tuple;
    let mut kind = raw_kind.to_lowercase();
    if kind == "coach" {
        kind = "player".into();
    }
    if kind == "unknown" || name.eq_ignore_ascii_case("unknown") {
        return Ok(EntityHit { kind, name, record: None });
    }
    let record =
        if ENTITY_KINDS.contains(&kind.as_str()) { corpus.find_entity(&kind, &name) } else { None };
    Ok(EntityHit { kind, name, record })
}

/// Parses the first `(type, name)` tuple in a response; items may carry
/// single or double quotes.
fn parse_tuple(text: &str) -> Option<(String, String)> {
    let bytes: Vec<char> = text.chars().collect();
    for (i, &c) in bytes.iter().enumerate() {
        if c != '(' {
            continue;
        }
        let rest: String = bytes[i + 1..].iter().collect();
        let close = rest.find(')')?;
        let inner = &rest[..close];
        let parts: Vec<&str> = inner.splitn(2, ',').collect();
        if parts.len() != 2 {
            continue;
        }
        let strip = |s: &str| -> String {
            let s = s.trim();
            let s = s.strip_prefix(['"', '\'']).unwrap_or(s);
            let s = s.strip_suffix(['"', '\'']).unwrap_or(s);
            s.trim().to_string()
        };
        let kind = strip(parts[0]);
        let name = strip(parts[1]);
        if kind.is_empty() || name.is_empty() {
            continue;
        }
        return Some((kind, name));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedRule;
    use std::path::PathBuf;

    fn fixture(path: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
    }

    fn corpus() -> Corpus {
        ingest(&fixture("corpus/entities"), &fixture("corpus/matches/index.csv")).unwrap()
    }

    fn record(home: &str, away: &str) -> MatchRecord {
        MatchRecord {
            league: "england_epl".into(),
            season: Some("2014-2015".into()),
            date: None,
            year: None,
            month: None,
            day: None,
            time: None,
            score: None,
            home_team: home.into(),
            away_team: away.into(),
            file_path: "matches/x.json".into(),
        }
    }

    #[test]
    fn ingest_counts_fixture_corpus() {
        let corpus = corpus();
        assert_eq!(corpus.entity_count(), 4);
        assert_eq!(corpus.match_count(), 3);
    }

    #[test]
    fn ingest_rejects_duplicate_entities() {
        let dir = tempfile::tempdir().unwrap();
        let entities = dir.path().join("entities");
        fs::create_dir(&entities).unwrap();
        fs::write(
            entities.join("a.txt"),
            "kind: player\nname: Lionel Messi\n---\npage one\n",
        )
        .unwrap();
        fs::write(
            entities.join("b.txt"),
            "kind: player\nname: Lionel Messi\n---\npage two\n",
        )
        .unwrap();
        let index = dir.path().join("index.csv");
        fs::write(&index, "league,season,date,year,month,day,time,score,home_team,away_team,file_path\n").unwrap();
        let err = ingest(&entities, &index).unwrap_err();
        assert!(matches!(err, KbError::Parse { message, .. } if message.contains("duplicate")));
    }

    #[test]
    fn extraction_parses_labelled_lines() {
        let response = "league: unknown\nseason: unknown\ndate: 2015-02-21\nyear: 2015\nmonth: 02\nday: 21\ntime: 18:00\nscore: unknown\nteam1: Chelsea\nteam2: Burnley";
        let query = parse_extraction(response).unwrap();
        assert_eq!(query.date.as_deref(), Some("2015-02-21"));
        assert_eq!(query.time.as_deref(), Some("18:00"));
        assert_eq!(query.team1.as_deref(), Some("Chelsea"));
        assert_eq!(query.team2.as_deref(), Some("Burnley"));
        assert_eq!(query.league, None);
        assert_eq!(query.year, Some(2015));
    }

    #[test]
    fn extraction_tolerates_missing_lines_and_promotes_team() {
        let query = parse_extraction("team2: Chelsea\ndate: not-a-date").unwrap();
        assert_eq!(query.team1.as_deref(), Some("Chelsea"));
        assert_eq!(query.team2, None);
        assert_eq!(query.date, None);
        assert_eq!(query.score, None);
    }

    #[test]
    fn extraction_reprompts_once() {
        let gateway = Gateway::scripted(vec![
            ScriptedRule::substring("did not follow the required format", "team1: Chelsea\nteam2: unknown"),
            ScriptedRule::substring("Input text:", "I cannot comply."),
        ]);
        let query = extract_match_query(&gateway, "who won?").unwrap();
        assert_eq!(query.team1.as_deref(), Some("Chelsea"));
    }

    #[test]
    fn filter_candidate_team_rules() {
        let query = MatchQuery {
            team1: Some("Chelsea".into()),
            team2: Some("West Ham".into()),
            ..Default::default()
        };
        // both teams present -> kept
        let kept = filter_candidates(&query, &[record("Chelsea FC", "West Ham United")]);
        assert_eq!(kept.len(), 1);
        // second team absent -> dropped
        let dropped = filter_candidates(&query, &[record("chelsea FC", "Liverpool")]);
        assert!(dropped.is_empty());
        // single team query vs unrelated candidate -> dropped
        let query = MatchQuery { team1: Some("Chelsea".into()), ..Default::default() };
        let dropped = filter_candidates(&query, &[record("Bayern Munich", "Real Madrid")]);
        assert!(dropped.is_empty());
    }

    #[test]
    fn filter_scalar_contradictions() {
        let mut candidate = record("Chelsea", "Burnley");
        candidate.date = Some("2015-02-21".into());
        candidate.time = Some("18:00".into());
        candidate.score = Some("1 - 1".into());

        let query = MatchQuery { date: Some("2015-02-22".into()), ..Default::default() };
        assert!(filter_candidates(&query, std::slice::from_ref(&candidate)).is_empty());

        // minute-granularity time comparison across separators
        let query = MatchQuery { time: Some("18-00".into()), ..Default::default() };
        assert_eq!(filter_candidates(&query, std::slice::from_ref(&candidate)).len(), 1);

        let query = MatchQuery { score: Some("2 - 1".into()), ..Default::default() };
        assert!(filter_candidates(&query, std::slice::from_ref(&candidate)).is_empty());
        let query = MatchQuery { score: Some("1-1".into()), ..Default::default() };
        assert_eq!(filter_candidates(&query, std::slice::from_ref(&candidate)).len(), 1);
    }

    #[test]
    fn game_search_single_survivor_short_circuits() {
        let corpus = corpus();
        let gateway = Gateway::scripted(vec![ScriptedRule::substring(
            "Input text:",
            "league: unknown\nseason: unknown\ndate: 2015-02-21\nyear: 2015\nmonth: 02\nday: 21\ntime: 18:00\nscore: unknown\nteam1: Chelsea\nteam2: Burnley",
        )]);
        let outcome = game_search(&corpus, &gateway, "final score of Chelsea vs Burnley?").unwrap();
        match outcome {
            SearchOutcome::Single { file_path, message } => {
                assert!(file_path.ends_with("chelsea_burnley_2015-02-21.json"));
                assert!(message.contains("most probable match in the database with this file path:"));
                assert!(message.contains(&file_path));
            }
            other => panic!("expected single outcome, got {other:?}"),
        }
    }

    #[test]
    fn game_search_none_and_ambiguous() {
        let corpus = corpus();
        // no survivors
        let gateway = Gateway::scripted(vec![ScriptedRule::substring(
            "Input text:",
            "team1: Borussia Dortmund\nteam2: unknown",
        )]);
        let outcome = game_search(&corpus, &gateway, "dortmund?").unwrap();
        assert!(matches!(outcome, SearchOutcome::None { .. }));

        // two survivors, gateway declines to pick a path
        let gateway = Gateway::scripted(vec![
            ScriptedRule::substring("Input text:", "team1: Chelsea\nteam2: unknown"),
            ScriptedRule::substring(
                "candidate matches",
                "The information provided is too vague; both a Burnley and a West Ham fixture remain plausible.",
            ),
        ]);
        let outcome = game_search(&corpus, &gateway, "a Chelsea game").unwrap();
        match outcome {
            SearchOutcome::Ambiguous { summaries, message } => {
                assert_eq!(summaries.len(), 2);
                assert!(message.contains("too vague"));
                assert!(!message.contains(".json"));
            }
            other => panic!("expected ambiguous outcome, got {other:?}"),
        }
    }

    #[test]
    fn game_search_gateway_pick_must_be_a_candidate() {
        let corpus = corpus();
        let gateway = Gateway::scripted(vec![
            ScriptedRule::substring("Input text:", "team1: Chelsea\nteam2: unknown"),
            ScriptedRule::substring(
                "candidate matches",
                "The given information seems incomplete, but we found the most probable match in the database with this file path: /tmp/fabricated.json.",
            ),
        ]);
        let outcome = game_search(&corpus, &gateway, "a Chelsea game").unwrap();
        assert!(matches!(outcome, SearchOutcome::Ambiguous { .. }));
    }

    #[test]
    fn retrieval_prompts_quote_only_injected_context() {
        let corpus = corpus();
        let file = corpus.matches()[0].file_path.clone();
        let gateway = Gateway::scripted(vec![ScriptedRule::substring(
            "match related information",
            "[ANSWER]: Martin Atkinson [EXPLANATION & REASONING]: the info block names the referee.",
        )])
        .recording_transcript();
        let text =
            game_info_retrieval(&gateway, "who was the referee?", Path::new(&file)).unwrap();
        assert!(text.contains("[ANSWER]:"));
        let sent = &gateway.transcript()[0];
        assert!(sent.text.contains("referee: Martin Atkinson"));
        assert!(sent.text.contains("who was the referee?"));
    }

    #[test]
    fn history_retrieval_handles_empty_history() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("empty.json");
        fs::write(&file, r#"{"info": {"final score": "0 - 0"}, "history": []}"#).unwrap();
        let gateway = Gateway::scripted(vec![ScriptedRule::substring(
            "match history information",
            "[ANSWER]: none [EXPLANATION & REASONING]: no events were recorded.",
        )])
        .recording_transcript();
        let text = match_history_retrieval(&gateway, "how many corners?", &file).unwrap();
        assert!(text.contains("[ANSWER]:"));
        assert!(gateway.transcript()[0].text.contains("(no recorded events)"));
    }

    #[test]
    fn entity_search_examples() {
        let corpus = corpus();
        // the prompt template itself contains worked examples naming Messi
        // and the 4-4-2 formation, so rules anchor on the injected tail
        let gateway = Gateway::scripted(vec![
            ScriptedRule::substring(
                "\nQuestion: \"How many goals did Lionel Messi score last season?\"",
                "(\"player\", \"Lionel Messi\")",
            ),
            ScriptedRule::substring(
                "\nQuestion: \"Explain the 4-4-2 formation.\"",
                "(\"unknown\", \"unknown\")",
            ),
        ]);
        let hit =
            entity_search(&corpus, &gateway, "How many goals did Lionel Messi score last season?")
                .unwrap();
        assert_eq!((hit.kind.as_str(), hit.name.as_str()), ("player", "Lionel Messi"));
        assert!(hit.record.is_some());

        let miss = entity_search(&corpus, &gateway, "Explain the 4-4-2 formation.").unwrap();
        assert_eq!(miss.kind, "unknown");
        assert!(miss.record.is_none());
    }

    #[test]
    fn entity_lookup_ladder() {
        let corpus = corpus();
        let exact = corpus.find_entity("player", "Lionel Messi").unwrap();
        // token-order and punctuation variants resolve to the same record
        let swapped = corpus.find_entity("player", "messi, lionel").unwrap();
        assert_eq!(exact, swapped);
        // small typo within the fuzzy budget
        let fuzzy = corpus.find_entity("player", "Lionel Mesi").unwrap();
        assert_eq!(exact, fuzzy);
        // distance beyond the budget misses
        assert!(corpus.find_entity("player", "Lionel Messi Cuccittini Extra").is_none());
        // kind scoping
        assert!(corpus.find_entity("referee", "Lionel Messi").is_none());
    }

    #[test]
    fn tuple_parser_tolerates_prose_and_coach_mapping() {
        assert_eq!(
            parse_tuple("Output: (\"team\", \"Manchester United\")"),
            Some(("team".into(), "Manchester United".into()))
        );
        assert_eq!(parse_tuple("('coach', 'Pep Guardiola')"), Some(("coach".into(), "Pep Guardiola".into())));
        assert_eq!(parse_tuple("no tuple here"), None);
    }
}
