//! Tag-assignment snapshots: loading, cleaning and summary counts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Steam never shows more than this many tags for one game.
pub const MAX_TAGS_PER_GAME: usize = 20;
/// Tags assigned by fewer players are hidden by Steam.
pub const DEFAULT_MIN_PLAYERS: u64 = 5;
/// Name of the store-injected tag that shows up as a 21st entry.
pub const VR_ONLY: &str = "VR Only";

/// A tag name. Case- and hyphen-sensitive; equality is byte equality.
///
/// Loaders reject empty names; the `From` conversions do not check.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(String);

impl TagId {
    pub fn new(name: impl Into<String>) -> Result<Self, CorpusError> {
        let name = name.into();
        if name.is_empty() {
            return Err(CorpusError::EmptyTag);
        }
        Ok(TagId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TagId {
    fn from(s: &str) -> Self {
        TagId(s.to_owned())
    }
}

impl From<String> for TagId {
    fn from(s: String) -> Self {
        TagId(s)
    }
}

impl std::borrow::Borrow<str> for TagId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Opaque game identifier (a Steam appid in snapshot files).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GameId(String);

impl GameId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GameId {
    fn from(s: &str) -> Self {
        GameId(s.to_owned())
    }
}

impl From<String> for GameId {
    fn from(s: String) -> Self {
        GameId(s)
    }
}

impl From<u64> for GameId {
    fn from(n: u64) -> Self {
        GameId(n.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameRecord {
    pub game_id: GameId,
    pub title: String,
    /// Players who assigned each tag.
    pub tag_counts: BTreeMap<TagId, u64>,
}

impl GameRecord {
    pub fn new(game_id: impl Into<GameId>, title: impl Into<String>) -> Self {
        GameRecord {
            game_id: game_id.into(),
            title: title.into(),
            tag_counts: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, tag: impl Into<TagId>, count: u64) -> Self {
        self.tag_counts.insert(tag.into(), count);
        self
    }

    /// Largest assigner count, a lower bound on how many players tagged the game.
    pub fn max_count(&self) -> u64 {
        self.tag_counts.values().copied().max().unwrap_or(0)
    }

    /// Tags ordered by decreasing count, ties by name.
    pub fn ranked_tags(&self) -> Vec<(&TagId, u64)> {
        let mut ranked: Vec<_> = self.tag_counts.iter().map(|(t, &c)| (t, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record {record}: {reason}")]
    Record { record: String, reason: String },
    #[error("negative count {count} for tag {tag:?} in record {record}")]
    NegativeCount {
        record: String,
        tag: String,
        count: i64,
    },
    #[error("duplicate game_id {0}")]
    DuplicateGame(GameId),
    #[error("empty tag name")]
    EmptyTag,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// A set of games plus the registry of every tag they reference.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Corpus {
    games: Vec<GameRecord>,
    tags: BTreeSet<TagId>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate game ids.
    pub fn new(games: Vec<GameRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(games.len());
        for g in &games {
            if !seen.insert(&g.game_id) {
                return Err(CorpusError::DuplicateGame(g.game_id.clone()));
            }
        }
        let tags = games
            .iter()
            .flat_map(|g| g.tag_counts.keys().cloned())
            .collect();
        Ok(Corpus { games, tags })
    }

    pub fn games(&self) -> &[GameRecord] {
        &self.games
    }

    pub fn tags(&self) -> &BTreeSet<TagId> {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    /// Number of games the tag is assigned to.
    pub fn occurrence(&self, tag: &TagId) -> usize {
        self.games
            .iter()
            .filter(|g| g.tag_counts.contains_key(tag))
            .count()
    }

    pub fn occurrences(&self) -> BTreeMap<TagId, usize> {
        let mut occ: BTreeMap<TagId, usize> = self.tags.iter().map(|t| (t.clone(), 0)).collect();
        for g in &self.games {
            for t in g.tag_counts.keys() {
                *occ.get_mut(t).expect("registry closure") += 1;
            }
        }
        occ
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputFormat {
    SnapshotJson,
    Csv,
}

impl InputFormat {
    /// `.csv` files are CSV; everything else (including directories of pages)
    /// is snapshot JSON.
    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::SnapshotJson,
        }
    }
}

/// Loads a corpus verbatim: no cleaning, anomalies preserved.
///
/// A directory is read as a set of snapshot pages (`*.json`, sorted by name).
pub fn load_corpus(path: &Path, format: InputFormat) -> Result<Corpus, CorpusError> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| CorpusError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        let mut games = Vec::new();
        for f in &files {
            let bytes = fs::read(f).map_err(|e| CorpusError::io(f, e))?;
            games.extend(parse_snapshot_json(&bytes)?);
        }
        return Corpus::new(games);
    }
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    match format {
        InputFormat::SnapshotJson => Corpus::new(parse_snapshot_json(&bytes)?),
        InputFormat::Csv => Corpus::new(parse_csv(&bytes)?),
    }
}

/// Parses one or more top-level JSON values. Each may be a game object,
/// an array of game objects, or an object keyed by appid (the SteamSpy page
/// shape).
pub fn parse_snapshot_json(bytes: &[u8]) -> Result<Vec<GameRecord>, CorpusError> {
    let mut games = Vec::new();
    let mut index = 0usize;
    for value in serde_json::Deserializer::from_slice(bytes).into_iter::<Value>() {
        match value? {
            Value::Array(items) => {
                for item in items {
                    games.push(parse_game_value(&item, index)?);
                    index += 1;
                }
            }
            Value::Object(map) if map.contains_key("appid") => {
                games.push(parse_game_value(&Value::Object(map), index)?);
                index += 1;
            }
            Value::Object(map) => {
                for (_, item) in map {
                    games.push(parse_game_value(&item, index)?);
                    index += 1;
                }
            }
            other => {
                return Err(CorpusError::Record {
                    record: format!("#{index}"),
                    reason: format!("expected object or array, found {other}"),
                })
            }
        }
    }
    Ok(games)
}

fn parse_game_value(v: &Value, index: usize) -> Result<GameRecord, CorpusError> {
    let fail = |record: String, reason: &str| CorpusError::Record {
        record,
        reason: reason.to_owned(),
    };
    let obj = v
        .as_object()
        .ok_or_else(|| fail(format!("#{index}"), "not an object"))?;
    let game_id = match obj.get("appid") {
        Some(Value::Number(n)) if n.is_u64() => GameId::from(n.as_u64().unwrap()),
        Some(Value::String(s)) if !s.is_empty() => GameId::from(s.as_str()),
        _ => return Err(fail(format!("#{index}"), "missing or invalid appid")),
    };
    let record = format!("#{index} (appid {game_id})");
    let title = match obj.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(_) => return Err(fail(record, "name is not a string")),
    };
    let mut rec = GameRecord::new(game_id, title);
    match obj.get("tags") {
        // SteamSpy serializes an empty tag map as `[]`.
        None | Some(Value::Null) => {}
        Some(Value::Array(a)) if a.is_empty() => {}
        Some(Value::Object(tags)) => {
            for (name, count) in tags {
                let count = match count.as_i64() {
                    Some(c) if c < 0 => {
                        return Err(CorpusError::NegativeCount {
                            record,
                            tag: name.clone(),
                            count: c,
                        })
                    }
                    Some(c) => c as u64,
                    None => match count.as_u64() {
                        Some(c) => c,
                        None => return Err(fail(record, &format!("count for {name:?} is not an integer"))),
                    },
                };
                let tag = TagId::new(name.as_str()).map_err(|_| fail(record.clone(), "empty tag name"))?;
                rec.tag_counts.insert(tag, count);
            }
        }
        Some(_) => return Err(fail(record, "tags is not an object")),
    }
    Ok(rec)
}

#[derive(Deserialize)]
struct CsvRow {
    game_id: String,
    title: String,
    tag: String,
    count: String,
}

/// Parses `game_id,title,tag,count` rows. Rows of one game need not be
/// contiguous; games keep the order of their first row.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<GameRecord>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let expected = ["game_id", "title", "tag", "count"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CorpusError::Record {
            record: "header".into(),
            reason: format!("expected {}", expected.join(",")),
        });
    }
    let mut games: Vec<GameRecord> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let record = format!("row {} (game_id {})", line + 2, row.game_id);
        if row.game_id.is_empty() {
            return Err(CorpusError::Record {
                record,
                reason: "empty game_id".into(),
            });
        }
        let count: i64 = row.count.trim().parse().map_err(|_| CorpusError::Record {
            record: record.clone(),
            reason: format!("count {:?} is not an integer", row.count),
        })?;
        if count < 0 {
            return Err(CorpusError::NegativeCount {
                record,
                tag: row.tag,
                count,
            });
        }
        let tag = TagId::new(row.tag).map_err(|_| CorpusError::Record {
            record: record.clone(),
            reason: "empty tag name".into(),
        })?;
        let slot = *by_id.entry(row.game_id.clone()).or_insert_with(|| {
            games.push(GameRecord::new(row.game_id.as_str(), row.title.clone()));
            games.len() - 1
        });
        let game = &mut games[slot];
        if game.title != row.title {
            return Err(CorpusError::Record {
                record,
                reason: format!("title {:?} conflicts with {:?}", row.title, game.title),
            });
        }
        if game.tag_counts.insert(tag.clone(), count as u64).is_some() {
            return Err(CorpusError::Record {
                record,
                reason: format!("tag {tag} listed twice"),
            });
        }
    }
    Ok(games)
}

/// Writes the corpus as a JSON array of `{"appid","name","tags"}` objects,
/// one per line. Numeric ids are written as integers.
pub fn write_snapshot_json(c: &Corpus, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "[")?;
    for (i, g) in c.games.iter().enumerate() {
        let appid = match g.game_id.0.parse::<u64>() {
            Ok(n) if n.to_string() == g.game_id.0 => Value::from(n),
            _ => Value::from(g.game_id.0.clone()),
        };
        let tags: serde_json::Map<String, Value> = g
            .tag_counts
            .iter()
            .map(|(t, &c)| (t.0.clone(), Value::from(c)))
            .collect();
        let mut obj = serde_json::Map::new();
        obj.insert("appid".into(), appid);
        obj.insert("name".into(), Value::from(g.title.clone()));
        obj.insert("tags".into(), Value::Object(tags));
        let sep = if i + 1 == c.games.len() { "" } else { "," };
        writeln!(out, "{}{}", Value::Object(obj), sep)?;
    }
    writeln!(out, "]")
}

pub fn write_csv(c: &Corpus, out: impl Write) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["game_id", "title", "tag", "count"])?;
    for g in &c.games {
        for (t, count) in &g.tag_counts {
            w.write_record([g.game_id.as_str(), &g.title, t.as_str(), &count.to_string()])?;
        }
    }
    w.flush().map_err(|e| CorpusError::Io {
        path: "<csv>".into(),
        source: e,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanRule {
    VrOnly,
    BelowFloor,
    OverCap,
    EmptyGame,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub game_id: GameId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<TagId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    pub rule: CleanRule,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub games_in: usize,
    pub games_out: usize,
    pub removals: Vec<Removal>,
}

impl CleanReport {
    pub fn count(&self, rule: CleanRule) -> usize {
        self.removals.iter().filter(|r| r.rule == rule).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CleanOptions {
    /// Minimum assigner count; `None` disables the floor (zero counts are
    /// still dropped since they carry no assignment).
    pub min_players: Option<u64>,
    pub max_tags: usize,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            min_players: Some(DEFAULT_MIN_PLAYERS),
            max_tags: MAX_TAGS_PER_GAME,
        }
    }
}

/// Cleans with the default 5-player floor and 20-tag cap.
pub fn clean_corpus(c: &Corpus) -> (Corpus, CleanReport) {
    clean_corpus_with(c, CleanOptions::default())
}

/// Applies, per game and in order: the 21st-tag "VR Only" removal, the
/// player floor, the top-N cap (ties keep lexicographically smaller names),
/// and finally drops games left without tags.
pub fn clean_corpus_with(c: &Corpus, opts: CleanOptions) -> (Corpus, CleanReport) {
    let floor = opts.min_players.unwrap_or(1).max(1);
    let mut report = CleanReport {
        games_in: c.games.len(),
        ..Default::default()
    };
    let mut games = Vec::with_capacity(c.games.len());
    for g in &c.games {
        let mut kept = g.clone();
        let ranked: Vec<(TagId, u64)> = g.ranked_tags().into_iter().map(|(t, n)| (t.clone(), n)).collect();
        let mut removed = |tag: &TagId, count: u64, rule| {
            report.removals.push(Removal {
                game_id: g.game_id.clone(),
                tag: Some(tag.clone()),
                count: Some(count),
                rule,
            });
        };
        if let Some((tag, 1)) = ranked.get(MAX_TAGS_PER_GAME) {
            if tag.as_str() == VR_ONLY {
                kept.tag_counts.remove(tag);
                removed(tag, 1, CleanRule::VrOnly);
            }
        }
        for (tag, count) in &ranked {
            if *count < floor && kept.tag_counts.remove(tag).is_some() {
                removed(tag, *count, CleanRule::BelowFloor);
            }
        }
        let survivors: Vec<_> = ranked.iter().filter(|(t, _)| kept.tag_counts.contains_key(t)).collect();
        for (tag, count) in survivors.iter().skip(opts.max_tags) {
            kept.tag_counts.remove(tag);
            removed(tag, *count, CleanRule::OverCap);
        }
        if kept.tag_counts.is_empty() {
            report.removals.push(Removal {
                game_id: g.game_id.clone(),
                tag: None,
                count: None,
                rule: CleanRule::EmptyGame,
            });
        } else {
            games.push(kept);
        }
    }
    report.games_out = games.len();
    let cleaned = Corpus::new(games).expect("cleaning keeps game ids unique");
    (cleaned, report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_games: usize,
    pub n_tags: usize,
    pub n_games_with_20_tags: usize,
    /// Games whose most-assigned tag has at least 100 assigners.
    pub n_games_min100_taggers: usize,
}

pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    CorpusStats {
        n_games: c.games.len(),
        n_tags: c.tags.len(),
        n_games_with_20_tags: c
            .games
            .iter()
            .filter(|g| g.tag_counts.len() == MAX_TAGS_PER_GAME)
            .count(),
        n_games_min100_taggers: c.games.iter().filter(|g| g.max_count() >= 100).count(),
    }
}
