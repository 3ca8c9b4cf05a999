//! The usage repository: an append-only log of observations, feedback,
//! and raw sensor readings, with the two-tier feedback policy that turns
//! predictions into labeled training examples.
//!
//! The file format is one canonically printed s-expression per line —
//! human-readable, parseable with the content-language module alone, and
//! byte-reproducible because the printer is canonical. The first line is
//! a version header carrying the individual-feedback threshold `K`, so a
//! log file replays without any out-of-band configuration.
//!
//! Labeling policy: an institutional verdict labels its event
//! immediately (Correct labels with the predicted value, so confirmations
//! become training data too); individual verdicts only count — when `K`
//! concordant verdicts for the same suggested label accumulate on an
//! event, that label sticks, unless an institutional label already owns
//! the event. Institutional labels are never overridden by tallies.
//!
//! All mutation funnels through one owner (the data-acquisition role);
//! readers mine immutable snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mining::{AlarmType, Dataset, MiningError, TrainingExample};
use crate::sl::{self, SlNode};

/// Default number of concordant individual verdicts that label an event.
pub const DEFAULT_FEEDBACK_THRESHOLD: u32 = 5;

/// Who issued a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeedbackSource {
    /// An alert recipient; verdicts count toward the threshold.
    Individual,
    /// An authority; verdicts label immediately and irrevocably.
    Institutional,
}

/// The verdict itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The prediction was right (counts toward the predicted label).
    Correct,
    /// The prediction was wrong; here is the suggested label.
    Incorrect(AlarmType),
}

/// Labeling state of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelState {
    Unlabeled,
    Labeled(AlarmType, FeedbackSource),
}

/// A logged prediction event.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub event_id: u64,
    pub tick: u64,
    pub location: String,
    /// Physical readings per variable, as sensed.
    pub raw: BTreeMap<String, f64>,
    /// Discretized categories per variable, as the predictor saw them.
    pub categories: BTreeMap<String, String>,
    pub predicted: AlarmType,
    pub label_state: LabelState,
}

/// Payload for [`Repository::record_observation`]; the store assigns the
/// event id and the initial (unlabeled) state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub tick: u64,
    pub location: String,
    pub raw: BTreeMap<String, f64>,
    pub categories: BTreeMap<String, String>,
    pub predicted: AlarmType,
}

/// One verdict on one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackRecord {
    pub event_id: u64,
    pub source: FeedbackSource,
    /// User or authority id; at most one verdict per (event, who).
    pub who: String,
    pub verdict: Verdict,
    pub tick: u64,
}

/// What a feedback application did to the event's label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelChange {
    /// Label state unchanged (tally below threshold, repeat of the
    /// current label, or institutional precedence).
    None,
    /// Label state now carries this label.
    Relabeled(AlarmType),
}

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
    #[error("unknown event {0}")]
    UnknownEvent(u64),
    #[error("{who:?} already gave feedback on event {event}")]
    DuplicateFeedback { event: u64, who: String },
    #[error("log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("{0} value {1:?} cannot be printed as a bare symbol")]
    InvalidSymbol(&'static str, String),
    #[error("reading for {0:?} is not a finite number")]
    InvalidReading(String),
    #[error("feedback threshold must be at least 1, got {0}")]
    InvalidThreshold(u32),
}

/// The store: optional backing file plus the replayable in-memory index.
#[derive(Debug)]
pub struct Repository {
    k: u32,
    path: Option<PathBuf>,
    file: Option<File>,
    index: BTreeMap<u64, ObservationRecord>,
    /// (event, suggested code) → concordant individual verdict count.
    tallies: BTreeMap<(u64, u8), u32>,
    /// (event, who) pairs that already voted.
    voters: BTreeSet<(u64, String)>,
    feedback_count: u64,
    sense_count: u64,
}

impl Repository {
    /// Creates (or truncates) a log file and writes the version header.
    pub fn create(path: impl AsRef<Path>, k: u32) -> Result<Self, RepoError> {
        if k == 0 {
            return Err(RepoError::InvalidThreshold(k));
        }
        let path = path.as_ref().to_path_buf();
        let mut file = File::create(&path)?;
        file.write_all(format!("{}\n", header_line(k)).as_bytes())?;
        Ok(Repository {
            k,
            path: Some(path),
            file: Some(file),
            index: BTreeMap::new(),
            tallies: BTreeMap::new(),
            voters: BTreeSet::new(),
            feedback_count: 0,
            sense_count: 0,
        })
    }

    /// Opens an existing log, replaying every line to rebuild the index,
    /// then appends from there.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RepoError> {
        let path = path.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path)?;
        let mut repo = Repository::replay_text(&text)?;
        repo.file = Some(OpenOptions::new().append(true).open(&path)?);
        repo.path = Some(path);
        Ok(repo)
    }

    /// A store with no backing file; appends vanish on drop. Used by
    /// tests and by simulations that don't need persistence.
    pub fn in_memory(k: u32) -> Result<Self, RepoError> {
        if k == 0 {
            return Err(RepoError::InvalidThreshold(k));
        }
        Ok(Repository {
            k,
            path: None,
            file: None,
            index: BTreeMap::new(),
            tallies: BTreeMap::new(),
            voters: BTreeSet::new(),
            feedback_count: 0,
            sense_count: 0,
        })
    }

    /// Rebuilds a store from log text alone (no backing file attached).
    pub fn replay_text(text: &str) -> Result<Self, RepoError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(RepoError::Corrupt {
            line: 1,
            reason: "missing version header".into(),
        })?;
        let k = parse_header(header).map_err(|reason| RepoError::Corrupt { line: 1, reason })?;
        let mut repo = Repository::in_memory(k)?;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            repo.replay_line(line, line_no)?;
        }
        Ok(repo)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn observation(&self, event_id: u64) -> Option<&ObservationRecord> {
        self.index.get(&event_id)
    }

    pub fn observations(&self) -> impl Iterator<Item = &ObservationRecord> {
        self.index.values()
    }

    /// Observations with event id strictly greater than `watermark`.
    pub fn observations_since(&self, watermark: u64) -> impl Iterator<Item = &ObservationRecord> {
        self.index.range(watermark + 1..).map(|(_, rec)| rec)
    }

    pub fn observation_count(&self) -> usize {
        self.index.len()
    }

    pub fn labeled_count(&self) -> usize {
        self.index
            .values()
            .filter(|rec| matches!(rec.label_state, LabelState::Labeled(..)))
            .count()
    }

    pub fn feedback_count(&self) -> u64 {
        self.feedback_count
    }

    pub fn sense_count(&self) -> u64 {
        self.sense_count
    }

    pub fn last_event_id(&self) -> u64 {
        self.index.keys().next_back().copied().unwrap_or(0)
    }

    /// Appends an observation; returns its assigned event id (ids start
    /// at 1 and increase strictly).
    pub fn record_observation(&mut self, obs: Observation) -> Result<u64, RepoError> {
        check_symbol("location", &obs.location)?;
        for (variable, value) in &obs.raw {
            check_symbol("raw variable", variable)?;
            if !value.is_finite() {
                return Err(RepoError::InvalidReading(variable.clone()));
            }
        }
        for (variable, category) in &obs.categories {
            check_symbol("category variable", variable)?;
            check_symbol("category", category)?;
        }
        let event_id = self.last_event_id() + 1;
        let rec = ObservationRecord {
            event_id,
            tick: obs.tick,
            location: obs.location,
            raw: obs.raw,
            categories: obs.categories,
            predicted: obs.predicted,
            label_state: LabelState::Unlabeled,
        };
        self.append_line(&obs_line(&rec))?;
        self.index.insert(event_id, rec);
        Ok(event_id)
    }

    /// Applies one verdict under the labeling policy and appends it to
    /// the log.
    pub fn record_feedback(&mut self, fb: FeedbackRecord) -> Result<LabelChange, RepoError> {
        check_symbol("who", &fb.who)?;
        if !self.index.contains_key(&fb.event_id) {
            return Err(RepoError::UnknownEvent(fb.event_id));
        }
        let voter_key = (fb.event_id, fb.who.clone());
        if self.voters.contains(&voter_key) {
            return Err(RepoError::DuplicateFeedback { event: fb.event_id, who: fb.who });
        }
        self.append_line(&fb_line(&fb))?;
        self.voters.insert(voter_key);
        self.feedback_count += 1;
        Ok(self.apply_verdict(&fb))
    }

    /// Appends one raw sensed value. Every reading is logged, including
    /// ones diagnosis later discards.
    pub fn log_sense(
        &mut self,
        tick: u64,
        station: &str,
        variable: &str,
        value: f64,
    ) -> Result<(), RepoError> {
        check_symbol("station", station)?;
        check_symbol("variable", variable)?;
        if !value.is_finite() {
            return Err(RepoError::InvalidReading(variable.to_string()));
        }
        self.append_line(&sense_line(tick, station, variable, value))?;
        self.sense_count += 1;
        Ok(())
    }

    /// Training examples for one location: every labeled observation
    /// whose category map conforms to `schema`. Early observations with
    /// partial category maps (a variable faulty since start-up) are
    /// skipped — they cannot be complete examples.
    pub fn query_examples(
        &self,
        location: &str,
        schema: &[(String, Vec<String>)],
    ) -> Result<Dataset, MiningError> {
        let mut ds = Dataset::new(schema.to_vec(), Vec::new())?;
        for rec in self.index.values() {
            if rec.location != location {
                continue;
            }
            let LabelState::Labeled(label, _) = rec.label_state else { continue };
            let example = TrainingExample { attributes: rec.categories.clone(), label };
            let _ = ds.push(example); // non-conforming row: skip
        }
        Ok(ds)
    }

    /// Rewrites the log as header + observation lines with labels folded
    /// in, dropping feedback and sense lines. Pending tallies and voter
    /// history are cleared with them, so the live state again equals a
    /// replay of the (new) file — compaction trades audit history for
    /// size.
    pub fn compact(&mut self) -> Result<(), RepoError> {
        if let Some(path) = self.path.clone() {
            let mut content = String::new();
            content.push_str(&header_line(self.k));
            content.push('\n');
            for rec in self.index.values() {
                content.push_str(&obs_line(rec));
                content.push('\n');
            }
            let tmp = path.with_extension("compact-tmp");
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, &path)?;
            self.file = Some(OpenOptions::new().append(true).open(&path)?);
        }
        self.tallies.clear();
        self.voters.clear();
        self.feedback_count = 0;
        self.sense_count = 0;
        Ok(())
    }

    fn append_line(&mut self, line: &str) -> Result<(), RepoError> {
        if let Some(file) = &mut self.file {
            file.write_all(format!("{line}\n").as_bytes())?;
        }
        Ok(())
    }

    /// The policy core; infallible once the event and voter checks have
    /// passed.
    fn apply_verdict(&mut self, fb: &FeedbackRecord) -> LabelChange {
        let rec = self.index.get_mut(&fb.event_id).expect("event checked by caller");
        let suggested = match fb.verdict {
            Verdict::Incorrect(code) => code,
            Verdict::Correct => rec.predicted,
        };
        match fb.source {
            FeedbackSource::Institutional => {
                let new_state = LabelState::Labeled(suggested, FeedbackSource::Institutional);
                if rec.label_state == new_state {
                    LabelChange::None
                } else {
                    rec.label_state = new_state;
                    LabelChange::Relabeled(suggested)
                }
            }
            FeedbackSource::Individual => {
                let tally = self.tallies.entry((fb.event_id, suggested.code())).or_insert(0);
                *tally += 1;
                let threshold_reached = *tally == self.k;
                let institutional =
                    matches!(rec.label_state, LabelState::Labeled(_, FeedbackSource::Institutional));
                if !threshold_reached || institutional {
                    return LabelChange::None;
                }
                let new_state = LabelState::Labeled(suggested, FeedbackSource::Individual);
                if rec.label_state == new_state {
                    LabelChange::None
                } else {
                    rec.label_state = new_state;
                    LabelChange::Relabeled(suggested)
                }
            }
        }
    }

    fn replay_line(&mut self, line: &str, line_no: usize) -> Result<(), RepoError> {
        let corrupt =
            |reason: String| RepoError::Corrupt { line: line_no, reason };
        let node = sl::parse(line).map_err(|e| corrupt(e.to_string()))?;
        match node.head() {
            Some("obs") => {
                let rec = parse_obs(&node).map_err(corrupt)?;
                if rec.event_id <= self.last_event_id() {
                    return Err(corrupt(format!(
                        "event id {} does not increase past {}",
                        rec.event_id,
                        self.last_event_id()
                    )));
                }
                self.index.insert(rec.event_id, rec);
                Ok(())
            }
            Some("fb") => {
                let fb = parse_fb(&node).map_err(corrupt)?;
                if !self.index.contains_key(&fb.event_id) {
                    return Err(corrupt(format!("feedback for unknown event {}", fb.event_id)));
                }
                let voter_key = (fb.event_id, fb.who.clone());
                if !self.voters.insert(voter_key) {
                    return Err(corrupt(format!(
                        "duplicate feedback from {:?} on event {}",
                        fb.who, fb.event_id
                    )));
                }
                self.feedback_count += 1;
                self.apply_verdict(&fb);
                Ok(())
            }
            Some("sense") => {
                parse_sense(&node).map_err(corrupt)?;
                self.sense_count += 1;
                Ok(())
            }
            Some(other) => Err(corrupt(format!("unknown record head {other:?}"))),
            None => Err(corrupt("record is not a headed list".into())),
        }
    }
}

fn check_symbol(field: &'static str, value: &str) -> Result<(), RepoError> {
    if sl::is_atom_text(value) {
        Ok(())
    } else {
        Err(RepoError::InvalidSymbol(field, value.to_string()))
    }
}

fn header_line(k: u32) -> String {
    format!("(aur :version 1 :k {k})")
}

fn parse_header(line: &str) -> Result<u32, String> {
    let node = sl::parse(line).map_err(|e| e.to_string())?;
    if node.head() != Some("aur") {
        return Err("expected (aur …) header".into());
    }
    let version = node
        .keyword_value("version")
        .and_then(SlNode::as_atom)
        .ok_or("header lacks :version")?;
    if version != "1" {
        return Err(format!("unsupported log version {version:?}"));
    }
    let k = node
        .keyword_value("k")
        .and_then(SlNode::as_atom)
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or("header lacks a numeric :k")?;
    if k == 0 {
        return Err("header :k must be at least 1".into());
    }
    Ok(k)
}

fn map_to_sl<V: ToString>(map: &BTreeMap<String, V>) -> SlNode {
    SlNode::List(
        map.iter()
            .map(|(key, value)| {
                SlNode::list(vec![SlNode::atom(key), SlNode::atom(value.to_string())])
            })
            .collect(),
    )
}

fn obs_line(rec: &ObservationRecord) -> String {
    let (label, labelsrc) = match rec.label_state {
        LabelState::Unlabeled => ("none".to_string(), "none"),
        LabelState::Labeled(code, FeedbackSource::Individual) => (code.to_string(), "ind"),
        LabelState::Labeled(code, FeedbackSource::Institutional) => (code.to_string(), "inst"),
    };
    sl::print(&SlNode::list(vec![
        SlNode::atom("obs"),
        SlNode::keyword("id"),
        SlNode::atom(rec.event_id.to_string()),
        SlNode::keyword("tick"),
        SlNode::atom(rec.tick.to_string()),
        SlNode::keyword("location"),
        SlNode::atom(&rec.location),
        SlNode::keyword("raw"),
        map_to_sl(&rec.raw),
        SlNode::keyword("cat"),
        map_to_sl(&rec.categories),
        SlNode::keyword("pred"),
        SlNode::atom(rec.predicted.to_string()),
        SlNode::keyword("label"),
        SlNode::atom(label),
        SlNode::keyword("labelsrc"),
        SlNode::atom(labelsrc),
    ]))
}

fn fb_line(fb: &FeedbackRecord) -> String {
    let src = match fb.source {
        FeedbackSource::Individual => "ind",
        FeedbackSource::Institutional => "inst",
    };
    let (verdict, suggest) = match fb.verdict {
        Verdict::Correct => ("correct", "none".to_string()),
        Verdict::Incorrect(code) => ("incorrect", code.to_string()),
    };
    sl::print(&SlNode::list(vec![
        SlNode::atom("fb"),
        SlNode::keyword("event"),
        SlNode::atom(fb.event_id.to_string()),
        SlNode::keyword("src"),
        SlNode::atom(src),
        SlNode::keyword("who"),
        SlNode::atom(&fb.who),
        SlNode::keyword("verdict"),
        SlNode::atom(verdict),
        SlNode::keyword("suggest"),
        SlNode::atom(suggest),
        SlNode::keyword("tick"),
        SlNode::atom(fb.tick.to_string()),
    ]))
}

fn sense_line(tick: u64, station: &str, variable: &str, value: f64) -> String {
    sl::print(&SlNode::list(vec![
        SlNode::atom("sense"),
        SlNode::keyword("tick"),
        SlNode::atom(tick.to_string()),
        SlNode::keyword("station"),
        SlNode::atom(station),
        SlNode::keyword("var"),
        SlNode::atom(variable),
        SlNode::keyword("x"),
        SlNode::atom(value.to_string()),
    ]))
}

fn atom_field<'a>(node: &'a SlNode, name: &str) -> Result<&'a str, String> {
    node.keyword_value(name)
        .and_then(SlNode::as_atom)
        .ok_or_else(|| format!("missing or non-atom :{name}"))
}

fn int_field(node: &SlNode, name: &str) -> Result<u64, String> {
    atom_field(node, name)?.parse::<u64>().map_err(|_| format!(":{name} is not an integer"))
}

fn code_field(node: &SlNode, name: &str) -> Result<AlarmType, String> {
    AlarmType::from_symbol(atom_field(node, name)?)
        .ok_or_else(|| format!(":{name} is not an alarm code"))
}

fn pairs_field(node: &SlNode, name: &str) -> Result<Vec<(String, String)>, String> {
    let list = node
        .keyword_value(name)
        .and_then(SlNode::as_list)
        .ok_or_else(|| format!("missing or non-list :{name}"))?;
    let mut pairs = Vec::with_capacity(list.len());
    for item in list {
        match item.as_list() {
            Some([key, value]) => match (key.as_atom(), value.as_atom()) {
                (Some(k), Some(v)) => pairs.push((k.to_string(), v.to_string())),
                _ => return Err(format!(":{name} entries must pair two atoms")),
            },
            _ => return Err(format!(":{name} entries must pair two atoms")),
        }
    }
    Ok(pairs)
}

fn parse_obs(node: &SlNode) -> Result<ObservationRecord, String> {
    let event_id = int_field(node, "id")?;
    let tick = int_field(node, "tick")?;
    let location = atom_field(node, "location")?.to_string();
    let mut raw = BTreeMap::new();
    for (variable, text) in pairs_field(node, "raw")? {
        let value = text.parse::<f64>().map_err(|_| format!("raw {variable} not a number"))?;
        raw.insert(variable, value);
    }
    let categories: BTreeMap<String, String> = pairs_field(node, "cat")?.into_iter().collect();
    let predicted = code_field(node, "pred")?;
    let label = atom_field(node, "label")?;
    let labelsrc = atom_field(node, "labelsrc")?;
    let label_state = match (label, labelsrc) {
        ("none", "none") => LabelState::Unlabeled,
        (code, "ind") => LabelState::Labeled(
            AlarmType::from_symbol(code).ok_or(":label is not an alarm code")?,
            FeedbackSource::Individual,
        ),
        (code, "inst") => LabelState::Labeled(
            AlarmType::from_symbol(code).ok_or(":label is not an alarm code")?,
            FeedbackSource::Institutional,
        ),
        _ => return Err(format!("inconsistent :label {label:?} / :labelsrc {labelsrc:?}")),
    };
    Ok(ObservationRecord { event_id, tick, location, raw, categories, predicted, label_state })
}

fn parse_fb(node: &SlNode) -> Result<FeedbackRecord, String> {
    let event_id = int_field(node, "event")?;
    let source = match atom_field(node, "src")? {
        "ind" => FeedbackSource::Individual,
        "inst" => FeedbackSource::Institutional,
        other => return Err(format!("unknown :src {other:?}")),
    };
    let who = atom_field(node, "who")?.to_string();
    let verdict = match (atom_field(node, "verdict")?, atom_field(node, "suggest")?) {
        ("correct", "none") => Verdict::Correct,
        ("incorrect", code) => Verdict::Incorrect(
            AlarmType::from_symbol(code).ok_or(":suggest is not an alarm code")?,
        ),
        (v, s) => return Err(format!("inconsistent :verdict {v:?} / :suggest {s:?}")),
    };
    let tick = int_field(node, "tick")?;
    Ok(FeedbackRecord { event_id, source, who, verdict, tick })
}

fn parse_sense(node: &SlNode) -> Result<(), String> {
    int_field(node, "tick")?;
    atom_field(node, "station")?;
    atom_field(node, "var")?;
    atom_field(node, "x")?
        .parse::<f64>()
        .map_err(|_| ":x is not a number".to_string())?;
    Ok(())
}
