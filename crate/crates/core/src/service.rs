//! Rewrite and rating task assignment backed by an append-only JSONL event
//! log. State is a pure fold over events; replaying the log rebuilds it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{AuthorKind, Benchmark, ComplexSimplePair, Rewrite};
use crate::metrics::ratings::RatingRecord;

/// Minimum sentences in an unflagged rewrite submission.
pub const MIN_REWRITE_SENTENCES: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ServiceError {
    #[error("unknown worker {0}")]
    UnknownWorker(String),
    #[error("empty worker id")]
    EmptyWorker,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {task_id} is not assigned to {worker_id}")]
    NotAssigned { task_id: String, worker_id: String },
    #[error("{worker_id} already submitted task {task_id}")]
    DoubleSubmission { task_id: String, worker_id: String },
    #[error("payload does not match a {0} task")]
    WrongPayload(&'static str),
    #[error("{field} = {value} is outside 0-5")]
    OutOfRange { field: &'static str, value: u8 },
    #[error("a rewrite needs at least {MIN_REWRITE_SENTENCES} non-empty sentences unless flagged")]
    TooFewSentences,
    #[error("event log: {0}")]
    Log(String),
    #[error("event log line {line}: {message}")]
    Replay { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Rewrite,
    Rate,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Rewrite => "rewrite",
            TaskKind::Rate => "rate",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rewrite" => Ok(TaskKind::Rewrite),
            "rate" => Ok(TaskKind::Rate),
            _ => Err(format!("unknown task kind {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub rewrites_per_pair: usize,
    pub ratings_per_rewrite: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            rewrites_per_pair: 3,
            ratings_per_rewrite: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    pub pair_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewrite_id: Option<String>,
    pub original_text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewritten_text: Option<String>,
    pub assigned_to: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteFlag {
    #[default]
    None,
    TooSimple,
    Problematic,
}

/// Answers to the six rating questions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingAnswers {
    pub sensical: u8,
    pub grammatical: u8,
    pub miss_fact: bool,
    pub new_fact: bool,
    pub wrong_split: bool,
    pub need_more_split: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteAnswer {
    pub sentences: Vec<String>,
    #[serde(default)]
    pub flag: RewriteFlag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Rating(RatingAnswers),
    Rewrite(RewriteAnswer),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub task_id: String,
    pub worker_id: String,
    pub payload: Payload,
    /// RFC 3339; supplied by the caller so that replay is deterministic.
    pub submitted_at: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub worker_id: String,
    /// Id given to a collected rewrite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewrite_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    PoolLoaded {
        pairs: Vec<ComplexSimplePair>,
        config: ServiceConfig,
    },
    Registered {
        worker_id: String,
    },
    Assigned {
        task_id: String,
        worker_id: String,
    },
    Submitted {
        submission: Submission,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct RewriteEntry {
    rewrite: Rewrite,
    pair_id: String,
    /// Worker who wrote it, for rewrites collected by the service.
    author_worker: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Pending,
    Fulfilled,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindProgress {
    pub tasks: usize,
    pub quota_total: usize,
    pub pending: usize,
    pub fulfilled: usize,
    pub complete_tasks: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub pairs: usize,
    pub rewrites: usize,
    pub workers: usize,
    pub ratings: usize,
    pub flagged: usize,
    pub rewrite_tasks: KindProgress,
    pub rate_tasks: KindProgress,
}

/// In-memory state, a deterministic fold over events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServiceState {
    config: ServiceConfig,
    pairs: BTreeMap<String, ComplexSimplePair>,
    rewrites: BTreeMap<String, RewriteEntry>,
    /// Collected rewrite ids in submission order.
    collected: Vec<String>,
    workers: BTreeSet<String>,
    slots: BTreeMap<String, BTreeMap<String, Slot>>,
    ratings: Vec<RatingRecord>,
    flagged: usize,
}

fn rewrite_task_id(pair_id: &str) -> String {
    format!("rewrite:{pair_id}")
}

fn rate_task_id(rewrite_id: &str) -> String {
    format!("rate:{rewrite_id}")
}

fn parse_task_id(task_id: &str) -> Option<(TaskKind, &str)> {
    if let Some(pair) = task_id.strip_prefix("rewrite:") {
        Some((TaskKind::Rewrite, pair))
    } else {
        task_id.strip_prefix("rate:").map(|rw| (TaskKind::Rate, rw))
    }
}

impl ServiceState {
    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn ratings(&self) -> &[RatingRecord] {
        &self.ratings
    }

    pub fn workers(&self) -> &BTreeSet<String> {
        &self.workers
    }

    fn quota(&self, kind: TaskKind) -> usize {
        match kind {
            TaskKind::Rewrite => self.config.rewrites_per_pair,
            TaskKind::Rate => self.config.ratings_per_rewrite,
        }
    }

    fn task_exists(&self, task_id: &str) -> Option<TaskKind> {
        let (kind, target) = parse_task_id(task_id)?;
        let exists = match kind {
            TaskKind::Rewrite => self.pairs.contains_key(target),
            TaskKind::Rate => self.rewrites.contains_key(target),
        };
        exists.then_some(kind)
    }

    /// Task ids of one kind in assignment-priority tie-break order.
    fn task_ids(&self, kind: TaskKind) -> Vec<(String, String)> {
        match kind {
            TaskKind::Rewrite => self.pairs.keys().map(|p| (p.clone(), rewrite_task_id(p))).collect(),
            TaskKind::Rate => {
                let mut ids: Vec<(String, String)> = self
                    .rewrites
                    .values()
                    .map(|e| (e.pair_id.clone(), e.rewrite.rewrite_id.clone()))
                    .collect();
                ids.sort();
                ids.into_iter().map(|(_, rw)| (rw.clone(), rate_task_id(&rw))).collect()
            }
        }
    }

    fn coverage(&self, task_id: &str) -> usize {
        self.slots.get(task_id).map_or(0, BTreeMap::len)
    }

    fn slot(&self, task_id: &str, worker_id: &str) -> Option<Slot> {
        self.slots.get(task_id)?.get(worker_id).copied()
    }

    pub fn task(&self, task_id: &str, worker_id: &str) -> Option<Task> {
        let (kind, target) = parse_task_id(task_id)?;
        let (pair_id, rewrite) = match kind {
            TaskKind::Rewrite => (target.to_string(), None),
            TaskKind::Rate => {
                let entry = self.rewrites.get(target)?;
                (entry.pair_id.clone(), Some(entry))
            }
        };
        let pair = self.pairs.get(&pair_id)?;
        Some(Task {
            task_id: task_id.to_string(),
            kind,
            pair_id,
            rewrite_id: rewrite.map(|e| e.rewrite.rewrite_id.clone()),
            original_text: pair.complex.clone(),
            rewritten_text: rewrite.map(|e| e.rewrite.sentences.join(" ")),
            assigned_to: worker_id.to_string(),
        })
    }

    fn check_worker(&self, worker_id: &str) -> Result<(), ServiceError> {
        if self.workers.contains(worker_id) {
            Ok(())
        } else {
            Err(ServiceError::UnknownWorker(worker_id.to_string()))
        }
    }

    /// Task the worker should get next, without recording an assignment.
    /// A pending assignment of the same kind is handed back first.
    pub fn choose_task(&self, worker_id: &str, kind: TaskKind) -> Result<Option<String>, ServiceError> {
        self.check_worker(worker_id)?;
        let ids = self.task_ids(kind);
        if let Some((_, id)) = ids
            .iter()
            .find(|(_, id)| self.slot(id, worker_id) == Some(Slot::Pending))
        {
            return Ok(Some(id.clone()));
        }
        let quota = self.quota(kind);
        let best = ids
            .iter()
            .filter(|(_, id)| self.slot(id, worker_id).is_none())
            .filter(|(_, id)| self.coverage(id) < quota)
            .filter(|(target, _)| {
                kind != TaskKind::Rate || self.rewrites[target].author_worker.as_deref() != Some(worker_id)
            })
            .enumerate()
            .min_by_key(|(order, (_, id))| (self.coverage(id), *order))
            .map(|(_, (_, id))| id.clone());
        Ok(best)
    }

    /// Checks a submission against the current state.
    pub fn validate(&self, submission: &Submission) -> Result<(), ServiceError> {
        let Submission {
            task_id,
            worker_id,
            payload,
            ..
        } = submission;
        self.check_worker(worker_id)?;
        let kind = self
            .task_exists(task_id)
            .ok_or_else(|| ServiceError::UnknownTask(task_id.clone()))?;
        match self.slot(task_id, worker_id) {
            None => {
                return Err(ServiceError::NotAssigned {
                    task_id: task_id.clone(),
                    worker_id: worker_id.clone(),
                })
            }
            Some(Slot::Fulfilled) => {
                return Err(ServiceError::DoubleSubmission {
                    task_id: task_id.clone(),
                    worker_id: worker_id.clone(),
                })
            }
            Some(Slot::Pending) => {}
        }
        match (kind, payload) {
            (TaskKind::Rate, Payload::Rating(a)) => {
                for (field, value) in [("sensical", a.sensical), ("grammatical", a.grammatical)] {
                    if value > 5 {
                        return Err(ServiceError::OutOfRange { field, value });
                    }
                }
                Ok(())
            }
            (TaskKind::Rewrite, Payload::Rewrite(r)) => {
                let filled = r.sentences.iter().filter(|s| !s.trim().is_empty()).count();
                if r.flag == RewriteFlag::None && filled < MIN_REWRITE_SENTENCES {
                    return Err(ServiceError::TooFewSentences);
                }
                Ok(())
            }
            (kind, _) => Err(ServiceError::WrongPayload(kind.as_str())),
        }
    }

    fn next_collected_id(&self, pair_id: &str) -> String {
        let n = self
            .collected
            .iter()
            .filter(|id| self.rewrites[*id].pair_id == pair_id)
            .count();
        format!("{pair_id}-w{}", n + 1)
    }

    /// Applies an event that was already validated. Returns the id of a
    /// collected rewrite, if the event created one.
    pub fn apply(&mut self, event: &Event) -> Result<Option<String>, ServiceError> {
        match event {
            Event::PoolLoaded { pairs, config } => {
                self.config = config.clone();
                for pair in pairs {
                    for rw in &pair.rewrites {
                        self.rewrites.insert(
                            rw.rewrite_id.clone(),
                            RewriteEntry {
                                rewrite: rw.clone(),
                                pair_id: pair.pair_id.clone(),
                                author_worker: None,
                            },
                        );
                    }
                    self.pairs.insert(pair.pair_id.clone(), pair.clone());
                }
                Ok(None)
            }
            Event::Registered { worker_id } => {
                self.workers.insert(worker_id.clone());
                Ok(None)
            }
            Event::Assigned { task_id, worker_id } => {
                self.check_worker(worker_id)?;
                if self.task_exists(task_id).is_none() {
                    return Err(ServiceError::UnknownTask(task_id.clone()));
                }
                self.slots
                    .entry(task_id.clone())
                    .or_default()
                    .insert(worker_id.clone(), Slot::Pending);
                Ok(None)
            }
            Event::Submitted { submission } => {
                self.validate(submission)?;
                let Submission {
                    task_id,
                    worker_id,
                    payload,
                    ..
                } = submission;
                self.slots
                    .get_mut(task_id)
                    .expect("validated")
                    .insert(worker_id.clone(), Slot::Fulfilled);
                let (_, target) = parse_task_id(task_id).expect("validated");
                match payload {
                    Payload::Rating(a) => {
                        self.ratings.push(RatingRecord {
                            rewrite_id: target.to_string(),
                            rater_id: worker_id.clone(),
                            sensical: a.sensical,
                            grammatical: a.grammatical,
                            miss_fact: a.miss_fact,
                            new_fact: a.new_fact,
                            wrong_split: a.wrong_split,
                            need_more_split: a.need_more_split,
                        });
                        Ok(None)
                    }
                    Payload::Rewrite(r) if r.flag != RewriteFlag::None => {
                        self.flagged += 1;
                        Ok(None)
                    }
                    Payload::Rewrite(r) => {
                        let rewrite_id = self.next_collected_id(target);
                        let rewrite = Rewrite {
                            rewrite_id: rewrite_id.clone(),
                            author: AuthorKind::Human,
                            sentences: r
                                .sentences
                                .iter()
                                .map(|s| s.trim().to_string())
                                .filter(|s| !s.is_empty())
                                .collect(),
                        };
                        self.rewrites.insert(
                            rewrite_id.clone(),
                            RewriteEntry {
                                rewrite,
                                pair_id: target.to_string(),
                                author_worker: Some(worker_id.clone()),
                            },
                        );
                        self.collected.push(rewrite_id.clone());
                        Ok(Some(rewrite_id))
                    }
                }
            }
        }
    }

    pub fn progress(&self) -> Progress {
        let kind_progress = |kind: TaskKind| {
            let ids = self.task_ids(kind);
            let quota = self.quota(kind);
            let mut p = KindProgress {
                tasks: ids.len(),
                quota_total: ids.len() * quota,
                ..KindProgress::default()
            };
            for (_, id) in &ids {
                let slots = self.slots.get(id);
                let fulfilled = slots.map_or(0, |s| s.values().filter(|&&v| v == Slot::Fulfilled).count());
                p.fulfilled += fulfilled;
                p.pending += self.coverage(id) - fulfilled;
                if fulfilled >= quota {
                    p.complete_tasks += 1;
                }
            }
            p
        };
        Progress {
            pairs: self.pairs.len(),
            rewrites: self.rewrites.len(),
            workers: self.workers.len(),
            ratings: self.ratings.len(),
            flagged: self.flagged,
            rewrite_tasks: kind_progress(TaskKind::Rewrite),
            rate_tasks: kind_progress(TaskKind::Rate),
        }
    }

    /// Pairs with every rewrite known to the service, loaded ones first;
    /// pairs without rewrites are left out.
    pub fn rewrites_benchmark(&self) -> Benchmark {
        let mut pairs: Vec<ComplexSimplePair> = self.pairs.values().cloned().collect();
        for id in &self.collected {
            let entry = &self.rewrites[id];
            let pair = pairs
                .iter_mut()
                .find(|p| p.pair_id == entry.pair_id)
                .expect("pair exists");
            pair.rewrites.push(entry.rewrite.clone());
        }
        pairs.retain(|p| !p.rewrites.is_empty());
        Benchmark {
            name: "collected".into(),
            pairs,
            provenance: "rating service export".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    Rewrites,
    Ratings,
}

impl std::str::FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rewrites" => Ok(ExportKind::Rewrites),
            "ratings" => Ok(ExportKind::Ratings),
            _ => Err(format!("unknown export kind {s:?}")),
        }
    }
}

/// State plus the log it is persisted to. Every accepted mutation is written
/// and flushed before it is applied.
pub struct TaskService {
    state: ServiceState,
    events: Vec<Event>,
    sink: Option<BufWriter<File>>,
}

impl TaskService {
    /// Service without persistence.
    pub fn in_memory(pool: &Benchmark, config: ServiceConfig) -> Self {
        let mut service = TaskService {
            state: ServiceState::default(),
            events: Vec::new(),
            sink: None,
        };
        service
            .record(Event::PoolLoaded {
                pairs: pool.pairs.clone(),
                config,
            })
            .expect("in-memory pool load");
        service
    }

    /// Opens `log`, replaying it when it has events and otherwise starting a
    /// new log with `pool`.
    pub fn open(log: &Path, pool: &Benchmark, config: ServiceConfig) -> Result<Self, ServiceError> {
        let existing = match std::fs::read_to_string(log) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(ServiceError::Log(e.to_string())),
        };
        let events = parse_events(&existing)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log)
            .map_err(|e| ServiceError::Log(e.to_string()))?;
        let mut service = TaskService {
            state: replay(&events)?,
            events,
            sink: Some(BufWriter::new(file)),
        };
        if service.events.is_empty() {
            service.record(Event::PoolLoaded {
                pairs: pool.pairs.clone(),
                config,
            })?;
        }
        Ok(service)
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn record(&mut self, event: Event) -> Result<Option<String>, ServiceError> {
        let mut next = self.state.clone();
        let created = next.apply(&event)?;
        if let Some(sink) = &mut self.sink {
            let line = serde_json::to_string(&event).expect("event serializes");
            writeln!(sink, "{line}")
                .and_then(|_| sink.flush())
                .map_err(|e| ServiceError::Log(e.to_string()))?;
        }
        self.state = next;
        self.events.push(event);
        Ok(created)
    }

    /// Registers a worker; registering twice is a no-op.
    pub fn register(&mut self, worker_id: &str) -> Result<(), ServiceError> {
        if worker_id.trim().is_empty() {
            return Err(ServiceError::EmptyWorker);
        }
        if self.state.workers.contains(worker_id) {
            return Ok(());
        }
        self.record(Event::Registered {
            worker_id: worker_id.to_string(),
        })?;
        Ok(())
    }

    pub fn next_task(&mut self, worker_id: &str, kind: TaskKind) -> Result<Option<Task>, ServiceError> {
        let Some(task_id) = self.state.choose_task(worker_id, kind)? else {
            return Ok(None);
        };
        if self.state.slot(&task_id, worker_id).is_none() {
            self.record(Event::Assigned {
                task_id: task_id.clone(),
                worker_id: worker_id.to_string(),
            })?;
        }
        Ok(self.state.task(&task_id, worker_id))
    }

    pub fn submit(&mut self, submission: Submission) -> Result<Ack, ServiceError> {
        self.state.validate(&submission)?;
        let ack = Ack {
            task_id: submission.task_id.clone(),
            worker_id: submission.worker_id.clone(),
            rewrite_id: None,
        };
        let rewrite_id = self.record(Event::Submitted { submission })?;
        Ok(Ack { rewrite_id, ..ack })
    }

    pub fn progress(&self) -> Progress {
        self.state.progress()
    }

    pub fn export(&self, kind: ExportKind) -> String {
        match kind {
            ExportKind::Rewrites => crate::datasets::write_canonical(&self.state.rewrites_benchmark()),
            ExportKind::Ratings => crate::metrics::ratings::write_ratings(&self.state.ratings),
        }
    }
}

pub fn parse_events(text: &str) -> Result<Vec<Event>, ServiceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ServiceError::Replay {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rebuilds state from an event sequence.
pub fn replay(events: &[Event]) -> Result<ServiceState, ServiceError> {
    let mut state = ServiceState::default();
    for (i, event) in events.iter().enumerate() {
        state.apply(event).map_err(|e| ServiceError::Replay {
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(state)
}
