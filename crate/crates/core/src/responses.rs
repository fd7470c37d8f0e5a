//! Participant responses and the append-only JSONL response log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::protocol::{StudyPlan, Trial};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("unknown trial {0:?}")]
    UnknownTrial(String),
    #[error("trial {0:?} was already answered")]
    Duplicate(String),
    #[error("response for trial {0:?} is not confirmed")]
    Unconfirmed(String),
    #[error("invalid response: {0}")]
    Invalid(String),
    #[error("trial id {0:?} appears in more than one plan")]
    DuplicateTrialId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// A participant's answer to one trial, as submitted by the runner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub trial_id: String,
    pub participant_id: String,
    pub chosen_year: String,
    /// Milliseconds from scene-ready to confirmed submit, measured client-side.
    pub elapsed_ms: u64,
    pub confirmed: bool,
    /// ISO-8601 / RFC 3339 UTC timestamp from the client.
    pub client_timestamp: String,
}

/// A persisted log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    #[serde(flatten)]
    pub response: TrialResponse,
    pub server_received_at: String,
}

/// All known plans, indexed by trial id.
#[derive(Debug, Clone, Default)]
pub struct PlanStore {
    plans: BTreeMap<String, StudyPlan>,
    index: HashMap<String, (String, usize)>,
}

impl PlanStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_plans(plans: impl IntoIterator<Item = StudyPlan>) -> Result<Self, StudyError> {
        let mut store = Self::new();
        for p in plans {
            store.insert(p)?;
        }
        Ok(store)
    }

    /// Adds or replaces a participant's plan.
    pub fn insert(&mut self, plan: StudyPlan) -> Result<(), StudyError> {
        let pid = plan.participant_id.clone();
        for t in &plan.trials {
            if let Some((owner, _)) = self.index.get(&t.trial_id) {
                if *owner != pid {
                    return Err(StudyError::DuplicateTrialId(t.trial_id.clone()));
                }
            }
        }
        self.index.retain(|_, (owner, _)| *owner != pid);
        for (i, t) in plan.trials.iter().enumerate() {
            self.index.insert(t.trial_id.clone(), (pid.clone(), i));
        }
        self.plans.insert(pid, plan);
        Ok(())
    }

    /// Loads every `*.json` plan in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, StudyError> {
        let io = |source| StudyError::Io { path: dir.to_path_buf(), source };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut store = Self::new();
        for p in paths {
            let text = fs::read_to_string(&p).map_err(|source| StudyError::Io { path: p.clone(), source })?;
            let plan: StudyPlan =
                serde_json::from_str(&text).map_err(|source| StudyError::Parse { path: p.clone(), line: 0, source })?;
            store.insert(plan)?;
        }
        Ok(store)
    }

    pub fn plan(&self, participant_id: &str) -> Option<&StudyPlan> {
        self.plans.get(participant_id)
    }

    pub fn plans(&self) -> impl Iterator<Item = &StudyPlan> {
        self.plans.values()
    }

    /// Trial and owning participant.
    pub fn trial(&self, trial_id: &str) -> Option<(&str, &Trial)> {
        let (pid, i) = self.index.get(trial_id)?;
        Some((pid.as_str(), &self.plans[pid].trials[*i]))
    }

    pub fn trial_count(&self) -> usize {
        self.index.len()
    }
}

/// Checks a response against its trial. Returns the trial on success.
pub fn validate_response<'a>(resp: &TrialResponse, plans: &'a PlanStore) -> Result<&'a Trial, StudyError> {
    let (owner, trial) = plans.trial(&resp.trial_id).ok_or_else(|| StudyError::UnknownTrial(resp.trial_id.clone()))?;
    if owner != resp.participant_id {
        return Err(StudyError::Invalid(format!(
            "trial {:?} belongs to participant {owner:?}, not {:?}",
            resp.trial_id, resp.participant_id
        )));
    }
    if !resp.confirmed {
        return Err(StudyError::Unconfirmed(resp.trial_id.clone()));
    }
    if resp.elapsed_ms == 0 {
        return Err(StudyError::Invalid("elapsed_ms must be positive".into()));
    }
    if !trial.options.contains(&resp.chosen_year) {
        return Err(StudyError::Invalid(format!(
            "chosen_year {:?} is not one of {:?}",
            resp.chosen_year, trial.options
        )));
    }
    DateTime::parse_from_rfc3339(&resp.client_timestamp)
        .map_err(|e| StudyError::Invalid(format!("client_timestamp {:?}: {e}", resp.client_timestamp)))?;
    Ok(trial)
}

struct LogState {
    file: File,
    answered: HashSet<String>,
}

/// Append-only JSONL log. Appends go through a single lock so concurrent
/// sessions never interleave lines.
pub struct ResponseLog {
    path: PathBuf,
    state: Mutex<LogState>,
}

impl ResponseLog {
    /// Opens (or creates) the log and indexes already-answered trials.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StudyError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| StudyError::Io { path: dir.to_path_buf(), source })?;
        }
        let answered = read_log(&path)?.into_iter().map(|r| r.response.trial_id).collect();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StudyError::Io { path: path.clone(), source })?;
        Ok(Self { path, state: Mutex::new(LogState { file, answered }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates and appends one response. Duplicates leave the log untouched.
    pub fn record(&self, resp: TrialResponse, plans: &PlanStore) -> Result<LogRecord, StudyError> {
        validate_response(&resp, plans)?;
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if state.answered.contains(&resp.trial_id) {
            return Err(StudyError::Duplicate(resp.trial_id));
        }
        let record = LogRecord {
            response: resp,
            server_received_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        let io = |source| StudyError::Io { path: self.path.clone(), source };
        state.file.write_all(line.as_bytes()).map_err(io)?;
        state.file.sync_data().map_err(io)?;
        state.answered.insert(record.response.trial_id.clone());
        Ok(record)
    }

    pub fn is_answered(&self, trial_id: &str) -> bool {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).answered.contains(trial_id)
    }

    /// Consistent snapshot of every persisted record.
    pub fn snapshot(&self) -> Result<Vec<LogRecord>, StudyError> {
        let _guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        read_log(&self.path)
    }
}

/// Reads a JSONL log; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, StudyError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(StudyError::Io { path: path.to_path_buf(), source }),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| StudyError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|source| StudyError::Parse { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}
