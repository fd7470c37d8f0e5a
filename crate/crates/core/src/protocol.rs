//! Trial generation, ground truth and per-participant study plans.
//!
//! Two tasks are supported. *Maximum* probes one grid cell shared by every
//! displayed year; *discrimination* probes a distinct cell in each year. In
//! both cases the answer is the year whose probed value is largest, and a
//! trial is only admitted when that value beats every competitor by at
//! least [`MARGIN_FRACTION`] of the dataset maximum.
//!
//! A plan holds each (technique, year count, task) condition twice: 36
//! trials, grouped by technique in a random block order, with maximum
//! trials before discrimination trials inside each block.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layout::Technique;
use crate::raster::{Dataset, HeightField};

/// Winner margin as a fraction of the dataset's global maximum.
pub const MARGIN_FRACTION: f64 = 0.02;
/// Candidate probe sets drawn before giving up on a trial.
pub const MAX_DRAWS: usize = 1000;
/// Year counts shown simultaneously.
pub const YEAR_COUNTS: [u32; 3] = [2, 3, 4];
/// Repetitions of every condition in a plan.
pub const REPETITIONS: usize = 2;
/// Trials in one participant's plan.
pub const TRIALS_PER_PLAN: usize = Technique::ALL.len() * YEAR_COUNTS.len() * Task::ALL.len() * REPETITIONS;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("dataset has {available} years, condition needs {needed}")]
    NotEnoughYears { needed: usize, available: usize },
    #[error("dataset has {available} usable cells, condition needs {needed}")]
    NotEnoughCells { needed: usize, available: usize },
    #[error("no admissible probes for {condition} after {draws} draws (data too flat or tied)")]
    RetryBudgetExhausted { condition: Condition, draws: usize },
    #[error("tie at the top between {0:?}")]
    Tie(Vec<String>),
    #[error("probe {year}@({row},{col}) does not hit a valid cell")]
    InvalidProbe { year: String, row: usize, col: usize },
    #[error("invalid participant id {0:?} (use letters, digits, '-' or '_')")]
    InvalidParticipant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Maximum,
    Discrimination,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Maximum, Task::Discrimination];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Maximum => "maximum",
            Task::Discrimination => "discrimination",
        }
    }

    /// Question shown to the participant. Never mentions values.
    pub fn question(self) -> &'static str {
        match self {
            Task::Maximum => "Which year has the highest saturated thickness at the marked location?",
            Task::Discrimination => {
                "Each year is marked at its own location. Which year has the highest saturated thickness at its marker?"
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maximum" | "max" | "t1" | "T1" => Ok(Task::Maximum),
            "discrimination" | "t2" | "T2" => Ok(Task::Discrimination),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// One experimental condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub technique: Technique,
    pub n_years: u32,
    pub task: Task,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/N={}/{}", self.technique, self.n_years, self.task)
    }
}

/// Every condition, in canonical order.
pub fn all_conditions() -> Vec<Condition> {
    let mut out = Vec::new();
    for technique in Technique::ALL {
        for n_years in YEAR_COUNTS {
            for task in Task::ALL {
                out.push(Condition { technique, n_years, task });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Probe {
    pub year_label: String,
    pub row: usize,
    pub col: usize,
}

/// A timed question together with its answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: String,
    pub technique: Technique,
    pub n_years: u32,
    pub task: Task,
    pub years: Vec<String>,
    pub probes: Vec<Probe>,
    pub correct_year: String,
    pub options: Vec<String>,
    pub rng_seed: u64,
}

impl Trial {
    pub fn condition(&self) -> Condition {
        Condition { technique: self.technique, n_years: self.n_years, task: self.task }
    }

    /// Copy safe to hand to a participant.
    pub fn public(&self) -> PublicTrial {
        PublicTrial {
            trial_id: self.trial_id.clone(),
            technique: self.technique,
            n_years: self.n_years,
            task: self.task,
            question: self.task.question().to_string(),
            years: self.years.clone(),
            probes: self.probes.clone(),
            options: self.options.clone(),
        }
    }
}

/// A trial without its answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicTrial {
    pub trial_id: String,
    pub technique: Technique,
    pub n_years: u32,
    pub task: Task,
    pub question: String,
    pub years: Vec<String>,
    pub probes: Vec<Probe>,
    pub options: Vec<String>,
}

fn probe_value(dataset: &Dataset, probe: &Probe) -> Result<f64, ProtocolError> {
    dataset
        .field(&probe.year_label)
        .and_then(|f| f.get(probe.row, probe.col))
        .ok_or_else(|| ProtocolError::InvalidProbe { year: probe.year_label.clone(), row: probe.row, col: probe.col })
}

/// The year whose probe value is strictly greatest.
pub fn ground_truth(trial: &Trial, dataset: &Dataset) -> Result<String, ProtocolError> {
    let mut best: Option<(f64, Vec<&str>)> = None;
    for probe in &trial.probes {
        let v = probe_value(dataset, probe)?;
        match &mut best {
            Some((top, years)) if v == *top => years.push(&probe.year_label),
            Some((top, _)) if v < *top => {}
            _ => best = Some((v, vec![&probe.year_label])),
        }
    }
    match best {
        Some((_, years)) if years.len() == 1 => Ok(years[0].to_string()),
        Some((_, years)) => Err(ProtocolError::Tie(years.into_iter().map(String::from).collect())),
        None => Err(ProtocolError::Tie(Vec::new())),
    }
}

fn admissible(values: &[f64], margin: f64) -> bool {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    let gap = first - second;
    gap > 0.0 && gap >= margin
}

/// Candidate probe cells for the first `n` years of a dataset, computed once
/// and reused for every trial of that year count.
struct TrialSampler<'a> {
    dataset: &'a Dataset,
    fields: Vec<&'a HeightField>,
    years: Vec<String>,
    /// Cells valid in every year (maximum task).
    shared: Vec<(usize, usize)>,
    /// Valid cells per year (discrimination task).
    per_year: Vec<Vec<(usize, usize)>>,
    union_len: usize,
}

impl<'a> TrialSampler<'a> {
    fn new(dataset: &'a Dataset, n_years: u32) -> Result<Self, ProtocolError> {
        let n = n_years as usize;
        if n < 2 || n > dataset.len() {
            return Err(ProtocolError::NotEnoughYears { needed: n.max(2), available: dataset.len() });
        }
        let fields: Vec<&HeightField> = dataset.fields()[..n].iter().collect();
        let years = fields.iter().map(|f| f.year_label().to_string()).collect();
        let shared = fields[0]
            .valid_cells()
            .map(|(r, c, _)| (r, c))
            .filter(|&(r, c)| fields.iter().all(|f| !f.is_nodata(r, c)))
            .collect();
        let per_year: Vec<Vec<(usize, usize)>> =
            fields.iter().map(|f| f.valid_cells().map(|(r, c, _)| (r, c)).collect()).collect();
        let grid = dataset.grid();
        let union_len = (0..grid.n_rows())
            .flat_map(|r| (0..grid.n_cols()).map(move |c| (r, c)))
            .filter(|&(r, c)| fields.iter().any(|f| !f.is_nodata(r, c)))
            .count();
        Ok(Self { dataset, fields, years, shared, per_year, union_len })
    }

    fn draw(&self, technique: Technique, task: Task, rng_seed: u64) -> Result<Trial, ProtocolError> {
        let n = self.fields.len();
        match task {
            Task::Maximum if self.shared.is_empty() => {
                return Err(ProtocolError::NotEnoughCells { needed: 1, available: 0 })
            }
            Task::Discrimination if self.union_len < n => {
                return Err(ProtocolError::NotEnoughCells { needed: n, available: self.union_len })
            }
            _ => {}
        }
        let condition = Condition { technique, n_years: n as u32, task };
        let margin = MARGIN_FRACTION * self.dataset.global_max();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(n);
        let mut values: Vec<f64> = Vec::with_capacity(n);

        for _ in 0..MAX_DRAWS {
            cells.clear();
            match task {
                Task::Maximum => {
                    let cell = self.shared[rng.random_range(0..self.shared.len())];
                    cells.resize(n, cell);
                }
                Task::Discrimination => {
                    cells.extend(self.per_year.iter().map(|c| c[rng.random_range(0..c.len())]));
                    let distinct = (1..n).all(|i| !cells[..i].contains(&cells[i]));
                    if !distinct {
                        continue;
                    }
                }
            }
            values.clear();
            values.extend(self.fields.iter().zip(&cells).map(|(f, &(r, c))| f.get(r, c).expect("valid cell")));
            if !admissible(&values, margin) {
                continue;
            }
            let probes: Vec<Probe> = self
                .years
                .iter()
                .zip(&cells)
                .map(|(y, &(row, col))| Probe { year_label: y.clone(), row, col })
                .collect();
            let mut trial = Trial {
                trial_id: format!("{technique}-n{n}-{task}-{rng_seed:016x}"),
                technique,
                n_years: n as u32,
                task,
                years: self.years.clone(),
                probes,
                correct_year: String::new(),
                options: self.years.clone(),
                rng_seed,
            };
            trial.correct_year = ground_truth(&trial, self.dataset)?;
            return Ok(trial);
        }
        Err(ProtocolError::RetryBudgetExhausted { condition, draws: MAX_DRAWS })
    }
}

/// Draws probes for one condition until the winner margin holds.
pub fn generate_trial(
    dataset: &Dataset,
    technique: Technique,
    n_years: u32,
    task: Task,
    rng_seed: u64,
) -> Result<Trial, ProtocolError> {
    TrialSampler::new(dataset, n_years)?.draw(technique, task, rng_seed)
}

/// One participant's ordered trial sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub participant_id: String,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

impl StudyPlan {
    /// Number of trials per condition.
    pub fn condition_counts(&self) -> BTreeMap<Condition, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.trials {
            *counts.entry(t.condition()).or_insert(0) += 1;
        }
        counts
    }

    /// Technique blocks in presentation order.
    pub fn block_order(&self) -> Vec<Technique> {
        let mut order: Vec<Technique> = Vec::new();
        for t in &self.trials {
            if order.last() != Some(&t.technique) {
                order.push(t.technique);
            }
        }
        order
    }

    pub fn public(&self) -> PublicPlan {
        PublicPlan {
            participant_id: self.participant_id.clone(),
            trials: self.trials.iter().map(Trial::public).collect(),
        }
    }

    pub fn trial(&self, trial_id: &str) -> Option<&Trial> {
        self.trials.iter().find(|t| t.trial_id == trial_id)
    }
}

/// A plan as sent to the runner: no answer keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicPlan {
    pub participant_id: String,
    pub trials: Vec<PublicTrial>,
}

pub fn validate_participant_id(id: &str) -> Result<(), ProtocolError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::InvalidParticipant(id.to_string()))
    }
}

// FNV-1a over the participant id, folded into the seed.
fn plan_stream_seed(participant_id: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in participant_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

/// Builds the 36-trial plan for one participant.
pub fn build_study_plan(dataset: &Dataset, participant_id: &str, seed: u64) -> Result<StudyPlan, ProtocolError> {
    validate_participant_id(participant_id)?;
    let needed = *YEAR_COUNTS.iter().max().unwrap() as usize;
    if dataset.len() < needed {
        return Err(ProtocolError::NotEnoughYears { needed, available: dataset.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan_stream_seed(participant_id, seed));
    let mut blocks = Technique::ALL;
    blocks.shuffle(&mut rng);

    let samplers = YEAR_COUNTS
        .iter()
        .map(|&n| TrialSampler::new(dataset, n).map(|s| (n, s)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let mut trials = Vec::with_capacity(TRIALS_PER_PLAN);
    for technique in blocks {
        for task in Task::ALL {
            let mut counts: Vec<u32> = YEAR_COUNTS.iter().flat_map(|&n| [n; REPETITIONS]).collect();
            counts.shuffle(&mut rng);
            for n_years in counts {
                let trial_seed: u64 = rng.random();
                let mut trial = samplers[&n_years].draw(technique, task, trial_seed)?;
                trial.trial_id = format!("{participant_id}-{:02}", trials.len() + 1);
                trials.push(trial);
            }
        }
    }
    Ok(StudyPlan { participant_id: participant_id.to_string(), seed, trials })
}
