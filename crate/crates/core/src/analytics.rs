//! Accuracy and completion-time aggregates over the response log.
//!
//! Counts are kept as integers per (technique, year count, task) so that
//! summaries are independent of record order and tallies of disjoint logs
//! merge exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::layout::Technique;
use crate::protocol::{Condition, Task};
use crate::responses::{PlanStore, StudyError, TrialResponse};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTally {
    pub correct: u64,
    pub total: u64,
    pub elapsed_ms: u128,
}

impl CellTally {
    fn add(&mut self, other: &CellTally) {
        self.correct += other.correct;
        self.total += other.total;
        self.elapsed_ms += other.elapsed_ms;
    }

    pub fn accuracy_pct(&self) -> f64 {
        (100 * self.correct) as f64 / self.total as f64
    }

    pub fn mean_time_s(&self) -> f64 {
        self.elapsed_ms as f64 / 1000.0 / self.total as f64
    }
}

/// Raw counts per condition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    cells: BTreeMap<Condition, CellTally>,
}

impl Tally {
    /// Counts confirmed responses. Every response must reference a known trial.
    pub fn from_responses<'a, I>(responses: I, plans: &PlanStore) -> Result<Self, StudyError>
    where
        I: IntoIterator<Item = &'a TrialResponse>,
    {
        let mut tally = Tally::default();
        for r in responses {
            let (_, trial) = plans.trial(&r.trial_id).ok_or_else(|| StudyError::UnknownTrial(r.trial_id.clone()))?;
            if !r.confirmed {
                continue;
            }
            let cell = tally.cells.entry(trial.condition()).or_default();
            cell.total += 1;
            cell.correct += u64::from(r.chosen_year == trial.correct_year);
            cell.elapsed_ms += r.elapsed_ms as u128;
        }
        Ok(tally)
    }

    pub fn merge(&mut self, other: &Tally) {
        for (k, v) in &other.cells {
            self.cells.entry(*k).or_default().add(v);
        }
    }

    pub fn cells(&self) -> &BTreeMap<Condition, CellTally> {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn pooled(&self) -> BTreeMap<(Technique, u32), CellTally> {
        let mut out: BTreeMap<(Technique, u32), CellTally> = BTreeMap::new();
        for (c, v) in &self.cells {
            out.entry((c.technique, c.n_years)).or_default().add(v);
        }
        out
    }

    pub fn summary(&self) -> AnalyticsSummary {
        let accuracy = self
            .pooled()
            .into_iter()
            .map(|((technique, n_years), t)| ConditionCell {
                technique,
                n_years,
                accuracy_pct: t.accuracy_pct(),
                mean_time_s: t.mean_time_s(),
                correct: t.correct,
                total: t.total,
            })
            .collect();
        let by_task = self
            .cells
            .iter()
            .map(|(c, t)| TaskCell {
                technique: c.technique,
                n_years: c.n_years,
                task: c.task,
                accuracy_pct: t.accuracy_pct(),
                mean_time_s: t.mean_time_s(),
                correct: t.correct,
                total: t.total,
            })
            .collect();
        AnalyticsSummary {
            empty: self.cells.is_empty(),
            responses: self.cells.values().map(|t| t.total).sum(),
            accuracy,
            by_task,
            gaps: self.gaps(),
        }
    }

    /// Maximum minus discrimination accuracy, for conditions with both tasks.
    pub fn gaps(&self) -> Vec<GapCell> {
        let mut out = Vec::new();
        for technique in Technique::ALL {
            let mut years: Vec<u32> = self.cells.keys().filter(|c| c.technique == technique).map(|c| c.n_years).collect();
            years.dedup();
            for n_years in years {
                let get = |task| self.cells.get(&Condition { technique, n_years, task });
                if let (Some(t1), Some(t2)) = (get(Task::Maximum), get(Task::Discrimination)) {
                    let (a1, a2) = (t1.accuracy_pct(), t2.accuracy_pct());
                    out.push(GapCell {
                        technique,
                        n_years,
                        maximum_pct: a1,
                        discrimination_pct: a2,
                        gap_pct: a1 - a2,
                    });
                }
            }
        }
        out
    }
}

/// Pooled over both tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCell {
    pub technique: Technique,
    pub n_years: u32,
    pub accuracy_pct: f64,
    pub mean_time_s: f64,
    pub correct: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCell {
    pub technique: Technique,
    pub n_years: u32,
    pub task: Task,
    pub accuracy_pct: f64,
    pub mean_time_s: f64,
    pub correct: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub technique: Technique,
    pub n_years: u32,
    pub maximum_pct: f64,
    pub discrimination_pct: f64,
    pub gap_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSummary {
    /// Set when no responses were counted.
    pub empty: bool,
    pub responses: u64,
    /// Accuracy and mean time per (technique, N), both tasks pooled.
    pub accuracy: Vec<ConditionCell>,
    /// Same metrics split by task.
    pub by_task: Vec<TaskCell>,
    pub gaps: Vec<GapCell>,
}

impl AnalyticsSummary {
    pub fn cell(&self, technique: Technique, n_years: u32) -> Option<&ConditionCell> {
        self.accuracy.iter().find(|c| c.technique == technique && c.n_years == n_years)
    }

    pub fn gap(&self, technique: Technique, n_years: u32) -> Option<f64> {
        self.gaps.iter().find(|g| g.technique == technique && g.n_years == n_years).map(|g| g.gap_pct)
    }
}

pub fn summarize<'a, I>(responses: I, plans: &PlanStore) -> Result<AnalyticsSummary, StudyError>
where
    I: IntoIterator<Item = &'a TrialResponse>,
{
    Ok(Tally::from_responses(responses, plans)?.summary())
}

pub fn accuracy_gap<'a, I>(responses: I, plans: &PlanStore) -> Result<Vec<GapCell>, StudyError>
where
    I: IntoIterator<Item = &'a TrialResponse>,
{
    Ok(Tally::from_responses(responses, plans)?.gaps())
}
