//! Summary JSON and CSV tables written by `surfgraph analyze`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use surfgraph::analytics::{summarize, AnalyticsSummary};
use surfgraph::layout::Technique;
use surfgraph::protocol::Task;
use surfgraph::responses::{read_log, PlanStore};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const TIME_CSV: &str = "completion_time.csv";
pub const GAP_CSV: &str = "task_gap.csv";
pub const BY_TASK_CSV: &str = "accuracy_by_task.csv";

#[derive(Serialize)]
struct AccuracyRow {
    technique: Technique,
    n_years: u32,
    accuracy_pct: f64,
    correct: u64,
    total: u64,
}

#[derive(Serialize)]
struct TimeRow {
    technique: Technique,
    n_years: u32,
    mean_time_s: f64,
    total: u64,
}

#[derive(Serialize)]
struct GapRow {
    technique: Technique,
    n_years: u32,
    maximum_pct: f64,
    discrimination_pct: f64,
    gap_pct: f64,
}

#[derive(Serialize)]
struct TaskRow {
    technique: Technique,
    n_years: u32,
    task: Task,
    accuracy_pct: f64,
    mean_time_s: f64,
    correct: u64,
    total: u64,
}

/// Reads the log, summarizes it against the plans and writes every table into `out`.
pub fn analyze(log: &Path, plans: &PlanStore, out: &Path) -> Result<(AnalyticsSummary, Vec<PathBuf>)> {
    let records = read_log(log)?;
    let summary = summarize(records.iter().map(|r| &r.response), plans)?;
    let files = write_report(&summary, out)?;
    Ok((summary, files))
}

pub fn write_report(summary: &AnalyticsSummary, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let summary_path = out.join(SUMMARY_FILE);
    fs::write(&summary_path, serde_json::to_vec_pretty(summary)?)?;

    let accuracy = summary.accuracy.iter().map(|c| AccuracyRow {
        technique: c.technique,
        n_years: c.n_years,
        accuracy_pct: c.accuracy_pct,
        correct: c.correct,
        total: c.total,
    });
    let time = summary.accuracy.iter().map(|c| TimeRow {
        technique: c.technique,
        n_years: c.n_years,
        mean_time_s: c.mean_time_s,
        total: c.total,
    });
    let gaps = summary.gaps.iter().map(|g| GapRow {
        technique: g.technique,
        n_years: g.n_years,
        maximum_pct: g.maximum_pct,
        discrimination_pct: g.discrimination_pct,
        gap_pct: g.gap_pct,
    });
    let by_task = summary.by_task.iter().map(|c| TaskRow {
        technique: c.technique,
        n_years: c.n_years,
        task: c.task,
        accuracy_pct: c.accuracy_pct,
        mean_time_s: c.mean_time_s,
        correct: c.correct,
        total: c.total,
    });
    Ok(vec![
        summary_path,
        write_csv(&out.join(ACCURACY_CSV), accuracy)?,
        write_csv(&out.join(TIME_CSV), time)?,
        write_csv(&out.join(GAP_CSV), gaps)?,
        write_csv(&out.join(BY_TASK_CSV), by_task)?,
    ])
}

fn write_csv<R: Serialize>(path: &Path, rows: impl Iterator<Item = R>) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}
