use std::path::Path;
use std::process::{Command, Output};

use surfgraph::protocol::StudyPlan;
use surfgraph::responses::{PlanStore, ResponseLog, TrialResponse};

fn surfgraph(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfgraph"))
        .env("STUDY_DATA_DIR", data)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn demo_plan_analyze_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("study");
    ok(surfgraph(&data, &["demo-data", "--rows", "24", "--cols", "24"]));
    assert!(data.join("dataset/manifest.json").is_file());

    let stdout = ok(surfgraph(&data, &["plan", "--participant", "p01", "--seed", "7"]));
    assert!(stdout.starts_with("36 trials for p01"), "{stdout}");
    let again = surfgraph(&data, &["plan", "--participant", "p01", "--seed", "8"]);
    assert!(!again.status.success());

    let out = tmp.path().join("empty-analysis");
    let stdout = ok(surfgraph(&data, &["analyze", "--out", out.to_str().unwrap()]));
    assert!(stdout.contains("empty"));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["empty"], true);

    let plans = PlanStore::load_dir(&data.join("plans")).unwrap();
    let plan: &StudyPlan = plans.plan("p01").unwrap();
    let log = ResponseLog::open(data.join("responses.jsonl")).unwrap();
    for (i, t) in plan.trials.iter().enumerate() {
        let chosen = if i % 3 == 0 { t.options.iter().find(|o| **o != t.correct_year).unwrap() } else { &t.correct_year };
        let resp = TrialResponse {
            trial_id: t.trial_id.clone(),
            participant_id: "p01".into(),
            chosen_year: chosen.clone(),
            elapsed_ms: 2000 + 100 * i as u64,
            confirmed: true,
            client_timestamp: "2026-10-18T08:00:00Z".into(),
        };
        log.record(resp, &plans).unwrap();
    }

    let out = tmp.path().join("analysis");
    let stdout = ok(surfgraph(&data, &["analyze", "--out", out.to_str().unwrap()]));
    assert!(stdout.contains("36 responses"), "{stdout}");
    let mut rdr = csv::Reader::from_path(out.join("accuracy.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, &csv::StringRecord::from(vec!["technique", "n_years", "accuracy_pct", "correct", "total"]));
    let total: u64 = rdr.records().map(|r| r.unwrap()[4].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 36);
    for name in ["completion_time.csv", "task_gap.csv", "accuracy_by_task.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}

#[test]
fn build_scene_and_ingest_report_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("study");
    ok(surfgraph(&data, &["demo-data", "--years", "3", "--rows", "16", "--cols", "16"]));
    let scene = tmp.path().join("scene");
    let stdout = ok(surfgraph(
        &data,
        &["build-scene", "--technique", "horizon", "--years", "3", "--S", "90", "--B", "4", "--out", scene.to_str().unwrap()],
    ));
    assert!(stdout.starts_with("horizon scene with 3 slots"), "{stdout}");
    assert!(scene.join("scene.json").is_file());

    let bad = surfgraph(&data, &["build-scene", "--technique", "horizon", "--years", "5", "--out", scene.to_str().unwrap()]);
    assert!(!bad.status.success());

    let bad = surfgraph(&data, &["build-scene", "--technique", "pie", "--years", "2", "--out", scene.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown technique"));

    let src = tmp.path().join("src");
    std::fs::create_dir_all(&src).unwrap();
    std::fs::write(src.join("only.asc"), "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n").unwrap();
    std::fs::write(src.join("manifest.json"), r#"[{"year_label":"2010","path":"only.asc"}]"#).unwrap();
    let bad = surfgraph(&tmp.path().join("other"), &["ingest", src.join("manifest.json").to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("at least 2"), "{}", String::from_utf8_lossy(&bad.stderr));
}
