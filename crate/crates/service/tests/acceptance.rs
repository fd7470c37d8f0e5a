//! Acceptance gate. Each check prints one `PASS`/`FAIL` line; the process
//! exits non-zero if any check fails.
//!
//! Run with `cargo test -p surfgraph-service --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfgraph::analytics::{accuracy_gap, summarize};
use surfgraph::export::{read_scene, MANIFEST_FILE};
use surfgraph::horizon::{clip_triangle_area, clip_triangle_at_level, decompose, BandParams, ClipTriangle, ClipVertex};
use surfgraph::layout::{slot_extent, slot_extent_exact, Bounds, LayoutParams, Technique};
use surfgraph::protocol::{build_study_plan, generate_trial, ground_truth, Probe, StudyPlan, Task, Trial};
use surfgraph::raster::{synthesize_field, validate_dataset, Dataset};
use surfgraph::responses::{PlanStore, TrialResponse};
use surfgraph::surface::{projected_area, triangulate, TriangleMesh};

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took > limit {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(took)
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn table_budgets() -> Outcome {
    let started = Instant::now();
    let mut checked = 0;
    for s in [600.0, 900.0, 960.0] {
        for n in [2u32, 3, 4] {
            for b in [2u32, 4, 8] {
                for h in [0.0, 50.0] {
                    let (rs, rh, rn, rb) = (rational(s), rational(h), rational(n as f64), rational(b as f64));
                    let two = rational(2.0);
                    let expected = [
                        (Technique::SharedSurface, rs.clone() + rh.clone()),
                        (Technique::SmallMultiple, rs.clone() / rn.clone() + rh.clone()),
                        (Technique::Horizon, rs.clone() / (rn * two * rb) + rh),
                    ];
                    for (t, want) in expected {
                        let p = LayoutParams::new(t, s, n).with_min_height(h).with_bands(b);
                        let exact = slot_extent_exact(&p).map_err(|e| e.to_string())?;
                        ensure!(exact == want, "{t} S={s} N={n} B={b} h={h}: {exact} != {want}");
                        let f = slot_extent(&p).map_err(|e| e.to_string())?;
                        ensure!(f == want.to_f64().unwrap(), "{t} S={s} N={n} B={b} h={h}: f64 {f}");
                        checked += 1;
                    }
                }
            }
        }
    }
    let took = within(Duration::from_secs(1), started)?;
    Ok(format!("{checked} budgets exact in {took:.2?}"))
}

fn horizon_decomposition() -> Outcome {
    let started = Instant::now();
    let mut triangles = 0;
    for seed in 0..100u64 {
        let field = synthesize_field(seed, 32, 32, 5, 100.0).map_err(|e| e.to_string())?;
        let mesh = triangulate(&field, 1.0).map_err(|e| e.to_string())?;
        let v_max = field.max_value();
        let bands = 2 + (seed % 7) as u32;
        let params = BandParams::new(bands, v_max).map_err(|e| e.to_string())?;
        let h = decompose(&mesh, &params, 1.0).map_err(|e| e.to_string())?;
        let c = params.band_height();
        for i in 0..h.vertex_count() {
            let (k, r, v) = (h.vertex_bands()[i], h.vertex_residuals()[i], h.vertex_values()[i]);
            ensure!((k as f64 * c + r - v).abs() <= 1e-9 * v_max, "seed {seed}: vertex {i} reconstruction");
            ensure!((0.0..=c).contains(&r), "seed {seed}: residual {r} outside [0, {c}]");
        }
        for (ti, t) in h.triangles().iter().enumerate() {
            let k = h.vertex_bands()[t[0] as usize];
            ensure!(t.iter().all(|&i| h.vertex_bands()[i as usize] == k), "seed {seed}: triangle {ti} mixes bands");
        }
        let (a, b) = (projected_area(&h), projected_area(&mesh));
        ensure!((a - b).abs() <= 1e-6 * b, "seed {seed}: area {a} vs {b}");
        triangles += h.triangle_count();

        let one = decompose(&mesh, &BandParams::new(1, v_max).unwrap(), 1.0).map_err(|e| e.to_string())?;
        ensure!(one.triangle_count() == mesh.triangle_count(), "seed {seed}: B=1 changed triangle count");
        for (ot, mt) in one.triangles().iter().zip(mesh.triangles()) {
            for j in 0..3 {
                ensure!(
                    one.positions()[ot[j] as usize] == mesh.positions()[mt[j] as usize],
                    "seed {seed}: B=1 moved a vertex"
                );
            }
        }
    }
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!("100 fields, {triangles} band triangles in {took:.2?}"))
}

fn area(ts: &[ClipTriangle]) -> f64 {
    ts.iter().map(clip_triangle_area).sum()
}

fn clip_oracle() -> Outcome {
    let tri = [ClipVertex::new(0.0, 0.0, 0.0), ClipVertex::new(1.0, 0.0, 0.0), ClipVertex::new(0.0, 1.0, 3.0)];
    let (below, above) = clip_triangle_at_level(&tri, 2.0);
    ensure!((area(&above) - 1.0 / 18.0).abs() <= 1e-12, "above area {}", area(&above));
    ensure!((area(&below) - 4.0 / 9.0).abs() <= 1e-12, "below area {}", area(&below));

    // jittered-stratified samples over the unit square folded onto the triangle
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let side = 317usize;
    let mut hits = 0usize;
    for i in 0..side {
        for j in 0..side {
            let mut u = (i as f64 + rng.random::<f64>()) / side as f64;
            let mut v = (j as f64 + rng.random::<f64>()) / side as f64;
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            if (1.0 - u - v) * 0.0 + u * 0.0 + v * 3.0 > 2.0 {
                hits += 1;
            }
        }
    }
    let mc = 0.5 * hits as f64 / (side * side) as f64;
    let rel = (mc - area(&above)).abs() / area(&above);
    ensure!(rel <= 0.01, "Monte Carlo {mc} off by {:.3}%", rel * 100.0);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut vx = || ClipVertex::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..10.0));
        let t = [vx(), vx(), vx()];
        let level = rng.random_range(0.0..10.0);
        let (lo, hi) = clip_triangle_at_level(&t, level);
        let whole = clip_triangle_area(&t);
        let err = (area(&lo) + area(&hi) - whole).abs();
        ensure!(err <= 1e-9 * whole.max(1.0), "area not conserved: error {err}");
        worst = worst.max(err);
    }
    Ok(format!("MC {:.3}% off, {} samples; worst conservation error {worst:.1e}", rel * 100.0, side * side))
}

fn study_dataset() -> Dataset {
    let fields = (1..=4)
        .map(|s| synthesize_field(s, 32, 32, 5, 100.0 - s as f64).unwrap().with_label(format!("{}", 2008 + 2 * s)))
        .collect();
    validate_dataset(fields).unwrap()
}

fn study_plans(d: &Dataset) -> Outcome {
    let started = Instant::now();
    for seed in 0..1000u64 {
        let plan = build_study_plan(d, "p01", seed).map_err(|e| e.to_string())?;
        ensure!(plan.trials.len() == 36, "seed {seed}: {} trials", plan.trials.len());
        let counts = plan.condition_counts();
        ensure!(counts.len() == 18 && counts.values().all(|&c| c == 2), "seed {seed}: condition counts {counts:?}");
        ensure!(plan.block_order().len() == 3, "seed {seed}: technique blocks not contiguous");
        for block in plan.trials.chunks(12) {
            let first_disc = block.iter().position(|t| t.task == Task::Discrimination).unwrap_or(12);
            ensure!(
                block[first_disc..].iter().all(|t| t.task == Task::Discrimination),
                "seed {seed}: Maximum after Discrimination"
            );
        }
    }
    let took = within(Duration::from_secs(10), started)?;
    let total: usize = (1..=10)
        .map(|i| build_study_plan(d, &format!("p{i:02}"), 42).map(|p| p.trials.len()))
        .sum::<Result<usize, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(total == 360, "10 participants gave {total} trials");
    Ok(format!("1000 plans in {took:.2?}; 10 participants = {total} trials"))
}

fn scan_argmax(trial: &Trial, d: &Dataset) -> String {
    let cols = d.grid().n_cols();
    let mut best = (f64::NEG_INFINITY, String::new());
    for p in &trial.probes {
        let v = d.field(&p.year_label).unwrap().values()[p.row * cols + p.col];
        if v > best.0 {
            best = (v, p.year_label.clone());
        }
    }
    best.1
}

fn oracle_equivalence(d: &Dataset) -> Outcome {
    let scaled = validate_dataset(d.fields().iter().map(|f| f.scaled(12.5).unwrap()).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..10_000 {
        let technique = Technique::ALL[rng.random_range(0..3)];
        let n = rng.random_range(2..=4u32);
        let task = Task::ALL[rng.random_range(0..2)];
        let t = generate_trial(d, technique, n, task, rng.random()).map_err(|e| e.to_string())?;
        let scan = scan_argmax(&t, d);
        ensure!(t.correct_year == scan, "trial {i}: {} vs scan {scan}", t.correct_year);
        let rescaled = ground_truth(&t, &scaled).map_err(|e| e.to_string())?;
        ensure!(rescaled == scan, "trial {i}: rescaling changed the answer");
    }
    Ok("10000 trials agree with the linear scan, rescaling invariant".into())
}

fn fixture_trial(id: &str, technique: Technique, n: u32, task: Task) -> Trial {
    let years: Vec<String> = (0..n).map(|i| format!("{}", 2010 + 2 * i)).collect();
    Trial {
        trial_id: id.into(),
        technique,
        n_years: n,
        task,
        probes: years.iter().map(|y| Probe { year_label: y.clone(), row: 0, col: 0 }).collect(),
        correct_year: years[0].clone(),
        options: years.clone(),
        years,
        rng_seed: 0,
    }
}

/// Engineered log: for each `(technique, N, task, correct, total)` entry,
/// `total` trials of which the first `correct` are answered correctly.
fn engineered(cells: &[(Technique, u32, Task, usize, usize)]) -> (PlanStore, Vec<TrialResponse>) {
    let mut trials = Vec::new();
    let mut responses = Vec::new();
    for &(technique, n, task, correct, total) in cells {
        for i in 0..total {
            let t = fixture_trial(&format!("{technique}-{n}-{task}-{i}"), technique, n, task);
            responses.push(TrialResponse {
                trial_id: t.trial_id.clone(),
                participant_id: "fx".into(),
                chosen_year: if i < correct { t.correct_year.clone() } else { t.options[1].clone() },
                elapsed_ms: 1500,
                confirmed: true,
                client_timestamp: "2026-10-18T12:00:00Z".into(),
            });
            trials.push(t);
        }
    }
    let plans = PlanStore::from_plans([StudyPlan { participant_id: "fx".into(), seed: 0, trials }]).unwrap();
    (plans, responses)
}

fn analytics_fixtures() -> Outcome {
    use Task::{Discrimination as T2, Maximum as T1};
    use Technique::{Horizon, SharedSurface, SmallMultiple};
    let err = |e: surfgraph::responses::StudyError| e.to_string();

    let (plans, mut log) = engineered(&[
        (SharedSurface, 2, T1, 10, 10),
        (SharedSurface, 2, T2, 8, 10),
        (Horizon, 4, T1, 11, 25),
        (Horizon, 4, T2, 10, 25),
        (SmallMultiple, 2, T1, 9, 10),
        (SmallMultiple, 2, T2, 8, 10),
        (SmallMultiple, 4, T1, 20, 20),
        (SmallMultiple, 4, T2, 13, 20),
    ]);
    let s = summarize(&log, &plans).map_err(err)?;
    let shared = s.cell(SharedSurface, 2).ok_or("missing shared N=2")?.accuracy_pct;
    let horizon = s.cell(Horizon, 4).ok_or("missing horizon N=4")?.accuracy_pct;
    ensure!(shared == 90.0, "shared N=2 accuracy {shared}");
    ensure!(horizon == 42.0, "horizon N=4 accuracy {horizon}");
    let gaps = accuracy_gap(&log, &plans).map_err(err)?;
    let gap = |t, n| gaps.iter().find(|g| g.technique == t && g.n_years == n).map(|g| g.gap_pct);
    ensure!(gap(SmallMultiple, 2) == Some(10.0), "gap N=2 {:?}", gap(SmallMultiple, 2));
    ensure!(gap(SmallMultiple, 4) == Some(35.0), "gap N=4 {:?}", gap(SmallMultiple, 4));

    // brute-force recount by scanning the log
    for cell in &s.accuracy {
        let (mut c, mut n) = (0u64, 0u64);
        for r in &log {
            let (_, t) = plans.trial(&r.trial_id).unwrap();
            if t.technique == cell.technique && t.n_years == cell.n_years {
                n += 1;
                c += (r.chosen_year == t.correct_year) as u64;
            }
        }
        ensure!(cell.correct == c && cell.total == n, "{} N={} recount mismatch", cell.technique, cell.n_years);
        ensure!(cell.accuracy_pct == 100.0 * c as f64 / n as f64, "{} N={} accuracy", cell.technique, cell.n_years);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        for i in (1..log.len()).rev() {
            log.swap(i, rng.random_range(0..=i));
        }
        ensure!(summarize(&log, &plans).map_err(err)? == s, "summary depends on log order");
    }
    Ok("90.0, 42.0, gaps 10.0 and 35.0; permutation invariant; recount matches".into())
}

fn run_cli(data: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_surfgraph"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "surfgraph {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn export_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    run_cli(&data, &["demo-data", "--years", "4", "--rows", "40", "--cols", "40", "--seed", "3"])?;
    let mut files = 0;
    for technique in Technique::ALL {
        let (a, b) = (tmp.path().join(format!("{technique}-a")), tmp.path().join(format!("{technique}-b")));
        for out in [&a, &b] {
            let args = ["build-scene", "--technique", technique.as_str(), "--years", "4", "--S", "900", "--h", "50", "--B", "4", "--out"];
            let mut args: Vec<&str> = args.to_vec();
            args.push(out.to_str().unwrap());
            run_cli(&data, &args)?;
        }
        let (manifest, meshes) = read_scene(&a).map_err(|e| e.to_string())?;
        let mut names: Vec<String> = manifest.slots.iter().map(|s| s.mesh.clone()).collect();
        names.push(MANIFEST_FILE.into());
        for name in &names {
            let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
            ensure!(x == y, "{technique}: {name} differs between runs");
            files += 1;
        }
        let mut bounds = Bounds::empty();
        for (slot, mesh) in manifest.slots.iter().zip(&meshes) {
            ensure!(mesh.positions.len() == slot.vertex_count, "{technique}: vertex count");
            ensure!(mesh.indices.len() == 3 * slot.triangle_count, "{technique}: triangle count");
            for p in &mesh.positions {
                let t = slot.translation;
                bounds.include([p[0] as f64 + t[0], p[1] as f64 + t[1], p[2] as f64 + t[2]]);
            }
        }
        ensure!(bounds == manifest.bounds, "{technique}: bounds do not round-trip");
    }
    Ok(format!("{files} files byte-identical across runs; counts and bounds round-trip"))
}

fn main() {
    let d = study_dataset();
    let checks: Vec<Check> = vec![
        ("space budgets", Box::new(table_budgets)),
        ("horizon decomposition", Box::new(horizon_decomposition)),
        ("clip oracle", Box::new(clip_oracle)),
        ("study plan", Box::new(|| study_plans(&d))),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&d))),
        ("analytics fixtures", Box::new(analytics_fixtures)),
        ("export determinism", Box::new(export_determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
