use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use surfgraph::export::{export_scene, SceneManifest};
use surfgraph::layout::{assemble_scene, LayoutParams, SceneStyle, Technique};
use surfgraph::protocol::StudyPlan;
use surfgraph::raster::{load_manifest, synthesize_field, validate_dataset, write_dataset, Dataset};

/// Paths inside a study data directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn dataset_manifest(&self) -> PathBuf {
        self.dataset_dir().join("manifest.json")
    }

    pub fn plans_dir(&self) -> PathBuf {
        self.root.join("plans")
    }

    pub fn plan_path(&self, participant_id: &str) -> PathBuf {
        self.plans_dir().join(format!("{participant_id}.json"))
    }

    pub fn scenes_dir(&self) -> PathBuf {
        self.root.join("scenes")
    }

    pub fn scene_dir(&self, technique: Technique, n_years: u32) -> PathBuf {
        self.scenes_dir().join(scene_key(technique, n_years))
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join("responses.jsonl")
    }

    pub fn runner_dir(&self) -> PathBuf {
        self.root.join("runner")
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self.dataset_manifest();
        load_manifest(&path).with_context(|| format!("loading dataset from {}", path.display()))
    }

    /// Validates the manifest at `source` and copies the grids into the data directory.
    pub fn ingest(&self, source: &Path) -> Result<Dataset> {
        let dataset = load_manifest(source).with_context(|| format!("ingesting {}", source.display()))?;
        write_dataset(&dataset, &self.dataset_dir())?;
        Ok(dataset)
    }

    pub fn save_plan(&self, plan: &StudyPlan) -> Result<PathBuf> {
        let path = self.plan_path(&plan.participant_id);
        if path.exists() {
            bail!("a plan for {:?} already exists at {}", plan.participant_id, path.display());
        }
        fs::create_dir_all(self.plans_dir())?;
        fs::write(&path, serde_json::to_vec_pretty(plan)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Directory name used for cached scenes.
pub fn scene_key(technique: Technique, n_years: u32) -> String {
    format!("{technique}-n{n_years}")
}

/// Options for a synthetic multi-year dataset.
#[derive(Debug, Clone, Copy)]
pub struct DemoOptions {
    pub years: usize,
    pub rows: usize,
    pub cols: usize,
    pub bumps: usize,
    pub max_height: f64,
    pub seed: u64,
    pub first_year: u32,
    pub year_step: u32,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self { years: 4, rows: 48, cols: 48, bumps: 6, max_height: 100.0, seed: 1, first_year: 2010, year_step: 2 }
    }
}

/// Synthesizes a dataset. Each year gets its own derived seed and a slightly
/// different peak height so the years do not tie.
pub fn demo_dataset(opts: &DemoOptions) -> Result<Dataset> {
    if opts.years < 2 {
        bail!("a study needs at least 2 years, got {}", opts.years);
    }
    let fields = (0..opts.years)
        .map(|i| {
            let seed = opts.seed.wrapping_mul(1000).wrapping_add(i as u64);
            let peak = opts.max_height * (1.0 - 0.04 * i as f64);
            let label = (opts.first_year + opts.year_step * i as u32).to_string();
            Ok(synthesize_field(seed, opts.rows, opts.cols, opts.bumps, peak)?.with_label(label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(validate_dataset(fields)?)
}

/// Lays out the first `params.years` years of `dataset` and writes the scene to `out`.
pub fn build_scene(dataset: &Dataset, params: &LayoutParams, out: &Path) -> Result<SceneManifest> {
    let subset = dataset.first_years(params.years as usize)?;
    let scene = assemble_scene(&subset, params, &SceneStyle::default())?;
    Ok(export_scene(&scene, out)?)
}
