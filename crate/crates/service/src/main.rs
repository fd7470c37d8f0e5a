use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use surfgraph::layout::{LayoutParams, Technique, DEFAULT_BANDS};
use surfgraph::protocol::build_study_plan;
use surfgraph::responses::PlanStore;
use surfgraph_service::data::{build_scene, demo_dataset, DemoOptions};
use surfgraph_service::{report, router, AppState, DataDir, SceneDefaults};

#[derive(Parser)]
#[command(name = "surfgraph", version, about = "Surface-graph scenes and perception study service")]
struct Cli {
    /// Study data directory.
    #[arg(long, global = true, env = "STUDY_DATA_DIR", default_value = "study-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset manifest and copy it into the data directory.
    Ingest {
        /// JSON manifest listing `{year_label, path}` entries.
        manifest: PathBuf,
    },
    /// Synthesize a multi-year dataset into the data directory.
    DemoData {
        #[arg(long, default_value_t = 4)]
        years: usize,
        #[arg(long, default_value_t = 48)]
        rows: usize,
        #[arg(long, default_value_t = 48)]
        cols: usize,
        #[arg(long, default_value_t = 6)]
        bumps: usize,
        #[arg(long, default_value_t = 100.0)]
        max_height: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Lay out the first N years and export scene.json plus .glb meshes.
    BuildScene {
        #[arg(long)]
        technique: Technique,
        #[arg(long)]
        years: u32,
        /// Vertical space budget S.
        #[arg(long = "S", default_value_t = 48.0)]
        space: f64,
        /// Minimum height h (defaults to 5% of S).
        #[arg(long = "h")]
        min_height: Option<f64>,
        /// Horizon band count B.
        #[arg(long = "B", default_value_t = DEFAULT_BANDS)]
        bands: u32,
        /// Dataset manifest (defaults to the one in the data directory).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate and store a participant's 36-trial plan.
    Plan {
        #[arg(long)]
        participant: String,
        #[arg(long)]
        seed: u64,
    },
    /// Serve the study API, scenes and runner.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long = "S", default_value_t = 48.0)]
        space: f64,
        #[arg(long = "h")]
        min_height: Option<f64>,
        #[arg(long = "B", default_value_t = DEFAULT_BANDS)]
        bands: u32,
    },
    /// Summarize a response log into summary.json and CSV tables.
    Analyze {
        /// Log file (defaults to the data directory's log).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Plans directory (defaults to the data directory's plans).
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let data = DataDir::new(&cli.data_dir);
    match cli.command {
        Command::Ingest { manifest } => {
            let d = data.ingest(&manifest)?;
            println!(
                "ingested {} years ({}) into {}",
                d.len(),
                d.year_labels().join(", "),
                data.dataset_dir().display()
            );
        }
        Command::DemoData { years, rows, cols, bumps, max_height, seed } => {
            let opts = DemoOptions { years, rows, cols, bumps, max_height, seed, ..DemoOptions::default() };
            let d = demo_dataset(&opts)?;
            surfgraph::raster::write_dataset(&d, &data.dataset_dir())?;
            println!("wrote {} years ({}) to {}", d.len(), d.year_labels().join(", "), data.dataset_dir().display());
        }
        Command::BuildScene { technique, years, space, min_height, bands, dataset, out } => {
            let d = match dataset {
                Some(p) => surfgraph::raster::load_manifest(&p).with_context(|| format!("loading {}", p.display()))?,
                None => data.load_dataset()?,
            };
            let mut params = LayoutParams::new(technique, space, years).with_bands(bands);
            if let Some(h) = min_height {
                params = params.with_min_height(h);
            }
            let m = build_scene(&d, &params, &out)?;
            let tris: usize = m.slots.iter().map(|s| s.triangle_count).sum();
            println!("{} scene with {} slots, {tris} triangles in {}", m.technique, m.slots.len(), out.display());
        }
        Command::Plan { participant, seed } => {
            let d = data.load_dataset()?;
            let plan = build_study_plan(&d, &participant, seed)?;
            let path = data.save_plan(&plan)?;
            let order: Vec<String> = plan.block_order().iter().map(|t| t.to_string()).collect();
            println!("{} trials for {participant} (blocks: {}) in {}", plan.trials.len(), order.join(", "), path.display());
        }
        Command::Serve { port, host, space, min_height, bands } => {
            let scene = SceneDefaults { space, min_height, bands };
            let state = Arc::new(AppState::load(data, scene)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("parsing listen address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                println!("serving {} plans on http://{}", state.plans().plans().count(), listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Analyze { log, plans, out } => {
            let log = log.unwrap_or_else(|| data.log_path());
            let plans_dir = plans.unwrap_or_else(|| data.plans_dir());
            let store = PlanStore::load_dir(&plans_dir)?;
            let (summary, files) = report::analyze(&log, &store, &out)?;
            if summary.empty {
                println!("log is empty; wrote empty summary");
            } else {
                println!("{} responses summarized", summary.responses);
            }
            for f in files {
                println!("  {}", f.display());
            }
        }
    }
    Ok(())
}
