//! Study service for `surfgraph`: the HTTP API the browser runner talks to,
//! plus the file-level operations behind the `surfgraph` command line tool.
//!
//! Everything lives under one data directory:
//!
//! ```text
//! <data-dir>/
//!   dataset/manifest.json   year grids (ESRI ASCII) and their manifest
//!   plans/<participant>.json
//!   scenes/<technique>-n<N>/scene.json + *.glb
//!   responses.jsonl         append-only response log
//!   runner/                 static files for the browser runner (optional)
//! ```

pub mod data;
pub mod report;
pub mod server;

pub use data::DataDir;
pub use server::{router, AppState, SceneDefaults};
