//! Surface graphs for spatial-temporal height fields.
//!
//! `surfgraph` turns per-year gridded thickness data into three kinds of 3D
//! scenes and runs a small perception study over them:
//!
//! * [`raster`]: ESRI ASCII grid ingest, multi-year datasets, synthetic terrain.
//! * [`surface`]: height-field triangulation and color ramps.
//! * [`horizon`]: iso-level triangle clipping and 3D horizon band decomposition.
//! * [`layout`]: per-year space budgets and scene assembly (shared space,
//!   small multiples, horizon).
//! * [`export`]: `scene.json` manifests and binary glTF meshes.
//! * [`protocol`]: trial generation with a ground-truth oracle and study plans.
//! * [`responses`] / [`analytics`]: the response log and accuracy/time summaries.
//!
//! ```
//! use surfgraph::raster::{synthesize_field, validate_dataset};
//! use surfgraph::layout::{assemble_scene, LayoutParams, SceneStyle, Technique};
//!
//! let years = (0..3)
//!     .map(|i| synthesize_field(i, 16, 16, 3, 80.0).unwrap().with_label(format!("{}", 2010 + 2 * i)))
//!     .collect();
//! let dataset = validate_dataset(years).unwrap();
//! let params = LayoutParams::new(Technique::Horizon, 120.0, 3);
//! let scene = assemble_scene(&dataset, &params, &SceneStyle::default()).unwrap();
//! assert_eq!(scene.slots.len(), 3);
//! ```

pub mod analytics;
pub mod export;
pub mod horizon;
pub mod layout;
pub mod protocol;
pub mod raster;
pub mod responses;
pub mod surface;

pub use horizon::{band_value, clip_triangle_at_level, decompose, BandParams, HorizonMesh};
pub use layout::{assemble_scene, slot_extent, LayoutParams, Scene, Technique};
pub use protocol::{build_study_plan, generate_trial, ground_truth, StudyPlan, Task, Trial};
pub use raster::{parse_ascii_grid, synthesize_field, validate_dataset, Dataset, HeightField};
pub use surface::{projected_area, triangulate, SurfaceMesh};
