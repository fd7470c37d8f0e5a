//! Space budgets and scene assembly for the three display techniques.
//!
//! Per-year vertical budgets, with `S` the available space, `N` the number
//! of years, `B` the band count and `h` the minimum viewing height:
//!
//! | technique        | space per year      |
//! |------------------|---------------------|
//! | shared surface   | `S + h`             |
//! | small multiple   | `S/N + h`           |
//! | horizon          | `S/(N·2·B) + h`     |
//!
//! Split techniques stack one slot per year, oldest at the bottom, with a
//! configurable gap between slots. The height field itself is scaled so its
//! global maximum fills the non-`h` part of a slot.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::horizon::{decompose, BandParams, HorizonError, HorizonMesh};
use crate::raster::Dataset;
use crate::surface::{triangulate, year_color, ColorRamp, GeometryError, Rgb, SurfaceMesh, TriangleMesh, ValueRamp};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid layout parameters: {0}")]
    InvalidParams(String),
    #[error("dataset has {found} years but the layout expects {expected}")]
    YearCountMismatch { expected: usize, found: usize },
    #[error("degenerate data: global maximum is {0}")]
    DegenerateData(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    SharedSurface,
    SmallMultiple,
    Horizon,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::SharedSurface, Technique::SmallMultiple, Technique::Horizon];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::SharedSurface => "shared_surface",
            Technique::SmallMultiple => "small_multiple",
            Technique::Horizon => "horizon",
        }
    }

    pub fn is_split(self) -> bool {
        self != Technique::SharedSurface
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "shared_surface" | "shared" | "surface" => Ok(Technique::SharedSurface),
            "small_multiple" | "small_multiples" => Ok(Technique::SmallMultiple),
            "horizon" => Ok(Technique::Horizon),
            other => Err(format!("unknown technique {other:?}")),
        }
    }
}

/// Default band count.
pub const DEFAULT_BANDS: u32 = 4;

/// Layout inputs. `space` is `S`, `min_height` is `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub technique: Technique,
    pub space: f64,
    pub min_height: f64,
    pub years: u32,
    pub bands: u32,
    /// Vertical gap between stacked slots.
    pub gap: f64,
}

impl LayoutParams {
    /// Parameters with `h = 5% of S`, a gap of 2% of S and four bands.
    pub fn new(technique: Technique, space: f64, years: u32) -> Self {
        Self {
            technique,
            space,
            min_height: 0.05 * space,
            years,
            bands: DEFAULT_BANDS,
            gap: 0.02 * space,
        }
    }

    pub fn with_min_height(mut self, h: f64) -> Self {
        self.min_height = h;
        self
    }

    pub fn with_bands(mut self, bands: u32) -> Self {
        self.bands = bands;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |m: String| Err(LayoutError::InvalidParams(m));
        if !(self.space.is_finite() && self.space > 0.0) {
            return bad(format!("S must be positive, got {}", self.space));
        }
        if !(self.min_height.is_finite() && self.min_height >= 0.0) {
            return bad(format!("h must be nonnegative, got {}", self.min_height));
        }
        if self.years < 2 {
            return bad(format!("N must be at least 2, got {}", self.years));
        }
        if self.technique == Technique::Horizon && self.bands < 2 {
            return bad(format!("horizon layouts need B >= 2, got {}", self.bands));
        }
        if !(self.gap.is_finite() && self.gap >= 0.0) {
            return bad(format!("gap must be nonnegative, got {}", self.gap));
        }
        Ok(())
    }

    /// Divisor applied to `S` for this technique.
    fn space_divisor(&self) -> u64 {
        match self.technique {
            Technique::SharedSurface => 1,
            Technique::SmallMultiple => self.years as u64,
            Technique::Horizon => self.years as u64 * 2 * self.bands as u64,
        }
    }
}

/// Exact per-year vertical budget, computed on the exact binary values of
/// `S` and `h`.
pub fn slot_extent_exact(params: &LayoutParams) -> Result<BigRational, LayoutError> {
    params.validate()?;
    let s = BigRational::from_float(params.space).expect("validated finite");
    let h = BigRational::from_float(params.min_height).expect("validated finite");
    let divisor = BigRational::from_integer(BigInt::from(params.space_divisor()));
    Ok(s / divisor + h)
}

/// Per-year vertical budget, correctly rounded from [`slot_extent_exact`].
pub fn slot_extent(params: &LayoutParams) -> Result<f64, LayoutError> {
    let exact = slot_extent_exact(params)?;
    Ok(exact.to_f64().expect("finite budget"))
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn empty() -> Self {
        Bounds { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] }
    }

    pub fn include(&mut self, p: [f64; 3]) {
        for (i, &c) in p.iter().enumerate() {
            self.min[i] = self.min[i].min(c);
            self.max[i] = self.max[i].max(c);
        }
    }

    pub fn contains(&self, p: [f64; 3], eps: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - eps && p[i] <= self.max[i] + eps)
    }
}

/// Geometry drawn in one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotMesh {
    Surface(SurfaceMesh),
    Horizon(HorizonMesh),
}

impl SlotMesh {
    pub fn as_mesh(&self) -> &dyn TriangleMesh {
        match self {
            SlotMesh::Surface(m) => m,
            SlotMesh::Horizon(m) => m,
        }
    }
}

/// One study year placed in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub year_label: String,
    pub translation: [f64; 3],
    pub z_scale: f64,
    /// Vertical budget of the slot, `h` included.
    pub extent: f64,
    pub mesh: SlotMesh,
}

impl Slot {
    pub fn base_z(&self) -> f64 {
        self.translation[2]
    }
}

/// Legend describing how color maps to data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Legend {
    YearColors { entries: Vec<YearColor> },
    ValueScale { light: Rgb, dark: Rgb, v_min: f64, v_max: f64 },
    Bands { band_height: f64, bands: Vec<BandEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearColor {
    pub year_label: String,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub band: u32,
    pub lower: f64,
    pub upper: f64,
    pub color: Rgb,
}

/// Assembled scene ready for export.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub params: LayoutParams,
    pub slots: Vec<Slot>,
    pub legend: Legend,
    /// z of the planes separating stacked slots.
    pub separators: Vec<f64>,
    pub bounds: Bounds,
}

impl Scene {
    pub fn technique(&self) -> Technique {
        self.params.technique
    }
}

/// Colors used when assembling scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneStyle {
    pub year_palette: Vec<Rgb>,
    pub ramp_light: Rgb,
    pub ramp_dark: Rgb,
}

impl Default for SceneStyle {
    fn default() -> Self {
        Self {
            year_palette: (0..crate::surface::YEAR_PALETTE.len()).map(year_color).collect(),
            ramp_light: crate::surface::RAMP_LIGHT,
            ramp_dark: crate::surface::RAMP_DARK,
        }
    }
}

/// Builds the scene for `dataset` under `params`.
pub fn assemble_scene(dataset: &Dataset, params: &LayoutParams, style: &SceneStyle) -> Result<Scene, LayoutError> {
    params.validate()?;
    if dataset.len() != params.years as usize {
        return Err(LayoutError::YearCountMismatch { expected: params.years as usize, found: dataset.len() });
    }
    let v_max = dataset.global_max();
    if v_max.is_nan() || v_max <= 0.0 {
        return Err(LayoutError::DegenerateData(v_max));
    }
    let extent = slot_extent(params)?;
    let drawable = extent - params.min_height;

    let mut slots = Vec::with_capacity(dataset.len());
    let mut separators = Vec::new();
    let legend = match params.technique {
        Technique::SharedSurface => {
            let z_scale = params.space / v_max;
            let mut entries = Vec::new();
            for (i, field) in dataset.fields().iter().enumerate() {
                let color = style.year_palette[i % style.year_palette.len()];
                let mesh = triangulate(field, z_scale)?.painted(&ColorRamp::YearIdentity { color });
                entries.push(YearColor { year_label: field.year_label().to_string(), color });
                slots.push(Slot {
                    year_label: field.year_label().to_string(),
                    translation: [0.0; 3],
                    z_scale,
                    extent,
                    mesh: SlotMesh::Surface(mesh),
                });
            }
            Legend::YearColors { entries }
        }
        Technique::SmallMultiple => {
            let z_scale = drawable / v_max;
            let v_min = if dataset.global_min() < v_max { dataset.global_min() } else { 0.0 };
            let ramp = ValueRamp::with_colors(style.ramp_light, style.ramp_dark, v_min, v_max)?;
            for (i, field) in dataset.fields().iter().enumerate() {
                let mesh = triangulate(field, z_scale)?.painted(&ColorRamp::ValueScale(ramp));
                slots.push(stacked(field.year_label(), i, extent, params.gap, z_scale, SlotMesh::Surface(mesh)));
            }
            Legend::ValueScale { light: style.ramp_light, dark: style.ramp_dark, v_min, v_max }
        }
        Technique::Horizon => {
            let bands = BandParams::new(params.bands, v_max)?;
            let z_scale = drawable / bands.band_height();
            let colors = crate::surface::discrete_ramp_between(style.ramp_light, style.ramp_dark, params.bands as usize);
            for (i, field) in dataset.fields().iter().enumerate() {
                let surface = triangulate(field, z_scale)?;
                let mut mesh = decompose(&surface, &bands, z_scale)?;
                mesh.paint_bands(&colors);
                slots.push(stacked(field.year_label(), i, extent, params.gap, z_scale, SlotMesh::Horizon(mesh)));
            }
            let c = bands.band_height();
            Legend::Bands {
                band_height: c,
                bands: colors
                    .iter()
                    .enumerate()
                    .map(|(k, &color)| BandEntry {
                        band: k as u32,
                        lower: bands.level(k as u32),
                        upper: if k as u32 + 1 == params.bands { v_max } else { bands.level(k as u32 + 1) },
                        color,
                    })
                    .collect(),
            }
        }
    };
    if params.technique.is_split() {
        for w in slots.windows(2) {
            let top = w[0].base_z() + w[0].extent;
            separators.push(top + 0.5 * (w[1].base_z() - top));
        }
    }

    let mut bounds = Bounds::empty();
    for slot in &slots {
        for p in slot.mesh.as_mesh().positions() {
            bounds.include(translate(*p, slot.translation));
        }
    }
    Ok(Scene { params: *params, slots, legend, separators, bounds })
}

fn stacked(label: &str, index: usize, extent: f64, gap: f64, z_scale: f64, mesh: SlotMesh) -> Slot {
    Slot {
        year_label: label.to_string(),
        translation: [0.0, 0.0, index as f64 * (extent + gap)],
        z_scale,
        extent,
        mesh,
    }
}

pub(crate) fn translate(p: [f64; 3], t: [f64; 3]) -> [f64; 3] {
    [p[0] + t[0], p[1] + t[1], p[2] + t[2]]
}
