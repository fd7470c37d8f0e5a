//! Height-field triangulation and value-driven coloring.

use serde::{Deserialize, Serialize};

use crate::raster::HeightField;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("z scale must be positive and finite, got {0}")]
    InvalidZScale(f64),
    #[error("empty mesh: field {0:?} has no cell with four valid corners")]
    EmptyMesh(String),
    #[error("value ramp needs v_max > v_min, got [{v_min}, {v_max}]")]
    InvalidRamp { v_min: f64, v_max: f64 },
}

/// Linear RGB color with channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb(pub [f32; 3]);

impl Rgb {
    pub const fn new(r: f32, g: f32, b: f32) -> Self {
        Rgb([r, g, b])
    }

    /// Rec. 709 relative luminance.
    pub fn luminance(self) -> f64 {
        let [r, g, b] = self.0;
        0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
    }

    fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let mix = |a: f32, b: f32| (a as f64 + (b as f64 - a as f64) * t) as f32;
        Rgb([
            mix(self.0[0], other.0[0]),
            mix(self.0[1], other.0[1]),
            mix(self.0[2], other.0[2]),
        ])
    }
}

/// Year identity palette. The first four entries are blue, orange, green and
/// purple; later entries only matter for datasets with more than four years.
pub const YEAR_PALETTE: [Rgb; 8] = [
    Rgb::new(0.122, 0.467, 0.706),
    Rgb::new(1.000, 0.498, 0.055),
    Rgb::new(0.173, 0.627, 0.173),
    Rgb::new(0.580, 0.404, 0.741),
    Rgb::new(0.839, 0.153, 0.157),
    Rgb::new(0.549, 0.337, 0.294),
    Rgb::new(0.890, 0.467, 0.761),
    Rgb::new(0.498, 0.498, 0.498),
];

pub fn year_color(index: usize) -> Rgb {
    YEAR_PALETTE[index % YEAR_PALETTE.len()]
}

/// Lightest and darkest ends of the single-hue value ramp.
pub const RAMP_LIGHT: Rgb = Rgb::new(0.871, 0.922, 0.969);
pub const RAMP_DARK: Rgb = Rgb::new(0.031, 0.188, 0.420);

/// Single-hue ramp where darker means higher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRamp {
    light: Rgb,
    dark: Rgb,
    v_min: f64,
    v_max: f64,
}

impl ValueRamp {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self, GeometryError> {
        Self::with_colors(RAMP_LIGHT, RAMP_DARK, v_min, v_max)
    }

    pub fn with_colors(light: Rgb, dark: Rgb, v_min: f64, v_max: f64) -> Result<Self, GeometryError> {
        if !(v_min.is_finite() && v_max.is_finite() && v_max > v_min) {
            return Err(GeometryError::InvalidRamp { v_min, v_max });
        }
        Ok(Self { light, dark, v_min, v_max })
    }

    pub fn light(&self) -> Rgb {
        self.light
    }

    pub fn dark(&self) -> Rgb {
        self.dark
    }

    pub fn range(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }
}

/// How a surface is painted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ColorRamp {
    /// One flat color per study year.
    YearIdentity { color: Rgb },
    /// Color encodes value, darker is higher.
    ValueScale(ValueRamp),
}

impl ColorRamp {
    pub fn color(&self, v: f64) -> Rgb {
        match self {
            ColorRamp::YearIdentity { color } => *color,
            ColorRamp::ValueScale(ramp) => color_for_value(v, ramp),
        }
    }
}

/// Maps a value onto the ramp, clamping out-of-range input. Luminance is
/// nonincreasing in `v`.
pub fn color_for_value(v: f64, ramp: &ValueRamp) -> Rgb {
    let t = ((v - ramp.v_min) / (ramp.v_max - ramp.v_min)).clamp(0.0, 1.0);
    let t = if t.is_nan() { 0.0 } else { t };
    ramp.light.lerp(ramp.dark, t)
}

/// `steps` discrete shades of the default ramp hue, lightest first.
pub fn discrete_ramp(steps: usize) -> Vec<Rgb> {
    discrete_ramp_between(RAMP_LIGHT, RAMP_DARK, steps)
}

pub fn discrete_ramp_between(light: Rgb, dark: Rgb, steps: usize) -> Vec<Rgb> {
    match steps {
        0 => Vec::new(),
        1 => vec![dark],
        n => (0..n).map(|k| light.lerp(dark, k as f64 / (n - 1) as f64)).collect(),
    }
}

/// Read access shared by plain and horizon meshes.
pub trait TriangleMesh {
    fn positions(&self) -> &[[f64; 3]];
    fn triangles(&self) -> &[[u32; 3]];
    fn colors(&self) -> &[Rgb];
}

/// Triangulated height field.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub(crate) vertices: Vec<[f64; 3]>,
    pub(crate) triangles: Vec<[u32; 3]>,
    pub(crate) vertex_value: Vec<f64>,
    pub(crate) vertex_color: Vec<Rgb>,
    pub(crate) z_scale: f64,
}

impl SurfaceMesh {
    /// Builds a mesh from raw parts. Triangles are expected in range and
    /// counter-clockwise in XY.
    pub fn from_parts(
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
        vertex_value: Vec<f64>,
        z_scale: f64,
    ) -> Self {
        let vertex_color = vec![Rgb::new(0.7, 0.7, 0.7); vertices.len()];
        Self { vertices, triangles, vertex_value, vertex_color, z_scale }
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.vertex_value
    }

    pub fn z_scale(&self) -> f64 {
        self.z_scale
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Repaints every vertex from its value.
    pub fn paint(&mut self, ramp: &ColorRamp) {
        self.vertex_color = self.vertex_value.iter().map(|&v| ramp.color(v)).collect();
    }

    pub fn painted(mut self, ramp: &ColorRamp) -> Self {
        self.paint(ramp);
        self
    }

    /// Same surface with heights recomputed for a new z scale.
    pub fn rescaled(&self, z_scale: f64) -> Self {
        let mut out = self.clone();
        for (p, v) in out.vertices.iter_mut().zip(&self.vertex_value) {
            p[2] = v * z_scale;
        }
        out.z_scale = z_scale;
        out
    }
}

impl TriangleMesh for SurfaceMesh {
    fn positions(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    fn colors(&self) -> &[Rgb] {
        &self.vertex_color
    }
}

/// Triangulates every cell whose four corners are valid, splitting each
/// along the same diagonal. Vertices are the valid grid points in row-major
/// order; `z = value * z_scale`.
pub fn triangulate(field: &HeightField, z_scale: f64) -> Result<SurfaceMesh, GeometryError> {
    if !(z_scale.is_finite() && z_scale > 0.0) {
        return Err(GeometryError::InvalidZScale(z_scale));
    }
    let (rows, cols) = (field.n_rows(), field.n_cols());
    let mut index = vec![u32::MAX; rows * cols];
    let mut vertices = Vec::new();
    let mut vertex_value = Vec::new();
    for (row, col, v) in field.valid_cells() {
        index[row * cols + col] = vertices.len() as u32;
        let (x, y) = field.position(row, col);
        vertices.push([x, y, v * z_scale]);
        vertex_value.push(v);
    }

    let mut triangles = Vec::new();
    for row in 0..rows.saturating_sub(1) {
        for col in 0..cols.saturating_sub(1) {
            // nw -- ne
            //  |  / |
            // sw -- se   (row + 1 is south)
            let nw = index[row * cols + col];
            let ne = index[row * cols + col + 1];
            let sw = index[(row + 1) * cols + col];
            let se = index[(row + 1) * cols + col + 1];
            if [nw, ne, sw, se].contains(&u32::MAX) {
                continue;
            }
            triangles.push([sw, ne, nw]);
            triangles.push([sw, se, ne]);
        }
    }
    if triangles.is_empty() {
        return Err(GeometryError::EmptyMesh(field.year_label().to_string()));
    }
    Ok(SurfaceMesh::from_parts(vertices, triangles, vertex_value, z_scale))
}

/// Signed XY area of a triangle, positive when counter-clockwise.
pub fn signed_area_xy(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Sum of absolute XY-projected triangle areas.
pub fn projected_area<M: TriangleMesh + ?Sized>(mesh: &M) -> f64 {
    let p = mesh.positions();
    mesh.triangles()
        .iter()
        .map(|t| signed_area_xy(p[t[0] as usize], p[t[1] as usize], p[t[2] as usize]).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, v: f64) -> HeightField {
        HeightField::from_values("flat", n, n, 1.0, vec![v; n * n]).unwrap()
    }

    #[test]
    fn single_cell() {
        let f = HeightField::from_values("a", 2, 2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = triangulate(&f, 2.0).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        for (p, v) in m.positions().iter().zip(m.vertex_values()) {
            assert_eq!(p[2], v * 2.0);
        }
    }

    #[test]
    fn triangles_are_ccw() {
        let f = flat(4, 1.0);
        let m = triangulate(&f, 1.0).unwrap();
        let p = m.positions();
        for t in m.triangles() {
            let a = signed_area_xy(p[t[0] as usize], p[t[1] as usize], p[t[2] as usize]);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn nodata_corner_gives_empty_mesh() {
        let f = HeightField::new("a", 2, 2, (0.0, 0.0), 1.0, vec![1.0; 4], vec![false, false, true, false])
            .unwrap();
        assert_eq!(triangulate(&f, 1.0).unwrap_err(), GeometryError::EmptyMesh("a".into()));
    }

    #[test]
    fn counts_with_nodata() {
        // centre cell of a 3x3 is nodata: every cell touches it
        let mut mask = vec![false; 9];
        mask[4] = true;
        let f = HeightField::new("a", 3, 3, (0.0, 0.0), 1.0, vec![1.0; 9], mask).unwrap();
        assert!(triangulate(&f, 1.0).is_err());

        let mut mask = vec![false; 16];
        mask[0] = true;
        let f = HeightField::new("b", 4, 4, (0.0, 0.0), 1.0, vec![1.0; 16], mask).unwrap();
        let m = triangulate(&f, 1.0).unwrap();
        assert_eq!(m.vertex_count(), 15);
        assert_eq!(m.triangle_count(), 2 * 8);
    }

    #[test]
    fn flat_zero_area() {
        let f = HeightField::from_values("z", 3, 3, 0.5, vec![0.0; 9]).unwrap();
        let m = triangulate(&f, 1.0).unwrap();
        assert!(m.positions().iter().all(|p| p[2] == 0.0));
        assert!((projected_area(&m) - 4.0 * 0.25).abs() < 1e-15);
        assert_eq!(projected_area(&triangulate(&flat(3, 0.0), 1.0).unwrap()), 4.0);
    }

    #[test]
    fn right_triangle_area() {
        let m = SurfaceMesh::from_parts(
            vec![[0.0, 0.0, 5.0], [1.0, 0.0, -2.0], [0.0, 1.0, 9.0]],
            vec![[0, 1, 2]],
            vec![0.0; 3],
            1.0,
        );
        assert_eq!(projected_area(&m), 0.5);
    }

    #[test]
    fn rejects_bad_z_scale() {
        assert!(matches!(triangulate(&flat(2, 1.0), 0.0), Err(GeometryError::InvalidZScale(_))));
    }

    #[test]
    fn ramp_endpoints_and_midpoint() {
        let ramp = ValueRamp::new(10.0, 30.0).unwrap();
        assert_eq!(color_for_value(10.0, &ramp), RAMP_LIGHT);
        assert_eq!(color_for_value(30.0, &ramp), RAMP_DARK);
        assert_eq!(color_for_value(-5.0, &ramp), RAMP_LIGHT);
        assert_eq!(color_for_value(99.0, &ramp), RAMP_DARK);
        let mid = color_for_value(20.0, &ramp).luminance();
        assert!(mid < RAMP_LIGHT.luminance() && mid > RAMP_DARK.luminance());
    }

    #[test]
    fn ramp_requires_increasing_range() {
        assert!(ValueRamp::new(1.0, 1.0).is_err());
    }

    #[test]
    fn discrete_ramp_gets_darker() {
        let r = discrete_ramp(4);
        assert_eq!(r.len(), 4);
        assert!(r.windows(2).all(|w| w[0].luminance() > w[1].luminance()));
        assert_eq!(r[3], RAMP_DARK);
    }
}
