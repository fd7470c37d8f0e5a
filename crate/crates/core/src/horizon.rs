//! 3D horizon bands.
//!
//! A surface with values in `[0, v_max]` is cut into `B` layers of height
//! `c = v_max / B`. Each triangle is clipped along the value iso-lines
//! `c, 2c, …, (B-1)c` so every resulting piece lies inside a single layer,
//! and every layer is then dropped onto the base plane: a vertex with value
//! `v` in band `k` is drawn at height `r = v - k·c`. All bands therefore
//! overplot in the slab `[0, c]` and only color tells them apart.
//!
//! Two boundary rules make the decomposition deterministic:
//!
//! * scalar values use half-open bands `[k·c, (k+1)·c)`, with `v_max` itself
//!   clamped into the top band as `(B-1, c)`;
//! * when clipping, a vertex lying exactly on an iso-line belongs to the
//!   piece below it, so a plateau sitting on a level stays whole.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::surface::{discrete_ramp, signed_area_xy, Rgb, SurfaceMesh, TriangleMesh};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HorizonError {
    #[error("band count must be at least 1")]
    NoBands,
    #[error("degenerate data: v_max must be positive and finite, got {0}")]
    DegenerateData(f64),
    #[error("value {0} outside the band domain [0, v_max]")]
    Domain(f64),
    #[error("z scale must be positive and finite, got {0}")]
    InvalidZScale(f64),
}

/// Band count and band height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandParams {
    bands: u32,
    band_height: f64,
    v_max: f64,
}

impl BandParams {
    pub fn new(bands: u32, v_max: f64) -> Result<Self, HorizonError> {
        if bands == 0 {
            return Err(HorizonError::NoBands);
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(HorizonError::DegenerateData(v_max));
        }
        Ok(Self { bands, band_height: v_max / bands as f64, v_max })
    }

    pub fn bands(&self) -> u32 {
        self.bands
    }

    /// Height `c` of one band, in meters.
    pub fn band_height(&self) -> f64 {
        self.band_height
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Lower edge of band `k`.
    pub fn level(&self, k: u32) -> f64 {
        k as f64 * self.band_height
    }

    fn residual(&self, v: f64, k: u32) -> f64 {
        (v - self.level(k)).clamp(0.0, self.band_height)
    }
}

/// Band index and residual height of a scalar value.
pub fn band_value(v: f64, params: &BandParams) -> Result<(u32, f64), HorizonError> {
    if v.is_nan() || v < 0.0 {
        return Err(HorizonError::Domain(v));
    }
    let top = params.bands - 1;
    if v >= params.v_max {
        return Ok((top, params.band_height));
    }
    let mut k = ((v / params.band_height).floor() as u32).min(top);
    // floor() of a rounded quotient can land one band off near a level.
    if k > 0 && params.level(k) > v {
        k -= 1;
    }
    if k < top && params.level(k + 1) <= v {
        k += 1;
    }
    Ok((k, params.residual(v, k)))
}

/// A triangle corner carrying its interpolatable value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipVertex {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl ClipVertex {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self { x, y, value }
    }

    fn xy3(self) -> [f64; 3] {
        [self.x, self.y, 0.0]
    }
}

pub type ClipTriangle = [ClipVertex; 3];

/// XY area of a clip triangle (absolute).
pub fn clip_triangle_area(t: &ClipTriangle) -> f64 {
    signed_area_xy(t[0].xy3(), t[1].xy3(), t[2].xy3()).abs()
}

/// Splits a triangle along the iso-line `value == level`.
///
/// Returns `(below, above)`; below holds everything with value `<= level`.
/// Input winding is preserved and zero-area slivers are dropped.
pub fn clip_triangle_at_level(tri: &ClipTriangle, level: f64) -> (Vec<ClipTriangle>, Vec<ClipTriangle>) {
    let above = |v: &ClipVertex| v.value > level;
    let n_above = tri.iter().filter(|v| above(v)).count();
    match n_above {
        0 => return (vec![*tri], Vec::new()),
        3 => return (Vec::new(), vec![*tri]),
        _ => {}
    }

    let mut below_poly = Vec::with_capacity(4);
    let mut above_poly = Vec::with_capacity(4);
    for i in 0..3 {
        let s = tri[i];
        let e = tri[(i + 1) % 3];
        if above(&s) {
            above_poly.push(s);
        } else {
            below_poly.push(s);
        }
        if above(&s) != above(&e) {
            let p = crossing(s, e, level);
            below_poly.push(p);
            above_poly.push(p);
        }
    }
    (fan(&below_poly), fan(&above_poly))
}

// Interpolated from the lower endpoint so that both sides of an edge get the
// same point regardless of traversal direction.
fn crossing(a: ClipVertex, b: ClipVertex, level: f64) -> ClipVertex {
    let (lo, hi) = if a.value <= b.value { (a, b) } else { (b, a) };
    let t = (level - lo.value) / (hi.value - lo.value);
    ClipVertex {
        x: lo.x + (hi.x - lo.x) * t,
        y: lo.y + (hi.y - lo.y) * t,
        value: level,
    }
}

fn fan(poly: &[ClipVertex]) -> Vec<ClipTriangle> {
    let mut pts: Vec<ClipVertex> = Vec::with_capacity(poly.len());
    for &p in poly {
        if pts.last().is_none_or(|q: &ClipVertex| (q.x, q.y) != (p.x, p.y)) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && (pts[0].x, pts[0].y) == (pts[pts.len() - 1].x, pts[pts.len() - 1].y) {
        pts.pop();
    }
    if pts.len() < 3 {
        return Vec::new();
    }
    (1..pts.len() - 1)
        .map(|i| [pts[0], pts[i], pts[i + 1]])
        .filter(|t| clip_triangle_area(t) > 0.0)
        .collect()
}

/// Slices a triangle into band-pure pieces, sweeping the levels bottom-up.
/// Pieces come out ordered by band, then by cut sequence.
pub fn split_into_bands(tri: &ClipTriangle, params: &BandParams) -> Vec<(u32, ClipTriangle)> {
    let mut out = Vec::new();
    let mut rest = vec![*tri];
    for k in 0..params.bands - 1 {
        if rest.is_empty() {
            break;
        }
        let level = params.level(k + 1);
        let mut next = Vec::new();
        for t in &rest {
            let (below, above) = clip_triangle_at_level(t, level);
            out.extend(below.into_iter().map(|b| (k, b)));
            next.extend(above);
        }
        rest = next;
    }
    out.extend(rest.into_iter().map(|t| (params.bands - 1, t)));
    out
}

/// Surface collapsed into overplotted bands.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonMesh {
    pub(crate) vertices: Vec<[f64; 3]>,
    pub(crate) triangles: Vec<[u32; 3]>,
    pub(crate) vertex_value: Vec<f64>,
    pub(crate) vertex_color: Vec<Rgb>,
    pub(crate) vertex_band: Vec<u32>,
    pub(crate) vertex_residual: Vec<f64>,
    pub(crate) z_scale: f64,
    pub(crate) params: BandParams,
}

impl HorizonMesh {
    /// Original (uncollapsed) value at each vertex.
    pub fn vertex_values(&self) -> &[f64] {
        &self.vertex_value
    }

    pub fn vertex_bands(&self) -> &[u32] {
        &self.vertex_band
    }

    pub fn vertex_residuals(&self) -> &[f64] {
        &self.vertex_residual
    }

    pub fn params(&self) -> &BandParams {
        &self.params
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

    /// Band of a triangle (all of its corners agree).
    pub fn triangle_band(&self, t: usize) -> u32 {
        self.vertex_band[self.triangles[t][0] as usize]
    }

    /// Replaces the band colors; `colors[k]` paints band `k`.
    pub fn paint_bands(&mut self, colors: &[Rgb]) {
        self.vertex_color = self.vertex_band.iter().map(|&k| colors[k as usize]).collect();
    }
}

impl TriangleMesh for HorizonMesh {
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

/// Colors for `bands` bands, lightest at band 0 and darkest at the top.
pub fn band_colors(bands: u32) -> Vec<Rgb> {
    discrete_ramp(bands as usize)
}

/// Decomposes a surface into horizon bands.
///
/// Vertices are shared between output triangles of the same band at the same
/// XY location. Output order follows input triangle order, then band.
pub fn decompose(mesh: &SurfaceMesh, params: &BandParams, z_scale: f64) -> Result<HorizonMesh, HorizonError> {
    if !(z_scale.is_finite() && z_scale > 0.0) {
        return Err(HorizonError::InvalidZScale(z_scale));
    }
    if let Some(&bad) = mesh
        .vertex_values()
        .iter()
        .find(|&&v| !(0.0..=params.v_max).contains(&v))
    {
        return Err(HorizonError::Domain(bad));
    }

    let colors = band_colors(params.bands);
    let mut out = HorizonMesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        vertex_value: Vec::new(),
        vertex_color: Vec::new(),
        vertex_band: Vec::new(),
        vertex_residual: Vec::new(),
        z_scale,
        params: *params,
    };
    let mut lookup: HashMap<(u64, u64, u32), u32> = HashMap::new();
    let pos = mesh.positions();
    let val = mesh.vertex_values();

    for t in mesh.triangles() {
        let tri = t.map(|i| {
            let p = pos[i as usize];
            ClipVertex::new(p[0], p[1], val[i as usize])
        });
        for (band, piece) in split_into_bands(&tri, params) {
            let ids = piece.map(|v| {
                *lookup.entry((v.x.to_bits(), v.y.to_bits(), band)).or_insert_with(|| {
                    let r = params.residual(v.value, band);
                    out.vertices.push([v.x, v.y, r * z_scale]);
                    out.vertex_value.push(v.value);
                    out.vertex_color.push(colors[band as usize]);
                    out.vertex_band.push(band);
                    out.vertex_residual.push(r);
                    (out.vertices.len() - 1) as u32
                })
            });
            out.triangles.push(ids);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::HeightField;
    use crate::surface::{projected_area, triangulate};

    fn cv(x: f64, y: f64, v: f64) -> ClipVertex {
        ClipVertex::new(x, y, v)
    }

    fn total(ts: &[ClipTriangle]) -> f64 {
        ts.iter().map(clip_triangle_area).sum()
    }

    #[test]
    fn band_value_examples() {
        let p = BandParams::new(4, 8.0).unwrap();
        let (k, r) = band_value(7.3, &p).unwrap();
        assert_eq!(k, 3);
        assert!((r - 1.3).abs() < 1e-12);
        assert_eq!(band_value(0.0, &p).unwrap(), (0, 0.0));
        assert_eq!(band_value(8.0, &p).unwrap(), (3, 2.0));
        assert_eq!(band_value(2.0, &p).unwrap(), (1, 0.0));
        assert_eq!(band_value(-0.1, &p), Err(HorizonError::Domain(-0.1)));
    }

    #[test]
    fn band_params_validation() {
        assert_eq!(BandParams::new(0, 1.0), Err(HorizonError::NoBands));
        assert_eq!(BandParams::new(2, 0.0), Err(HorizonError::DegenerateData(0.0)));
    }

    #[test]
    fn clip_analytic_corner() {
        let tri = [cv(0.0, 0.0, 0.0), cv(1.0, 0.0, 0.0), cv(0.0, 1.0, 3.0)];
        let (below, above) = clip_triangle_at_level(&tri, 2.0);
        assert_eq!(above.len(), 1);
        assert!((total(&above) - 1.0 / 18.0).abs() < 1e-12);
        assert!((total(&below) - 4.0 / 9.0).abs() < 1e-12);
        for t in below.iter().chain(&above) {
            let p = t.map(|v| v.xy3());
            assert!(signed_area_xy(p[0], p[1], p[2]) > 0.0, "winding preserved");
        }
    }

    #[test]
    fn clip_no_cut_and_boundary() {
        let tri = [cv(0.0, 0.0, 1.0), cv(1.0, 0.0, 1.5), cv(0.0, 1.0, 0.5)];
        assert_eq!(clip_triangle_at_level(&tri, 2.0), (vec![tri], vec![]));
        let flat = [cv(0.0, 0.0, 2.0), cv(1.0, 0.0, 2.0), cv(0.0, 1.0, 2.0)];
        assert_eq!(clip_triangle_at_level(&flat, 2.0), (vec![flat], vec![]));
        assert_eq!(clip_triangle_at_level(&tri, 0.25), (vec![], vec![tri]));
    }

    #[test]
    fn clip_through_vertex_has_no_slivers() {
        // one vertex on the level, the others on opposite sides
        let tri = [cv(0.0, 0.0, 2.0), cv(1.0, 0.0, 1.0), cv(0.0, 1.0, 3.0)];
        let (below, above) = clip_triangle_at_level(&tri, 2.0);
        assert_eq!((below.len(), above.len()), (1, 1));
        assert!((total(&below) + total(&above) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_fields_stay_single_band() {
        let p = BandParams::new(4, 8.0).unwrap();
        let zero = HeightField::from_values("z", 3, 3, 1.0, vec![0.0; 9]).unwrap();
        let m = triangulate(&zero, 1.0).unwrap();
        let h = decompose(&m, &p, 1.0).unwrap();
        assert_eq!(h.triangle_count(), m.triangle_count());
        assert!(h.vertex_bands().iter().all(|&k| k == 0));
        assert!(h.positions().iter().all(|v| v[2] == 0.0));

        let top = HeightField::from_values("t", 3, 3, 1.0, vec![8.0; 9]).unwrap();
        let m = triangulate(&top, 1.0).unwrap();
        let h = decompose(&m, &p, 3.0).unwrap();
        assert_eq!(h.triangle_count(), m.triangle_count());
        assert!(h.vertex_bands().iter().all(|&k| k == 3));
        assert!(h.positions().iter().all(|v| v[2] == 2.0 * 3.0));
    }

    #[test]
    fn ramp_field_splits_and_conserves() {
        let values: Vec<f64> = (0..16).map(|i| (i % 4) as f64 * 8.0 / 3.0).collect();
        let f = HeightField::from_values("r", 4, 4, 1.0, values).unwrap();
        let m = triangulate(&f, 1.0).unwrap();
        let p = BandParams::new(4, 8.0).unwrap();
        let h = decompose(&m, &p, 1.0).unwrap();
        assert!(h.triangle_count() > m.triangle_count());
        assert!((projected_area(&h) - projected_area(&m)).abs() < 1e-12);
        for t in h.triangles() {
            let k = h.vertex_bands()[t[0] as usize];
            assert!(t.iter().all(|&i| h.vertex_bands()[i as usize] == k));
        }
        assert!(h.positions().iter().all(|v| v[2] <= 2.0 + 1e-12));
    }

    #[test]
    fn decompose_rejects_out_of_domain() {
        let f = HeightField::from_values("r", 2, 2, 1.0, vec![0.0, 1.0, 2.0, 9.0]).unwrap();
        let m = triangulate(&f, 1.0).unwrap();
        let p = BandParams::new(2, 8.0).unwrap();
        assert_eq!(decompose(&m, &p, 1.0).unwrap_err(), HorizonError::Domain(9.0));
        assert!(matches!(decompose(&m, &BandParams::new(2, 9.0).unwrap(), -1.0), Err(HorizonError::InvalidZScale(_))));
    }
}
