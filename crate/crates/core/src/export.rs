//! Scene export: one binary glTF per slot plus a `scene.json` manifest.
//!
//! Every `.glb` holds a single triangle-list primitive with `POSITION`
//! (f32 VEC3), `COLOR_0` (f32 VEC3) and u32 indices, all little-endian.
//! Positions are in the slot's local frame with +z up; the manifest carries
//! the slot translation. The glTF root node rotates +z onto glTF's +y so
//! stand-alone viewers show the surface upright.
//!
//! Output is a pure function of the scene: identical scenes produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::layout::{translate, Bounds, LayoutParams, Legend, Scene, Technique};
use crate::raster::sanitize_label;
use crate::surface::TriangleMesh;

pub const MANIFEST_FILE: &str = "scene.json";
pub const MANIFEST_VERSION: u32 = 1;

const GLB_MAGIC: u32 = 0x4654_6C67;
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;
const FLOAT: u32 = 5126;
const UNSIGNED_INT: u32 = 5125;
const ARRAY_BUFFER: u32 = 34962;
const ELEMENT_ARRAY_BUFFER: u32 = 34963;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("scene has no slots")]
    EmptyScene,
    #[error("slot {0:?} has {1} indices, more than a u32 index buffer can address")]
    TooManyIndices(String, usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid glb: {0}")]
    InvalidGlb(String),
}

/// Contents of `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format_version: u32,
    pub technique: Technique,
    pub up_axis: String,
    pub params: LayoutParams,
    pub slots: Vec<SlotManifest>,
    /// Heights of the separator planes between stacked slots.
    pub separators: Vec<f64>,
    pub legend: Legend,
    /// Bounds of all translated vertices at the precision stored in the
    /// `.glb` files.
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotManifest {
    pub year_label: String,
    pub translation: [f64; 3],
    pub z_scale: f64,
    pub base_z: f64,
    pub extent: f64,
    pub mesh: String,
    pub vertex_count: usize,
    pub triangle_count: usize,
}

/// Mesh data read back from a `.glb`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlbMesh {
    pub positions: Vec<[f32; 3]>,
    pub colors: Vec<[f32; 3]>,
    pub indices: Vec<u32>,
}

/// A rendered scene: the manifest plus `(file name, .glb bytes)` per slot.
pub type RenderedScene = (SceneManifest, Vec<(String, Vec<u8>)>);

/// Builds the manifest and `.glb` payloads without touching the disk.
pub fn render_scene(scene: &Scene) -> Result<RenderedScene, ExportError> {
    if scene.slots.is_empty() {
        return Err(ExportError::EmptyScene);
    }
    let mut files = Vec::with_capacity(scene.slots.len());
    let mut slots = Vec::with_capacity(scene.slots.len());
    let mut bounds = Bounds::empty();
    for (i, slot) in scene.slots.iter().enumerate() {
        let mesh = slot.mesh.as_mesh();
        let n_idx = mesh.triangles().len() * 3;
        if n_idx > u32::MAX as usize {
            return Err(ExportError::TooManyIndices(slot.year_label.clone(), n_idx));
        }
        let name = format!("slot_{i}_{}.glb", sanitize_label(&slot.year_label));
        for p in mesh.positions() {
            let stored = p.map(|c| c as f32 as f64);
            bounds.include(translate(stored, slot.translation));
        }
        files.push((name.clone(), encode_glb(mesh, &slot.year_label)));
        slots.push(SlotManifest {
            year_label: slot.year_label.clone(),
            translation: slot.translation,
            z_scale: slot.z_scale,
            base_z: slot.base_z(),
            extent: slot.extent,
            mesh: name,
            vertex_count: mesh.positions().len(),
            triangle_count: mesh.triangles().len(),
        });
    }
    let manifest = SceneManifest {
        format_version: MANIFEST_VERSION,
        technique: scene.technique(),
        up_axis: "z".into(),
        params: scene.params,
        slots,
        separators: scene.separators.clone(),
        legend: scene.legend.clone(),
        bounds,
    };
    Ok((manifest, files))
}

/// Writes `scene.json` and one `.glb` per slot into `out_dir`.
pub fn export_scene(scene: &Scene, out_dir: &Path) -> Result<SceneManifest, ExportError> {
    let (manifest, files) = render_scene(scene)?;
    let io = |p: &Path| {
        let path = p.to_path_buf();
        move |source| ExportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    for (name, bytes) in &files {
        let p = out_dir.join(name);
        fs::write(&p, bytes).map_err(io(&p))?;
    }
    let p = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&p, json + "\n").map_err(io(&p))?;
    Ok(manifest)
}

/// Reads a manifest and every mesh it references.
pub fn read_scene(dir: &Path) -> Result<(SceneManifest, Vec<GlbMesh>), ExportError> {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).map_err(|source| ExportError::Io { path: p.clone(), source })?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|source| ExportError::Manifest { path: p.clone(), source })?;
    let mut meshes = Vec::with_capacity(manifest.slots.len());
    for slot in &manifest.slots {
        let mp = dir.join(&slot.mesh);
        let bytes = fs::read(&mp).map_err(|source| ExportError::Io { path: mp.clone(), source })?;
        meshes.push(decode_glb(&bytes)?);
    }
    Ok((manifest, meshes))
}

fn encode_glb(mesh: &dyn TriangleMesh, name: &str) -> Vec<u8> {
    let positions: Vec<[f32; 3]> = mesh.positions().iter().map(|p| p.map(|c| c as f32)).collect();
    let n = positions.len();
    let mut min = [f32::INFINITY; 3];
    let mut max = [f32::NEG_INFINITY; 3];
    let mut bin = Vec::with_capacity(n * 24 + mesh.triangles().len() * 12);
    for p in &positions {
        for i in 0..3 {
            min[i] = min[i].min(p[i]);
            max[i] = max[i].max(p[i]);
            bin.extend_from_slice(&p[i].to_le_bytes());
        }
    }
    let color_offset = bin.len();
    for c in mesh.colors() {
        for ch in c.0 {
            bin.extend_from_slice(&ch.to_le_bytes());
        }
    }
    let index_offset = bin.len();
    for t in mesh.triangles() {
        for i in t {
            bin.extend_from_slice(&i.to_le_bytes());
        }
    }
    let index_len = bin.len() - index_offset;

    let half = std::f32::consts::FRAC_1_SQRT_2;
    let doc = json!({
        "asset": { "version": "2.0", "generator": concat!("surfgraph ", env!("CARGO_PKG_VERSION")) },
        "scene": 0,
        "scenes": [{ "nodes": [0] }],
        "nodes": [{ "mesh": 0, "name": name, "rotation": [-half, 0.0, 0.0, half] }],
        "meshes": [{
            "name": name,
            "primitives": [{ "attributes": { "POSITION": 0, "COLOR_0": 1 }, "indices": 2, "mode": 4 }]
        }],
        "accessors": [
            { "bufferView": 0, "componentType": FLOAT, "count": n, "type": "VEC3", "min": min, "max": max },
            { "bufferView": 1, "componentType": FLOAT, "count": n, "type": "VEC3" },
            { "bufferView": 2, "componentType": UNSIGNED_INT, "count": mesh.triangles().len() * 3, "type": "SCALAR" }
        ],
        "bufferViews": [
            { "buffer": 0, "byteOffset": 0, "byteLength": color_offset, "target": ARRAY_BUFFER },
            { "buffer": 0, "byteOffset": color_offset, "byteLength": index_offset - color_offset, "target": ARRAY_BUFFER },
            { "buffer": 0, "byteOffset": index_offset, "byteLength": index_len, "target": ELEMENT_ARRAY_BUFFER }
        ],
        "buffers": [{ "byteLength": bin.len() }]
    });
    let mut json_bytes = serde_json::to_vec(&doc).expect("glTF json serializes");
    while !json_bytes.len().is_multiple_of(4) {
        json_bytes.push(b' ');
    }
    while !bin.len().is_multiple_of(4) {
        bin.push(0);
    }

    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
    out.extend_from_slice(&bin);
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, ExportError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| ExportError::InvalidGlb(format!("truncated at byte {at}")))
}

/// Decodes a `.glb` written by this module (first primitive of mesh 0).
pub fn decode_glb(bytes: &[u8]) -> Result<GlbMesh, ExportError> {
    let bad = |m: &str| ExportError::InvalidGlb(m.to_string());
    if read_u32(bytes, 0)? != GLB_MAGIC {
        return Err(bad("missing glTF magic"));
    }
    if read_u32(bytes, 4)? != 2 {
        return Err(bad("unsupported container version"));
    }
    if read_u32(bytes, 8)? as usize != bytes.len() {
        return Err(bad("length field does not match file size"));
    }
    let json_len = read_u32(bytes, 12)? as usize;
    if read_u32(bytes, 16)? != CHUNK_JSON {
        return Err(bad("first chunk is not JSON"));
    }
    let json_end = 20 + json_len;
    let doc: serde_json::Value = serde_json::from_slice(bytes.get(20..json_end).ok_or_else(|| bad("truncated JSON chunk"))?)
        .map_err(|e| ExportError::InvalidGlb(e.to_string()))?;
    let bin_len = read_u32(bytes, json_end)? as usize;
    if read_u32(bytes, json_end + 4)? != CHUNK_BIN {
        return Err(bad("second chunk is not BIN"));
    }
    let bin = bytes.get(json_end + 8..json_end + 8 + bin_len).ok_or_else(|| bad("truncated BIN chunk"))?;

    let prim = &doc["meshes"][0]["primitives"][0];
    let accessor_slice = |idx: &serde_json::Value| -> Result<(&[u8], usize), ExportError> {
        let acc = &doc["accessors"][idx.as_u64().ok_or_else(|| bad("missing accessor"))? as usize];
        let view = &doc["bufferViews"][acc["bufferView"].as_u64().ok_or_else(|| bad("missing view"))? as usize];
        let off = view["byteOffset"].as_u64().unwrap_or(0) as usize + acc["byteOffset"].as_u64().unwrap_or(0) as usize;
        let len = view["byteLength"].as_u64().ok_or_else(|| bad("missing byteLength"))? as usize;
        let count = acc["count"].as_u64().ok_or_else(|| bad("missing count"))? as usize;
        let data = bin.get(off..off + len).ok_or_else(|| bad("view outside buffer"))?;
        Ok((data, count))
    };
    let vec3 = |idx: &serde_json::Value| -> Result<Vec<[f32; 3]>, ExportError> {
        let (data, count) = accessor_slice(idx)?;
        if data.len() < count * 12 {
            return Err(bad("accessor larger than its view"));
        }
        Ok(data[..count * 12]
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes(c[i * 4..i * 4 + 4].try_into().unwrap());
                [f(0), f(1), f(2)]
            })
            .collect())
    };
    let positions = vec3(&prim["attributes"]["POSITION"])?;
    let colors = vec3(&prim["attributes"]["COLOR_0"])?;
    let (data, count) = accessor_slice(&prim["indices"])?;
    if data.len() < count * 4 {
        return Err(bad("index accessor larger than its view"));
    }
    let indices = data[..count * 4]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GlbMesh { positions, colors, indices })
}
