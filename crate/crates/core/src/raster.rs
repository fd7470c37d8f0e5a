//! Gridded height fields: ESRI ASCII grid parsing, multi-year datasets and
//! deterministic synthetic terrain.
//!
//! A [`HeightField`] stores one study year of saturated thickness on a
//! regular lon/lat lattice. Row 0 is the northernmost row, matching the
//! first data line of an ASCII grid. Cells flagged in the nodata mask carry
//! a value of `0.0` and are skipped by every downstream consumer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sentinel written for nodata cells when serializing a grid.
pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RasterError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}, column {column}: non-numeric token {token:?}")]
    NonNumeric {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}: expected {expected} values, found {found}")]
    WrongCellCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected} data rows, found {found}")]
    WrongRowCount { expected: usize, found: usize },
    #[error("line {line}, column {column}: invalid thickness {value} (must be finite and >= 0)")]
    InvalidValue {
        line: usize,
        column: usize,
        value: f64,
    },
    #[error("all cells are nodata")]
    AllNodata,
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("at least 2 study years required, got {0}")]
    TooFewYears(usize),
    #[error("grid mismatch: year {year} does not share the grid of year {reference}")]
    GridMismatch { year: String, reference: String },
    #[error("duplicate year label {0:?}")]
    DuplicateYear(String),
    #[error("{path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One study year of gridded saturated thickness (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    year_label: String,
    n_rows: usize,
    n_cols: usize,
    origin_lon: f64,
    origin_lat: f64,
    cell_size: f64,
    values: Vec<f64>,
    nodata: Vec<bool>,
}

impl HeightField {
    /// Builds a field from row-major values. Nodata cells are zeroed.
    pub fn new(
        year_label: impl Into<String>,
        n_rows: usize,
        n_cols: usize,
        origin: (f64, f64),
        cell_size: f64,
        mut values: Vec<f64>,
        nodata: Vec<bool>,
    ) -> Result<Self, RasterError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(RasterError::InvalidGeometry(
                "grid must have at least one row and one column".into(),
            ));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(RasterError::InvalidGeometry(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(RasterError::InvalidGeometry("origin must be finite".into()));
        }
        let n = n_rows * n_cols;
        if values.len() != n || nodata.len() != n {
            return Err(RasterError::InvalidGeometry(format!(
                "expected {n} cells, got {} values and {} mask entries",
                values.len(),
                nodata.len()
            )));
        }
        for (i, (v, &masked)) in values.iter_mut().zip(&nodata).enumerate() {
            if masked {
                *v = 0.0;
            } else if !(v.is_finite() && *v >= 0.0) {
                return Err(RasterError::InvalidValue {
                    line: i / n_cols,
                    column: i % n_cols,
                    value: *v,
                });
            }
        }
        if nodata.iter().all(|&m| m) {
            return Err(RasterError::AllNodata);
        }
        Ok(Self {
            year_label: year_label.into(),
            n_rows,
            n_cols,
            origin_lon: origin.0,
            origin_lat: origin.1,
            cell_size,
            values,
            nodata,
        })
    }

    /// Convenience constructor for a field without nodata cells.
    pub fn from_values(
        year_label: impl Into<String>,
        n_rows: usize,
        n_cols: usize,
        cell_size: f64,
        values: Vec<f64>,
    ) -> Result<Self, RasterError> {
        let mask = vec![false; values.len()];
        Self::new(year_label, n_rows, n_cols, (0.0, 0.0), cell_size, values, mask)
    }

    pub fn year_label(&self) -> &str {
        &self.year_label
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_lon, self.origin_lat)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodata_mask(&self) -> &[bool] {
        &self.nodata
    }

    /// Value at `(row, col)`, or `None` for nodata or out-of-range cells.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row >= self.n_rows || col >= self.n_cols {
            return None;
        }
        let i = row * self.n_cols + col;
        (!self.nodata[i]).then(|| self.values[i])
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_none()
    }

    /// Planar scene position of a grid point. Row 0 is the northern edge,
    /// so latitude decreases with the row index.
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.origin_lon + col as f64 * self.cell_size;
        let y = self.origin_lat + (self.n_rows - 1 - row) as f64 * self.cell_size;
        (x, y)
    }

    /// Iterator over `(row, col, value)` of every valid cell, row-major.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n_cols = self.n_cols;
        self.values
            .iter()
            .zip(&self.nodata)
            .enumerate()
            .filter(|(_, (_, &m))| !m)
            .map(move |(i, (&v, _))| (i / n_cols, i % n_cols, v))
    }

    pub fn max_value(&self) -> f64 {
        self.valid_cells().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.valid_cells().map(|c| c.2).fold(f64::INFINITY, f64::min)
    }

    /// Same grid geometry (shape, origin and cell size).
    pub fn same_grid(&self, other: &HeightField) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.origin_lon == other.origin_lon
            && self.origin_lat == other.origin_lat
            && self.cell_size == other.cell_size
    }

    /// Copy of this field with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<HeightField, RasterError> {
        let values = self.values.iter().map(|v| v * factor).collect();
        HeightField::new(
            self.year_label.clone(),
            self.n_rows,
            self.n_cols,
            self.origin(),
            self.cell_size,
            values,
            self.nodata.clone(),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.year_label = label.into();
        self
    }

    /// Serializes to ESRI ASCII grid text. Values are written in shortest
    /// round-trip form so that re-parsing reproduces the field exactly.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.n_cols);
        let _ = writeln!(out, "nrows {}", self.n_rows);
        let _ = writeln!(out, "xllcorner {:?}", self.origin_lon);
        let _ = writeln!(out, "yllcorner {:?}", self.origin_lat);
        let _ = writeln!(out, "cellsize {:?}", self.cell_size);
        let _ = writeln!(out, "NODATA_value {DEFAULT_NODATA}");
        for row in 0..self.n_rows {
            for col in 0..self.n_cols {
                if col > 0 {
                    out.push(' ');
                }
                match self.get(row, col) {
                    Some(v) => {
                        let _ = write!(out, "{v:?}");
                    }
                    None => {
                        let _ = write!(out, "{DEFAULT_NODATA}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<f64>,
    yll: Option<f64>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

/// Parses an ESRI ASCII grid. Header keys are case-insensitive and may come
/// in any order; `NODATA_value` is optional.
pub fn parse_ascii_grid(text: &str, year_label: &str) -> Result<HeightField, RasterError> {
    let mut header = Header::default();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    while let Some(&(line_no, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_lowercase();
        let is_key = matches!(
            key.as_str(),
            "ncols" | "nrows" | "xllcorner" | "yllcorner" | "cellsize" | "nodata_value"
        );
        if !is_key {
            if key.starts_with(|c: char| c.is_ascii_alphabetic()) && key.parse::<f64>().is_err() {
                return Err(RasterError::MalformedHeader {
                    line: line_no,
                    reason: format!("unknown header key {key:?}"),
                });
            }
            break;
        }
        lines.next();
        let raw = tokens.next().ok_or_else(|| RasterError::MalformedHeader {
            line: line_no,
            reason: format!("missing value for {key}"),
        })?;
        if tokens.next().is_some() {
            return Err(RasterError::MalformedHeader {
                line: line_no,
                reason: format!("trailing tokens after {key}"),
            });
        }
        let bad = |what: &str| RasterError::MalformedHeader {
            line: line_no,
            reason: format!("{key} value {raw:?} is not {what}"),
        };
        let dup = header_slot_taken(&header, &key);
        if dup {
            return Err(RasterError::MalformedHeader {
                line: line_no,
                reason: format!("duplicate key {key}"),
            });
        }
        match key.as_str() {
            "ncols" => header.ncols = Some(raw.parse().map_err(|_| bad("a positive integer"))?),
            "nrows" => header.nrows = Some(raw.parse().map_err(|_| bad("a positive integer"))?),
            "xllcorner" => header.xll = Some(raw.parse().map_err(|_| bad("a number"))?),
            "yllcorner" => header.yll = Some(raw.parse().map_err(|_| bad("a number"))?),
            "cellsize" => header.cellsize = Some(raw.parse().map_err(|_| bad("a number"))?),
            _ => header.nodata = Some(raw.parse().map_err(|_| bad("a number"))?),
        }
    }

    let first_data_line = lines.peek().map(|l| l.0).unwrap_or(0);
    let missing = |name: &str| RasterError::MalformedHeader {
        line: first_data_line,
        reason: format!("missing required key {name}"),
    };
    let ncols = header.ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = header.nrows.ok_or_else(|| missing("nrows"))?;
    let xll = header.xll.ok_or_else(|| missing("xllcorner"))?;
    let yll = header.yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = header.cellsize.ok_or_else(|| missing("cellsize"))?;
    if ncols == 0 || nrows == 0 {
        return Err(RasterError::MalformedHeader {
            line: first_data_line,
            reason: "ncols and nrows must be positive".into(),
        });
    }
    if !(cellsize.is_finite() && cellsize > 0.0) {
        return Err(RasterError::MalformedHeader {
            line: first_data_line,
            reason: format!("cellsize must be positive, got {cellsize}"),
        });
    }

    let mut values = Vec::with_capacity(nrows * ncols);
    let mut mask = Vec::with_capacity(nrows * ncols);
    let mut rows_seen = 0;
    for (line_no, line) in lines {
        if rows_seen == nrows {
            return Err(RasterError::WrongRowCount {
                expected: nrows,
                found: rows_seen + 1,
            });
        }
        let mut found = 0;
        for (col, token) in line.split_whitespace().enumerate() {
            found += 1;
            if found > ncols {
                continue;
            }
            let v: f64 = token.parse().map_err(|_| RasterError::NonNumeric {
                line: line_no,
                column: col + 1,
                token: token.to_string(),
            })?;
            if header.nodata == Some(v) {
                values.push(0.0);
                mask.push(true);
            } else if v.is_finite() && v >= 0.0 {
                values.push(v);
                mask.push(false);
            } else {
                return Err(RasterError::InvalidValue {
                    line: line_no,
                    column: col + 1,
                    value: v,
                });
            }
        }
        if found != ncols {
            return Err(RasterError::WrongCellCount {
                line: line_no,
                expected: ncols,
                found,
            });
        }
        rows_seen += 1;
    }
    if rows_seen != nrows {
        return Err(RasterError::WrongRowCount {
            expected: nrows,
            found: rows_seen,
        });
    }
    HeightField::new(year_label, nrows, ncols, (xll, yll), cellsize, values, mask)
}

fn header_slot_taken(h: &Header, key: &str) -> bool {
    match key {
        "ncols" => h.ncols.is_some(),
        "nrows" => h.nrows.is_some(),
        "xllcorner" => h.xll.is_some(),
        "yllcorner" => h.yll.is_some(),
        "cellsize" => h.cellsize.is_some(),
        _ => h.nodata.is_some(),
    }
}

/// Chronologically ordered study years on one shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    fields: Vec<HeightField>,
    global_min: f64,
    global_max: f64,
}

impl Dataset {
    pub fn fields(&self) -> &[HeightField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn global_min(&self) -> f64 {
        self.global_min
    }

    pub fn global_max(&self) -> f64 {
        self.global_max
    }

    pub fn year_labels(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.year_label()).collect()
    }

    pub fn field(&self, year_label: &str) -> Option<&HeightField> {
        self.fields.iter().find(|f| f.year_label == year_label)
    }

    /// Template field for grid geometry queries.
    pub fn grid(&self) -> &HeightField {
        &self.fields[0]
    }

    /// The chronologically first `n` years, re-validated as a dataset.
    pub fn first_years(&self, n: usize) -> Result<Dataset, DatasetError> {
        if n > self.fields.len() {
            return Err(DatasetError::TooFewYears(self.fields.len()));
        }
        validate_dataset(self.fields[..n].to_vec())
    }
}

/// Checks that all fields share one grid and computes global extremes.
pub fn validate_dataset(fields: Vec<HeightField>) -> Result<Dataset, DatasetError> {
    if fields.len() < 2 {
        return Err(DatasetError::TooFewYears(fields.len()));
    }
    let reference = &fields[0];
    for (i, f) in fields.iter().enumerate().skip(1) {
        if !reference.same_grid(f) {
            return Err(DatasetError::GridMismatch {
                year: f.year_label.clone(),
                reference: reference.year_label.clone(),
            });
        }
        if fields[..i].iter().any(|g| g.year_label == f.year_label) {
            return Err(DatasetError::DuplicateYear(f.year_label.clone()));
        }
    }
    let global_max = fields.iter().map(HeightField::max_value).fold(f64::NEG_INFINITY, f64::max);
    let global_min = fields.iter().map(HeightField::min_value).fold(f64::INFINITY, f64::min);
    Ok(Dataset {
        fields,
        global_min,
        global_max,
    })
}

/// One entry of a dataset manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub year_label: String,
    pub path: PathBuf,
}

/// Loads a JSON manifest (an array of `{year_label, path}` in chronological
/// order). Relative paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Dataset, DatasetError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetError::Io { path: p, source }
    };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|source| DatasetError::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut fields = Vec::with_capacity(entries.len());
    for entry in entries {
        let grid_path = base.join(&entry.path);
        let grid = fs::read_to_string(&grid_path).map_err(io_err(&grid_path))?;
        let field = parse_ascii_grid(&grid, &entry.year_label).map_err(|source| {
            DatasetError::Raster {
                path: grid_path.clone(),
                source,
            }
        })?;
        fields.push(field);
    }
    validate_dataset(fields)
}

/// Writes every year as `<label>.asc` plus a `manifest.json` into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf, DatasetError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for field in dataset.fields() {
        let file = PathBuf::from(format!("{}.asc", sanitize_label(field.year_label())));
        let p = dir.join(&file);
        fs::write(&p, field.to_ascii_grid()).map_err(io_err(&p))?;
        entries.push(ManifestEntry {
            year_label: field.year_label().to_string(),
            path: file,
        });
    }
    let manifest = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&entries).expect("manifest serializes");
    fs::write(&manifest, json + "\n").map_err(io_err(&manifest))?;
    Ok(manifest)
}

pub(crate) fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Deterministic synthetic terrain: a sum of randomly placed Gaussian bumps,
/// rescaled so the peak equals `max_height` and clipped to `[0, max_height]`.
///
/// The grid has unit cell size and its origin at `(0, 0)`. With
/// `n_bumps == 0` the field is flat zero.
pub fn synthesize_field(
    seed: u64,
    n_rows: usize,
    n_cols: usize,
    n_bumps: usize,
    max_height: f64,
) -> Result<HeightField, RasterError> {
    if n_rows < 8 || n_cols < 8 {
        return Err(RasterError::InvalidGeometry(format!(
            "synthetic fields need at least 8x8 cells, got {n_rows}x{n_cols}"
        )));
    }
    if !(max_height.is_finite() && max_height > 0.0) {
        return Err(RasterError::InvalidGeometry(format!(
            "max_height must be positive, got {max_height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = n_rows.min(n_cols) as f64;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let row = rng.random_range(0.0..n_rows as f64);
            let col = rng.random_range(0.0..n_cols as f64);
            let sigma = rng.random_range(0.15..0.3) * span;
            let amp = rng.random_range(0.3..1.0);
            (row, col, sigma, amp)
        })
        .collect();

    let mut values = vec![0.0; n_rows * n_cols];
    for (i, v) in values.iter_mut().enumerate() {
        let (r, c) = ((i / n_cols) as f64, (i % n_cols) as f64);
        *v = bumps
            .iter()
            .map(|&(br, bc, s, a)| {
                let d2 = (r - br).powi(2) + (c - bc).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        let k = max_height / peak;
        for v in &mut values {
            *v = (*v * k).clamp(0.0, max_height);
        }
    }
    HeightField::from_values(format!("synthetic-{seed}"), n_rows, n_cols, 1.0, values)
}
