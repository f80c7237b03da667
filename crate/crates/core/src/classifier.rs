//! Scene-level classification.
//!
//! Every pixel is unmixed against the whole dictionary and the per-class
//! reconstruction residuals are kept in a [`ResidualField`]. The raw decision
//! is the class with the smallest residual. The spatial decision sums the
//! residuals of the `M` pixels in the `N × N` window whose spectra are closest
//! in angle to the centre pixel and takes the smallest sum.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dictionary, HsiCube};
use crate::kernel::{cosine_from_parts, cross_vector, gram_matrix, GramBundle, KernelError, KernelSpec};
use crate::solver::{admm_weighted_sunsal, class_residual, SolverConfig, SolverError, UnmixResult};
use crate::weights::{pixel_weights, WeightMode};

const RESIDUAL_MAGIC: &[u8; 4] = b"RSDF";
const RESIDUAL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("cube has {cube} bands but the dictionary has {dict}")]
    BandMismatch { cube: usize, dict: usize },
    #[error("pixel ({row}, {col}): {source}")]
    Solver {
        row: usize,
        col: usize,
        #[source]
        source: SolverError,
    },
    #[error("pixel ({row}, {col}): {source}")]
    Kernel {
        row: usize,
        col: usize,
        #[source]
        source: KernelError,
    },
    #[error("invalid postprocess config: {0}")]
    InvalidPostprocess(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

/// Per-pixel, per-class squared reconstruction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    height: usize,
    width: usize,
    class_count: usize,
    /// Pixel-major: `(row * width + col) * class_count + class_index`.
    residuals: Vec<f64>,
}

impl ResidualField {
    pub fn new(height: usize, width: usize, class_count: usize, residuals: Vec<f64>) -> Result<Self, ClassifierError> {
        if residuals.len() != height * width * class_count || class_count == 0 {
            return Err(ClassifierError::DimensionMismatch(format!(
                "{} residuals for {height}x{width}x{class_count}",
                residuals.len()
            )));
        }
        if residuals.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(ClassifierError::DimensionMismatch(
                "residuals must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            class_count,
            residuals,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        self.pixel_at(row * self.width + col)
    }

    fn pixel_at(&self, idx: usize) -> &[f64] {
        &self.residuals[idx * self.class_count..(idx + 1) * self.class_count]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Checkpoint format: `RSDF`, then little-endian `u32` version, height,
    /// width, class count, `u64` split seed, then `f32` residuals pixel-major.
    pub fn write(&self, path: &Path, seed: u64) -> Result<(), ClassifierError> {
        let mut buf = Vec::with_capacity(28 + self.residuals.len() * 4);
        buf.extend_from_slice(RESIDUAL_MAGIC);
        for v in [RESIDUAL_VERSION, self.height as u32, self.width as u32, self.class_count as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&seed.to_le_bytes());
        for r in &self.residuals {
            buf.extend_from_slice(&(*r as f32).to_le_bytes());
        }
        fs::write(path, buf).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a checkpoint, returning the field and the split seed it was built with.
    pub fn read(path: &Path) -> Result<(Self, u64), ClassifierError> {
        let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |reason: &str| ClassifierError::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 28 || &bytes[..4] != RESIDUAL_MAGIC {
            return Err(bad("not a residual field"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) != RESIDUAL_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (h, w, c) = (word(1), word(2), word(3));
        let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let body = &bytes[28..];
        if body.len() != h * w * c * 4 {
            return Err(bad("truncated residual data"));
        }
        let residuals = body
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Ok((Self::new(h, w, c, residuals)?, seed))
    }
}

/// Window size `N` and neighbour count `M` of the spatial step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    pub window: usize,
    pub neighbors: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            window: 9,
            neighbors: 55,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.window.is_multiple_of(2) {
            return Err(ClassifierError::InvalidPostprocess(format!(
                "window {} must be odd",
                self.window
            )));
        }
        if self.neighbors == 0 || self.neighbors > self.window * self.window {
            return Err(ClassifierError::InvalidPostprocess(format!(
                "neighbors {} must be in 1..={}",
                self.neighbors,
                self.window * self.window
            )));
        }
        Ok(())
    }
}

/// Predicted class (1-based) for every pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    height: usize,
    width: usize,
    predicted: Vec<u16>,
}

impl ClassMap {
    pub fn new(height: usize, width: usize, predicted: Vec<u16>) -> Result<Self, ClassifierError> {
        if predicted.len() != height * width {
            return Err(ClassifierError::DimensionMismatch(format!(
                "{} predictions for {height}x{width}",
                predicted.len()
            )));
        }
        Ok(Self {
            height,
            width,
            predicted,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.predicted[row * self.width + col]
    }

    pub fn predicted(&self) -> &[u16] {
        &self.predicted
    }

    /// Binary PGM (P5). 8-bit when every value fits, 16-bit big-endian otherwise.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.predicted.iter().copied().max().unwrap_or(0).max(1);
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, max).into_bytes();
        if max < 256 {
            out.extend(self.predicted.iter().map(|&p| p as u8));
        } else {
            out.extend(self.predicted.iter().flat_map(|p| p.to_be_bytes()));
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), ClassifierError> {
        let mut f = fs::File::create(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        f.write_all(&self.to_pgm()).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_pgm(path: &Path) -> Result<Self, ClassifierError> {
        let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_pgm(&bytes).map_err(|reason| ClassifierError::Format {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, String> {
        let mut pos = 0;
        let mut token = || -> Result<String, String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("unexpected end of header".into());
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err("not a binary PGM".into());
        }
        let num = |s: String| s.parse::<usize>().map_err(|e| format!("bad header field: {e}"));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let max = num(token()?)?;
        // exactly one whitespace byte separates the header from the raster
        let start = pos + 1;
        let body = bytes.get(start..).ok_or("missing raster")?;
        let predicted: Vec<u16> = if max < 256 {
            body.iter().map(|&b| u16::from(b)).collect()
        } else {
            body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        if predicted.len() != width * height {
            return Err(format!("expected {} pixels, found {}", width * height, predicted.len()));
        }
        Ok(Self {
            height,
            width,
            predicted,
        })
    }
}

/// Unmixing result and class residuals of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelUnmix {
    pub result: UnmixResult,
    pub residuals: Vec<f64>,
}

/// Unmixes a single spectrum against a dictionary whose Gram is already known.
pub fn unmix_pixel(
    y: &[f64],
    dict: &Dictionary,
    gram: &GramBundle,
    spec: &KernelSpec,
    mode: WeightMode,
    cfg: &SolverConfig,
) -> Result<PixelUnmix, PixelError> {
    let g = cross_vector(spec, dict, y)?;
    let k_yy = spec.self_kernel(y);
    let gamma = pixel_weights(mode, dict, gram.self_k_columns(), y, &g, k_yy)?;
    let result = admm_weighted_sunsal(gram, &g, k_yy, &gamma, cfg)?;
    let residuals = dict
        .class_ranges()
        .iter()
        .map(|r| class_residual(gram, &g, k_yy, &result.x, r.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PixelUnmix { result, residuals })
}

/// Error from a single pixel, before it is annotated with coordinates.
#[derive(Debug, Error)]
pub enum PixelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub fn unmix_scene(
    cube: &HsiCube,
    dict: &Dictionary,
    spec: &KernelSpec,
    mode: WeightMode,
    cfg: &SolverConfig,
) -> Result<ResidualField, ClassifierError> {
    let gram = gram_matrix(spec, dict);
    unmix_scene_with_gram(cube, dict, &gram, spec, mode, cfg)
}

/// Same as [`unmix_scene`] with a precomputed Gram. Pixels are processed in
/// parallel; the output does not depend on the thread count.
pub fn unmix_scene_with_gram(
    cube: &HsiCube,
    dict: &Dictionary,
    gram: &GramBundle,
    spec: &KernelSpec,
    mode: WeightMode,
    cfg: &SolverConfig,
) -> Result<ResidualField, ClassifierError> {
    if cube.bands() != dict.band_count() {
        return Err(ClassifierError::BandMismatch {
            cube: cube.bands(),
            dict: dict.band_count(),
        });
    }
    spec.validate().map_err(|source| ClassifierError::Kernel { row: 0, col: 0, source })?;
    cfg.validate().map_err(|source| ClassifierError::Solver { row: 0, col: 0, source })?;
    let width = cube.width();
    let per_pixel: Vec<Vec<f64>> = (0..cube.pixel_count())
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / width, idx % width);
            match unmix_pixel(cube.pixel_at(idx), dict, gram, spec, mode, cfg) {
                Ok(p) => {
                    if !p.result.converged {
                        log::trace!("pixel ({row}, {col}) hit max_iter");
                    }
                    Ok(p.residuals)
                }
                Err(PixelError::Kernel(source)) => Err(ClassifierError::Kernel { row, col, source }),
                Err(PixelError::Solver(source)) => Err(ClassifierError::Solver { row, col, source }),
            }
        })
        .collect::<Result<_, _>>()?;
    let residuals = per_pixel.into_iter().flatten().collect();
    ResidualField::new(cube.height(), cube.width(), dict.class_count(), residuals)
}

/// Index of the smallest value, lowest index on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub fn raw_classify(field: &ResidualField) -> ClassMap {
    let predicted = (0..field.height * field.width)
        .map(|idx| argmin(field.pixel_at(idx)) as u16 + 1)
        .collect();
    ClassMap {
        height: field.height,
        width: field.width,
        predicted,
    }
}

/// The `count` window pixels closest in angle to the centre, measured by
/// `1 − cos` under `metric` (use [`KernelSpec::Linear`] for the original
/// spectral space). The centre scores 0; ties go to raster order.
pub fn select_neighbors(
    cube: &HsiCube,
    center: (usize, usize),
    window: usize,
    count: usize,
    metric: &KernelSpec,
) -> Vec<(usize, usize)> {
    let (cr, cc) = center;
    debug_assert!(window % 2 == 1 && cr < cube.height() && cc < cube.width());
    let half = window / 2;
    let y = cube.pixel(cr, cc);
    let kyy = metric.self_kernel(y);
    if !(kyy > 0.0) {
        log::warn!("zero spectrum at ({cr}, {cc}); using the centre pixel alone");
        return vec![center];
    }
    let mut scored: Vec<(f64, (usize, usize))> = Vec::with_capacity(window * window);
    for r in cr.saturating_sub(half)..(cr + half + 1).min(cube.height()) {
        for c in cc.saturating_sub(half)..(cc + half + 1).min(cube.width()) {
            if (r, c) == center {
                scored.push((0.0, center));
                continue;
            }
            let q = cube.pixel(r, c);
            let kqy = metric.eval_unchecked(q, y);
            match cosine_from_parts(kqy, metric.self_kernel(q), kyy) {
                Ok(cos) => scored.push((1.0 - cos, (r, c))),
                Err(_) => log::warn!("zero spectrum at ({r}, {c}) skipped"),
            }
        }
    }
    // stable: equal scores keep raster order
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(count);
    scored.into_iter().map(|(_, p)| p).collect()
}

pub fn spatial_postprocess(
    field: &ResidualField,
    cube: &HsiCube,
    pc: &PostprocessConfig,
    metric: &KernelSpec,
) -> Result<ClassMap, ClassifierError> {
    pc.validate()?;
    if field.height != cube.height() || field.width != cube.width() {
        return Err(ClassifierError::DimensionMismatch(format!(
            "residual field {}x{} vs cube {}x{}",
            field.height,
            field.width,
            cube.height(),
            cube.width()
        )));
    }
    let width = field.width;
    let predicted = (0..field.height * width)
        .into_par_iter()
        .map(|idx| {
            let center = (idx / width, idx % width);
            let mut sums = vec![0.0; field.class_count];
            for (r, c) in select_neighbors(cube, center, pc.window, pc.neighbors, metric) {
                for (s, v) in sums.iter_mut().zip(field.pixel(r, c)) {
                    *s += v;
                }
            }
            argmin(&sums) as u16 + 1
        })
        .collect();
    Ok(ClassMap {
        height: field.height,
        width,
        predicted,
    })
}
