//! Scene ingestion: hyperspectral cubes, ground-truth label maps, stratified
//! train/test splits and dictionary construction.
//!
//! On disk a cube is raw band-sequential little-endian `f32` with a sidecar
//! text header of `key=value` lines (`height`, `width`, `bands`, optionally
//! `dtype=float32`). In memory the cube is pixel-interleaved so that a
//! pixel's spectrum is a contiguous slice.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Water absorption bands removed from AVIRIS Indian Pines (1-indexed).
pub const INDIAN_PINES_WATER_BANDS: [usize; 20] = [
    104, 105, 106, 107, 108, 150, 151, 152, 153, 154, 155, 156, 157, 158, 159, 160, 161, 162,
    163, 220,
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("header: {0}")]
    Header(String),
    #[error("size mismatch: expected {expected} values/bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("non-finite value at pixel ({row}, {col}), band {band}")]
    NonFiniteValue { row: usize, col: usize, band: usize },
    #[error("dimension mismatch: expected {expected_h}x{expected_w}, found {found}")]
    DimensionMismatch {
        expected_h: usize,
        expected_w: usize,
        found: String,
    },
    #[error("negative label {value} at line {line}")]
    NegativeLabel { value: i64, line: usize },
    #[error("unparseable label {token:?} at line {line}")]
    BadLabel { token: String, line: usize },
    #[error("classes are not contiguous: class {missing} absent but {max} present")]
    NonContiguousClasses { missing: u16, max: u16 },
    #[error("band {band} out of range 1..={bands}")]
    BandOutOfRange { band: usize, bands: usize },
    #[error("split fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("class {0} has no labeled pixels")]
    EmptyClass(u16),
    #[error("training set is empty")]
    EmptyDictionary,
    #[error("pixel ({row}, {col}) is inconsistent with the label map: {reason}")]
    InconsistentSplit {
        row: usize,
        col: usize,
        reason: &'static str,
    },
    #[error("prefilter window must be odd and >= 1, got {0}")]
    EvenWindow(usize),
    #[error("split file line {line}: {reason}")]
    SplitFormat { line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Hyperspectral scene, `height × width × bands`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    /// Pixel-interleaved: `(row * width + col) * bands + band`.
    values: Vec<f64>,
}

impl HsiCube {
    /// Builds a cube from pixel-interleaved values.
    pub fn from_pixels(
        height: usize,
        width: usize,
        bands: usize,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let expected = height * width * bands;
        if values.len() != expected || expected == 0 {
            return Err(DataError::SizeMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let pix = i / bands;
            return Err(DataError::NonFiniteValue {
                row: pix / width,
                col: pix % width,
                band: i % bands,
            });
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.values[start..start + self.bands]
    }

    /// Spectrum of the pixel with raster index `idx`.
    pub fn pixel_at(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.bands..(idx + 1) * self.bands]
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(row * self.width + col) * self.bands + band]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scales every pixel to unit L2 norm; zero pixels are left untouched.
    pub fn normalize_pixels(&mut self) {
        for px in self.values.chunks_exact_mut(self.bands) {
            let norm = px.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                px.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}

/// Dimensions parsed from a cube sidecar header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
}

impl CubeHeader {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut kv = BTreeMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DataError::Header(format!("expected key=value, got {line:?}")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        if let Some(dtype) = kv.get("dtype") {
            let d = dtype.to_ascii_lowercase();
            if d != "float32" && d != "f32" {
                return Err(DataError::Header(format!("unsupported dtype {dtype:?}")));
            }
        }
        let field = |name: &str| -> Result<usize, DataError> {
            kv.get(name)
                .ok_or_else(|| DataError::Header(format!("missing {name}")))?
                .parse()
                .map_err(|e| DataError::Header(format!("{name}: {e}")))
        };
        Ok(Self {
            height: field("height")?,
            width: field("width")?,
            bands: field("bands")?,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn render(&self) -> String {
        format!(
            "height={}\nwidth={}\nbands={}\ndtype=float32\n",
            self.height, self.width, self.bands
        )
    }
}

/// Reads a band-sequential little-endian `f32` cube.
pub fn load_cube(data_path: &Path, header: &CubeHeader) -> Result<HsiCube, DataError> {
    let bytes = fs::read(data_path).map_err(io_err(data_path))?;
    decode_cube(&bytes, header)
}

pub fn decode_cube(bytes: &[u8], header: &CubeHeader) -> Result<HsiCube, DataError> {
    let CubeHeader {
        height,
        width,
        bands,
    } = *header;
    let expected = height * width * bands * 4;
    if expected == 0 || bytes.len() != expected {
        return Err(DataError::SizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let pixels = height * width;
    let mut values = vec![0.0; pixels * bands];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let band = i / pixels;
        let pix = i % pixels;
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(DataError::NonFiniteValue {
                row: pix / width,
                col: pix % width,
                band,
            });
        }
        values[pix * bands + band] = f64::from(v);
    }
    HsiCube::from_pixels(height, width, bands, values)
}

/// Writes the cube as band-sequential `f32` plus its sidecar header.
pub fn write_cube(cube: &HsiCube, data_path: &Path, header_path: &Path) -> Result<(), DataError> {
    let mut out = BufWriter::new(fs::File::create(data_path).map_err(io_err(data_path))?);
    for band in 0..cube.bands {
        for pix in 0..cube.pixel_count() {
            let v = cube.values[pix * cube.bands + band] as f32;
            out.write_all(&v.to_le_bytes()).map_err(io_err(data_path))?;
        }
    }
    out.flush().map_err(io_err(data_path))?;
    let header = CubeHeader {
        height: cube.height,
        width: cube.width,
        bands: cube.bands,
    };
    fs::write(header_path, header.render()).map_err(io_err(header_path))
}

/// Ground truth; 0 is unlabeled, classes are `1..=class_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u16>,
    class_count: u16,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self, DataError> {
        if labels.len() != height * width {
            return Err(DataError::DimensionMismatch {
                expected_h: height,
                expected_w: width,
                found: format!("{} values", labels.len()),
            });
        }
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut present = vec![false; max as usize + 1];
        for &l in &labels {
            present[l as usize] = true;
        }
        if let Some(missing) = (1..=max).find(|&c| !present[c as usize]) {
            return Err(DataError::NonContiguousClasses { missing, max });
        }
        Ok(Self {
            height,
            width,
            labels,
            class_count: max,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Labeled pixel coordinates in raster order.
    pub fn labeled_pixels(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    /// Number of labeled pixels for each class, index 0 = class 1.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count as usize];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFormat {
    /// Whitespace-separated integers, row-major.
    Text,
    /// Little-endian `u16`, row-major.
    BinaryU16,
}

impl LabelFormat {
    /// `.bin`, `.raw` and `.u16` files are binary; anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("bin" | "raw" | "u16") => LabelFormat::BinaryU16,
            _ => LabelFormat::Text,
        }
    }
}

/// Loads a label grid of `height × width`, picking the format from the extension.
pub fn load_labels(path: &Path, height: usize, width: usize) -> Result<LabelMap, DataError> {
    match LabelFormat::from_path(path) {
        LabelFormat::Text => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_label_text(&text, height, width)
        }
        LabelFormat::BinaryU16 => {
            let bytes = fs::read(path).map_err(io_err(path))?;
            if bytes.len() != height * width * 2 {
                return Err(DataError::DimensionMismatch {
                    expected_h: height,
                    expected_w: width,
                    found: format!("{} bytes", bytes.len()),
                });
            }
            let labels = bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            LabelMap::new(height, width, labels)
        }
    }
}

pub fn parse_label_text(text: &str, height: usize, width: usize) -> Result<LabelMap, DataError> {
    let mut labels = Vec::with_capacity(height * width);
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != width {
            return Err(DataError::DimensionMismatch {
                expected_h: height,
                expected_w: width,
                found: format!("{} columns on line {}", tokens.len(), lineno + 1),
            });
        }
        for tok in tokens {
            let v: i64 = tok.parse().map_err(|_| DataError::BadLabel {
                token: tok.to_string(),
                line: lineno + 1,
            })?;
            if v < 0 {
                return Err(DataError::NegativeLabel {
                    value: v,
                    line: lineno + 1,
                });
            }
            let v = u16::try_from(v).map_err(|_| DataError::BadLabel {
                token: tok.to_string(),
                line: lineno + 1,
            })?;
            labels.push(v);
        }
        rows += 1;
    }
    if rows != height {
        return Err(DataError::DimensionMismatch {
            expected_h: height,
            expected_w: width,
            found: format!("{rows} rows"),
        });
    }
    LabelMap::new(height, width, labels)
}

pub fn write_labels_text(labels: &LabelMap, path: &Path) -> Result<(), DataError> {
    let mut out = String::new();
    for row in labels.labels.chunks_exact(labels.width) {
        let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Removes the listed 1-indexed bands, keeping the order of the rest.
pub fn remove_bands(cube: &HsiCube, bands: &[usize]) -> Result<HsiCube, DataError> {
    let mut drop = vec![false; cube.bands];
    for &b in bands {
        if b == 0 || b > cube.bands {
            return Err(DataError::BandOutOfRange {
                band: b,
                bands: cube.bands,
            });
        }
        drop[b - 1] = true;
    }
    let keep: Vec<usize> = (0..cube.bands).filter(|&b| !drop[b]).collect();
    let mut values = Vec::with_capacity(cube.pixel_count() * keep.len());
    for px in cube.values.chunks_exact(cube.bands) {
        values.extend(keep.iter().map(|&b| px[b]));
    }
    HsiCube::from_pixels(cube.height, cube.width, keep.len(), values)
}

/// Parses band lists such as `"104-108,150-163,220"`.
pub fn parse_band_list(spec: &str) -> Result<Vec<usize>, DataError> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || DataError::Header(format!("bad band range {part:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

/// Train/test partition of the labeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train_pixels: Vec<(usize, usize)>,
    pub test_pixels: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Number of training pixels drawn from a class of `size` pixels.
pub fn training_count(size: usize, fraction: f64) -> usize {
    ((fraction * size as f64).round() as usize).clamp(1, size)
}

/// Per-class sampling without replacement using ChaCha8 seeded with `seed`.
///
/// Both output lists are ordered by class, then raster order.
pub fn stratified_split(
    labels: &LabelMap,
    fraction: f64,
    seed: u64,
) -> Result<SplitResult, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let mut by_class: Vec<Vec<(usize, usize)>> = vec![Vec::new(); labels.class_count as usize];
    for (r, c) in labels.labeled_pixels() {
        by_class[labels.get(r, c) as usize - 1].push((r, c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (ci, pixels) in by_class.iter().enumerate() {
        if pixels.is_empty() {
            return Err(DataError::EmptyClass(ci as u16 + 1));
        }
        let count = training_count(pixels.len(), fraction);
        let mut chosen = vec![false; pixels.len()];
        for i in index::sample(&mut rng, pixels.len(), count) {
            chosen[i] = true;
        }
        for (p, is_train) in pixels.iter().zip(chosen) {
            if is_train {
                train.push(*p);
            } else {
                test.push(*p);
            }
        }
    }
    Ok(SplitResult {
        train_pixels: train,
        test_pixels: test,
        seed,
    })
}

pub fn write_split(split: &SplitResult, path: &Path) -> Result<(), DataError> {
    let mut out = format!("# seed {}\n", split.seed);
    for (r, c) in &split.train_pixels {
        out.push_str(&format!("{r} {c} train\n"));
    }
    for (r, c) in &split.test_pixels {
        out.push_str(&format!("{r} {c} test\n"));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_split(path: &Path) -> Result<SplitResult, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut split = SplitResult {
        train_pixels: Vec::new(),
        test_pixels: Vec::new(),
        seed: 0,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(seed) = rest.trim().strip_prefix("seed") {
                split.seed = seed.trim().parse().map_err(|_| DataError::SplitFormat {
                    line: i + 1,
                    reason: "bad seed".into(),
                })?;
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: &str| DataError::SplitFormat {
            line: i + 1,
            reason: reason.to_string(),
        };
        if fields.len() != 3 {
            return Err(bad("expected `row col train|test`"));
        }
        let r: usize = fields[0].parse().map_err(|_| bad("bad row"))?;
        let c: usize = fields[1].parse().map_err(|_| bad("bad col"))?;
        match fields[2] {
            "train" => split.train_pixels.push((r, c)),
            "test" => split.test_pixels.push((r, c)),
            _ => return Err(bad("role must be train or test")),
        }
    }
    Ok(split)
}

/// Training spectra as columns, grouped contiguously by class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    band_count: usize,
    /// Column-major: column `i` is `columns[i*k..(i+1)*k]`.
    columns: Vec<f64>,
    column_class: Vec<u16>,
    class_ranges: Vec<Range<usize>>,
}

impl Dictionary {
    /// Builds a dictionary from `(class, spectrum)` pairs; classes must be
    /// `1..=C` with every class present.
    pub fn from_columns(band_count: usize, mut entries: Vec<(u16, Vec<f64>)>) -> Result<Self, DataError> {
        if entries.is_empty() {
            return Err(DataError::EmptyDictionary);
        }
        entries.sort_by_key(|(c, _)| *c);
        let class_count = entries.last().map(|(c, _)| *c).unwrap_or(0);
        let mut columns = Vec::with_capacity(entries.len() * band_count);
        let mut column_class = Vec::with_capacity(entries.len());
        let mut class_ranges = vec![0..0; class_count as usize];
        for (i, (c, spectrum)) in entries.iter().enumerate() {
            if *c == 0 {
                return Err(DataError::EmptyClass(0));
            }
            if spectrum.len() != band_count {
                return Err(DataError::SizeMismatch {
                    expected: band_count,
                    actual: spectrum.len(),
                });
            }
            let range = &mut class_ranges[*c as usize - 1];
            if range.start == range.end {
                *range = i..i + 1;
            } else {
                range.end = i + 1;
            }
            columns.extend_from_slice(spectrum);
            column_class.push(*c);
        }
        if let Some(ci) = class_ranges.iter().position(|r| r.is_empty()) {
            return Err(DataError::EmptyClass(ci as u16 + 1));
        }
        Ok(Self {
            band_count,
            columns,
            column_class,
            class_ranges,
        })
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn column_count(&self) -> usize {
        self.column_class.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_ranges.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i * self.band_count..(i + 1) * self.band_count]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.columns.chunks_exact(self.band_count)
    }

    pub fn column_class(&self) -> &[u16] {
        &self.column_class
    }

    /// Column indices of class `class` (1-based).
    pub fn class_range(&self, class: u16) -> Range<usize> {
        self.class_ranges[class as usize - 1].clone()
    }

    pub fn class_ranges(&self) -> &[Range<usize>] {
        &self.class_ranges
    }
}

/// One dictionary column per training pixel.
pub fn build_dictionary(
    cube: &HsiCube,
    split: &SplitResult,
    labels: &LabelMap,
) -> Result<Dictionary, DataError> {
    if split.train_pixels.is_empty() {
        return Err(DataError::EmptyDictionary);
    }
    if labels.height != cube.height || labels.width != cube.width {
        return Err(DataError::DimensionMismatch {
            expected_h: cube.height,
            expected_w: cube.width,
            found: format!("{}x{} labels", labels.height, labels.width),
        });
    }
    let mut entries = Vec::with_capacity(split.train_pixels.len());
    for &(r, c) in &split.train_pixels {
        if r >= cube.height || c >= cube.width {
            return Err(DataError::InconsistentSplit {
                row: r,
                col: c,
                reason: "outside the image",
            });
        }
        let class = labels.get(r, c);
        if class == 0 {
            return Err(DataError::InconsistentSplit {
                row: r,
                col: c,
                reason: "training pixel is unlabeled",
            });
        }
        entries.push((class, cube.pixel(r, c).to_vec()));
    }
    let dict = Dictionary::from_columns(cube.bands, entries)?;
    if dict.class_count() != labels.class_count as usize {
        return Err(DataError::EmptyClass(dict.class_count() as u16 + 1));
    }
    Ok(dict)
}

/// Per-band box mean over a `window × window` neighbourhood clipped at the borders.
pub fn mean_prefilter(cube: &HsiCube, window: usize) -> Result<HsiCube, DataError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(DataError::EvenWindow(window));
    }
    let half = window / 2;
    let (h, w, b) = (cube.height, cube.width, cube.bands);
    let mut values = vec![0.0; cube.values.len()];
    for r in 0..h {
        let rows = r.saturating_sub(half)..(r + half + 1).min(h);
        for c in 0..w {
            let cols = c.saturating_sub(half)..(c + half + 1).min(w);
            let out = &mut values[(r * w + c) * b..(r * w + c + 1) * b];
            for rr in rows.clone() {
                for cc in cols.clone() {
                    for (o, v) in out.iter_mut().zip(cube.pixel(rr, cc)) {
                        *o += v;
                    }
                }
            }
            let count = (rows.len() * cols.len()) as f64;
            out.iter_mut().for_each(|o| *o /= count);
        }
    }
    HsiCube::from_pixels(h, w, b, values)
}
