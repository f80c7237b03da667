//! End-to-end runs: load a scene, split, unmix, classify, score, save.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    raw_classify, spatial_postprocess, unmix_scene, ClassMap, ClassifierError, PostprocessConfig,
    ResidualField,
};
use crate::data::{
    build_dictionary, load_cube, load_labels, mean_prefilter, read_split, remove_bands,
    stratified_split, write_split, CubeHeader, DataError, HsiCube, LabelMap, SplitResult,
};
use crate::kernel::{KernelError, KernelSpec};
use crate::metrics::{
    aggregate_trials, compute_metrics, confusion, MetricsError, MetricsReport, TrialAggregate,
};
use crate::solver::{SolverConfig, SolverError};
use crate::weights::WeightMode;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing input {what}: {path}")]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("output directory {path} is not writable: {source}")]
    OutputNotWritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<PipelineError>,
    },
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn at<T, E: Into<PipelineError>>(stage: &'static str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage {
        stage,
        source: Box::new(e.into()),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Space in which neighbour angles are measured during post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborSpace {
    #[default]
    Original,
    Kernel,
}

impl std::str::FromStr for NeighborSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(NeighborSpace::Original),
            "kernel" => Ok(NeighborSpace::Kernel),
            other => Err(format!("unknown neighbor space {other:?} (original | kernel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cube: Option<PathBuf>,
    pub header: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub train_fraction: f64,
    pub seed: u64,
    pub trials: usize,
    pub kernel: KernelSpec,
    pub weights: WeightMode,
    pub solver: SolverConfig,
    pub postprocess: PostprocessConfig,
    /// 1-based band indices dropped before anything else.
    pub remove_bands: Vec<usize>,
    /// Scale every pixel to unit Euclidean norm.
    pub normalize: bool,
    /// Box-mean prefilter window, applied after band removal.
    pub prefilter_window: Option<usize>,
    pub neighbor_space: NeighborSpace,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cube: None,
            header: None,
            labels: None,
            output_dir: PathBuf::from("out"),
            train_fraction: 0.1,
            seed: 0,
            trials: 1,
            kernel: KernelSpec::Linear,
            weights: WeightMode::Euclidean,
            solver: SolverConfig::default(),
            postprocess: PostprocessConfig::default(),
            remove_bands: Vec::new(),
            normalize: false,
            prefilter_window: None,
            neighbor_space: NeighborSpace::Original,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|source| PipelineError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks parameters only; see [`PipelineConfig::validate_io`] for paths.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| Err(PipelineError::Config(m));
        if self.trials == 0 {
            return cfg("trials must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return cfg(format!("train_fraction {} must be in (0, 1]", self.train_fraction));
        }
        if let Err(e) = self.kernel.validate() {
            return cfg(e.to_string());
        }
        if let Err(e) = self.solver.validate() {
            return cfg(e.to_string());
        }
        if let Err(e) = self.postprocess.validate() {
            return cfg(e.to_string());
        }
        if let Some(w) = self.prefilter_window {
            if w % 2 == 0 {
                return cfg(format!("prefilter_window {w} must be odd"));
            }
        }
        Ok(())
    }

    /// Input files exist and the output directory can be created and written.
    pub fn validate_io(&self) -> Result<(), PipelineError> {
        for (what, p) in [("cube", &self.cube), ("header", &self.header), ("labels", &self.labels)] {
            match p {
                None => return Err(PipelineError::Config(format!("no {what} path given"))),
                Some(path) if !path.is_file() => {
                    return Err(PipelineError::MissingInput {
                        what,
                        path: path.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        ensure_writable(&self.output_dir)
    }

    /// Kernel used for neighbour angles.
    pub fn neighbor_metric(&self) -> KernelSpec {
        match self.neighbor_space {
            NeighborSpace::Original => KernelSpec::Linear,
            NeighborSpace::Kernel => self.kernel,
        }
    }
}

fn ensure_writable(dir: &Path) -> Result<(), PipelineError> {
    let not_writable = |source| PipelineError::OutputNotWritable {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(not_writable)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(not_writable)?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

/// A cube with its ground truth, after band removal and preprocessing.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cube: HsiCube,
    pub labels: LabelMap,
}

impl Scene {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate_io()?;
        let header_path = cfg.header.as_deref().expect("checked by validate_io");
        let header = CubeHeader::read(header_path)?;
        let cube = load_cube(cfg.cube.as_deref().expect("checked by validate_io"), &header)?;
        let labels = load_labels(
            cfg.labels.as_deref().expect("checked by validate_io"),
            header.height,
            header.width,
        )?;
        Self::prepare(cube, labels, cfg)
    }

    /// Applies band removal, normalization and prefiltering from `cfg`.
    pub fn prepare(cube: HsiCube, labels: LabelMap, cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let mut cube = if cfg.remove_bands.is_empty() {
            cube
        } else {
            remove_bands(&cube, &cfg.remove_bands)?
        };
        if cfg.normalize {
            cube.normalize_pixels();
        }
        if let Some(w) = cfg.prefilter_window {
            cube = mean_prefilter(&cube, w)?;
        }
        if cube.height() != labels.height() || cube.width() != labels.width() {
            return Err(DataError::DimensionMismatch {
                expected_h: cube.height(),
                expected_w: cube.width(),
                found: format!("{}x{} labels", labels.height(), labels.width()),
            }
            .into());
        }
        Ok(Self { cube, labels })
    }
}

/// Everything produced by one random split.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub split: SplitResult,
    pub field: ResidualField,
    pub raw_map: ClassMap,
    pub post_map: ClassMap,
    pub raw_report: MetricsReport,
    pub post_report: MetricsReport,
}

pub fn score(map: &ClassMap, labels: &LabelMap, test: &[(usize, usize)]) -> Result<MetricsReport, PipelineError> {
    Ok(compute_metrics(&confusion(map, labels, test)?)?)
}

/// Splits with `seed`, builds the dictionary and unmixes the whole scene.
pub fn unmix_with_seed(
    scene: &Scene,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(SplitResult, ResidualField), PipelineError> {
    let split = at("split", stratified_split(&scene.labels, cfg.train_fraction, seed))?;
    let dict = at("dictionary", build_dictionary(&scene.cube, &split, &scene.labels))?;
    log::info!(
        "seed {seed}: {} training columns, {} test pixels",
        dict.column_count(),
        split.test_pixels.len()
    );
    let field = at("unmix", unmix_scene(&scene.cube, &dict, &cfg.kernel, cfg.weights, &cfg.solver))?;
    Ok((split, field))
}

pub fn run_trial(scene: &Scene, cfg: &PipelineConfig, seed: u64) -> Result<TrialOutcome, PipelineError> {
    cfg.validate()?;
    let (split, field) = unmix_with_seed(scene, cfg, seed)?;
    let raw_map = raw_classify(&field);
    let post_map = at(
        "postprocess",
        spatial_postprocess(&field, &scene.cube, &cfg.postprocess, &cfg.neighbor_metric()),
    )?;
    let raw_report = at("evaluate", score(&raw_map, &scene.labels, &split.test_pixels))?;
    let post_report = at("evaluate", score(&post_map, &scene.labels, &split.test_pixels))?;
    log::info!(
        "seed {seed}: OA raw {:.2}%, post {:.2}%",
        100.0 * raw_report.overall_accuracy,
        100.0 * post_report.overall_accuracy
    );
    Ok(TrialOutcome {
        split,
        field,
        raw_map,
        post_map,
        raw_report,
        post_report,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Last trial in full; earlier trials only contribute reports.
    pub last: TrialOutcome,
    pub raw: TrialAggregate,
    pub post: TrialAggregate,
}

/// Runs `cfg.trials` trials with seeds `cfg.seed, cfg.seed + 1, …`.
///
/// With `out_dir`, the directory is checked for writability before any
/// compute and the reports, the last trial's class maps and split, and the
/// effective config are written there.
pub fn run_experiment(
    scene: &Scene,
    cfg: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome, PipelineError> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        ensure_writable(dir)?;
    }
    let mut last = None;
    let mut raw = Vec::with_capacity(cfg.trials);
    let mut post = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let outcome = run_trial(scene, cfg, cfg.seed.wrapping_add(t as u64)).map_err(|e| {
            PipelineError::Trial {
                trial: t,
                source: Box::new(e),
            }
        })?;
        raw.push(outcome.raw_report.clone());
        post.push(outcome.post_report.clone());
        last = Some(outcome);
    }
    let outcome = ExperimentOutcome {
        last: last.expect("trials >= 1"),
        raw: aggregate_trials(&raw)?,
        post: aggregate_trials(&post)?,
    };
    if let Some(dir) = out_dir {
        write_experiment(&outcome, cfg, dir)?;
    }
    Ok(outcome)
}

fn write_experiment(outcome: &ExperimentOutcome, cfg: &PipelineConfig, dir: &Path) -> Result<(), PipelineError> {
    outcome.raw.save(&dir.join("metrics_raw.json"), &dir.join("metrics_raw.csv"))?;
    outcome.post.save(&dir.join("metrics_post.json"), &dir.join("metrics_post.csv"))?;
    outcome.last.raw_map.write_pgm(&dir.join("classmap_raw.pgm"))?;
    outcome.last.post_map.write_pgm(&dir.join("classmap_post.pgm"))?;
    write_split(&outcome.last.split, &dir.join("split.txt"))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(io_err(&config_path))?;
    Ok(())
}

/// One line of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub window: usize,
    pub neighbors: usize,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub windows: Vec<usize>,
    pub neighbors: Vec<usize>,
}

/// FNV-1a over every setting that changes the residual field.
fn unmix_fingerprint(cfg: &PipelineConfig) -> u64 {
    let key = format!(
        "{:?}|{:?}|{:?}|{}|{:?}|{}|{:?}|{}",
        cfg.kernel, cfg.weights, cfg.solver, cfg.train_fraction, cfg.remove_bands, cfg.normalize,
        cfg.prefilter_window, cfg.seed
    );
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Checkpoint file for the residual field of `cfg`.
pub fn checkpoint_path(dir: &Path, cfg: &PipelineConfig) -> PathBuf {
    dir.join(format!(
        "residuals_lambda_{:e}_{:016x}.rsdf",
        cfg.solver.lambda,
        unmix_fingerprint(cfg)
    ))
}

/// Unmixes once per λ and post-processes every valid `(N, M)` pair.
///
/// Residual fields are cached in `dir` under a name derived from every
/// unmixing setting; a cached field is reused only when its seed and shape
/// also match. Pairs with `M > N²` are skipped.
pub fn run_sweep(
    scene: &Scene,
    cfg: &PipelineConfig,
    grid: &SweepGrid,
    dir: &Path,
) -> Result<Vec<SweepRow>, PipelineError> {
    cfg.validate()?;
    ensure_writable(dir)?;
    let split = stratified_split(&scene.labels, cfg.train_fraction, cfg.seed)?;
    let metric = cfg.neighbor_metric();
    let mut rows = Vec::new();
    for &lambda in &grid.lambdas {
        let mut run_cfg = cfg.clone();
        run_cfg.solver.lambda = lambda;
        run_cfg.validate()?;
        let path = checkpoint_path(dir, &run_cfg);
        let cached = match ResidualField::read(&path) {
            Ok((field, seed))
                if seed == cfg.seed
                    && field.height() == scene.cube.height()
                    && field.width() == scene.cube.width()
                    && field.class_count() == scene.labels.class_count() as usize =>
            {
                log::info!("reusing {}", path.display());
                Some(field)
            }
            Ok(_) => {
                log::warn!("{} does not match this run; recomputing", path.display());
                None
            }
            Err(_) => None,
        };
        let field = match cached {
            Some(f) => f,
            None => {
                let (_, field) = unmix_with_seed(scene, &run_cfg, cfg.seed)?;
                field.write(&path, cfg.seed)?;
                field
            }
        };
        for &window in &grid.windows {
            for &neighbors in &grid.neighbors {
                let pc = PostprocessConfig { window, neighbors };
                if pc.validate().is_err() {
                    continue;
                }
                let map = spatial_postprocess(&field, &scene.cube, &pc, &metric)?;
                let r = score(&map, &scene.labels, &split.test_pixels)?;
                rows.push(SweepRow {
                    lambda,
                    window,
                    neighbors,
                    oa: r.overall_accuracy,
                    aa: r.average_accuracy,
                    kappa: r.kappa,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(MetricsError::from)?;
    for row in rows {
        w.serialize(row).map_err(MetricsError::from)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Scores a saved class map. Without a split file every labeled pixel is a test pixel.
pub fn evaluate_map(
    map_path: &Path,
    labels_path: &Path,
    split_path: Option<&Path>,
) -> Result<MetricsReport, PipelineError> {
    for (what, p) in [("class map", map_path), ("labels", labels_path)] {
        if !p.is_file() {
            return Err(PipelineError::MissingInput {
                what,
                path: p.to_path_buf(),
            });
        }
    }
    let map = ClassMap::read_pgm(map_path)?;
    let labels = load_labels(labels_path, map.height(), map.width())?;
    let test = match split_path {
        Some(p) => read_split(p)?.test_pixels,
        None => labels.labeled_pixels(),
    };
    score(&map, &labels, &test)
}

impl From<KernelError> for PipelineError {
    fn from(e: KernelError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<SolverError> for PipelineError {
    fn from(e: SolverError) -> Self {
        PipelineError::Config(e.to_string())
    }
}
