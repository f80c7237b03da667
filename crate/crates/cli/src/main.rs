//! `wsunsal`: classify hyperspectral scenes by weighted sparse unmixing.
//!
//! Settings come from an optional TOML file, then environment variables
//! (input and output paths only), then flags. Later sources win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wsunsal::classifier::PostprocessConfig;
use wsunsal::data::{parse_band_list, INDIAN_PINES_WATER_BANDS};
use wsunsal::kernel::KernelSpec;
use wsunsal::metrics::{MetricsReport, TrialAggregate};
use wsunsal::pipeline::{
    evaluate_map, run_experiment, run_sweep, write_sweep_csv, NeighborSpace, PipelineConfig, Scene, SweepGrid,
};
use wsunsal::weights::WeightMode;

#[derive(Parser)]
#[command(name = "wsunsal", version, about = "Hyperspectral classification by weighted sparse unmixing")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write every output.
    Classify(RunArgs),
    /// Run several trials and write aggregate reports.
    Trials {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Grid over λ, window and neighbour count, reusing residual checkpoints.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        /// Comma-separated odd window sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        windows: Vec<usize>,
        /// Comma-separated neighbour counts.
        #[arg(long = "neighbor-counts", value_delimiter = ',', required = true)]
        neighbor_counts: Vec<usize>,
    },
    /// Score a saved class map against ground truth.
    Evaluate {
        /// Class map written by `classify` or `trials` (PGM).
        #[arg(long)]
        map: PathBuf,
        #[arg(long, env = "WSUNSAL_LABELS")]
        labels: PathBuf,
        /// Split file; without it every labeled pixel is scored.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Directory for metrics.json and metrics.csv.
        #[arg(long, env = "WSUNSAL_OUTPUT")]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Args)]
struct RunArgs {
    /// Cube data, band-sequential little-endian float32.
    #[arg(long, env = "WSUNSAL_CUBE")]
    cube: Option<PathBuf>,
    /// Cube header with height, width and bands.
    #[arg(long, env = "WSUNSAL_HEADER")]
    header: Option<PathBuf>,
    /// Ground truth: text grid, or raw u16 for .bin/.raw/.u16.
    #[arg(long, env = "WSUNSAL_LABELS")]
    labels: Option<PathBuf>,
    #[arg(long, env = "WSUNSAL_OUTPUT")]
    output: Option<PathBuf>,
    /// Fraction of each class used for training.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// RBF width; required with `--kernel rbf` unless set in the config.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    weights: Option<WeightMode>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Constrain abundances to be nonnegative.
    #[arg(long)]
    positivity: bool,
    /// Postprocessing window N (odd).
    #[arg(long)]
    window: Option<usize>,
    /// Postprocessing neighbour count M.
    #[arg(long)]
    neighbors: Option<usize>,
    /// 1-based bands to drop, e.g. `104-108,150-163,220`.
    #[arg(long)]
    remove_bands: Option<String>,
    /// Drop the Indian Pines water-absorption bands.
    #[arg(long, conflicts_with = "remove_bands")]
    water_bands: bool,
    /// Scale every pixel to unit norm.
    #[arg(long)]
    normalize: bool,
    /// Box-mean prefilter window (odd).
    #[arg(long)]
    prefilter: Option<usize>,
    #[arg(long)]
    neighbor_space: Option<NeighborSpace>,
}

impl RunArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        if self.cube.is_some() {
            cfg.cube = self.cube.clone();
        }
        if self.header.is_some() {
            cfg.header = self.header.clone();
        }
        if self.labels.is_some() {
            cfg.labels = self.labels.clone();
        }
        set!(cfg.output_dir, self.output);
        set!(cfg.train_fraction, self.fraction);
        set!(cfg.seed, self.seed);
        set!(cfg.weights, self.weights);
        set!(cfg.solver.lambda, self.lambda);
        set!(cfg.solver.mu, self.mu);
        set!(cfg.solver.max_iter, self.max_iter);
        set!(cfg.solver.tol, self.tol);
        set!(cfg.neighbor_space, self.neighbor_space);
        if self.positivity {
            cfg.solver.positivity = true;
        }
        if self.normalize {
            cfg.normalize = true;
        }
        if let Some(w) = self.prefilter {
            cfg.prefilter_window = Some(w);
        }
        let pp = &mut cfg.postprocess;
        *pp = PostprocessConfig {
            window: self.window.unwrap_or(pp.window),
            neighbors: self.neighbors.unwrap_or(pp.neighbors),
        };
        if let Some(list) = &self.remove_bands {
            cfg.remove_bands = parse_band_list(list)?;
        }
        if self.water_bands {
            cfg.remove_bands = INDIAN_PINES_WATER_BANDS.to_vec();
        }
        cfg.kernel = match (self.kernel, self.sigma, cfg.kernel) {
            (Some(KernelKind::Linear), _, _) => KernelSpec::Linear,
            (Some(KernelKind::Rbf), Some(sigma), _) => KernelSpec::Rbf { sigma },
            (Some(KernelKind::Rbf), None, KernelSpec::Rbf { sigma }) => KernelSpec::Rbf { sigma },
            (Some(KernelKind::Rbf), None, KernelSpec::Linear) => bail!("--kernel rbf needs --sigma"),
            (None, Some(sigma), KernelSpec::Rbf { .. }) => KernelSpec::Rbf { sigma },
            (None, Some(_), KernelSpec::Linear) => bail!("--sigma only applies to the rbf kernel"),
            (None, None, k) => k,
        };
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::from_toml_file(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn print_report(label: &str, r: &MetricsReport) {
    println!(
        "{label:>5}  OA {:6.2}%  AA {:6.2}%  kappa {:.4}",
        100.0 * r.overall_accuracy,
        100.0 * r.average_accuracy,
        r.kappa
    );
}

fn print_aggregate(label: &str, a: &TrialAggregate) {
    print_report(label, &a.mean_report);
    if a.trial_count > 1 {
        println!("{:>5}  std OA {:.2}% over {} trials", "", 100.0 * a.std_oa, a.trial_count);
    }
}

fn experiment(cfg: &PipelineConfig, with_residuals: bool) -> Result<()> {
    cfg.validate()?;
    let scene = Scene::load(cfg).context("loading scene")?;
    let out = run_experiment(&scene, cfg, Some(&cfg.output_dir))?;
    if with_residuals {
        out.last.field.write(&cfg.output_dir.join("residuals.rsdf"), out.last.split.seed)?;
    }
    print_aggregate("raw", &out.raw);
    print_aggregate("post", &out.post);
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Classify(run) => {
            let mut cfg = load_config(cli.config.as_deref())?;
            run.apply(&mut cfg)?;
            cfg.trials = 1;
            experiment(&cfg, true)
        }
        Command::Trials { run, trials } => {
            let mut cfg = load_config(cli.config.as_deref())?;
            run.apply(&mut cfg)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            experiment(&cfg, false)
        }
        Command::Sweep {
            run,
            lambdas,
            windows,
            neighbor_counts,
        } => {
            let mut cfg = load_config(cli.config.as_deref())?;
            run.apply(&mut cfg)?;
            cfg.validate()?;
            let scene = Scene::load(&cfg).context("loading scene")?;
            let grid = SweepGrid {
                lambdas,
                windows,
                neighbors: neighbor_counts,
            };
            let rows = run_sweep(&scene, &cfg, &grid, &cfg.output_dir)?;
            let path = cfg.output_dir.join("sweep.csv");
            write_sweep_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "lambda {:<8e} N {:>2} M {:>3}  OA {:6.2}%  kappa {:.4}",
                    r.lambda,
                    r.window,
                    r.neighbors,
                    100.0 * r.oa,
                    r.kappa
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Evaluate {
            map,
            labels,
            split,
            output,
        } => {
            let report = evaluate_map(&map, &labels, split.as_deref())?;
            print_report("map", &report);
            if let Some(dir) = output {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                report.save(&dir.join("metrics.json"), &dir.join("metrics.csv"))?;
                println!("outputs in {}", dir.display());
            }
            Ok(())
        }
    }
}
