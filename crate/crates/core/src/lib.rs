//! Hyperspectral classification by adaptively weighted sparse unmixing.
//!
//! Each pixel is unmixed against a dictionary of training spectra with an
//! L1 penalty whose per-column weights grow with the distance between the
//! pixel and the column. Class residuals of the unmixing give a raw label,
//! and a neighbour-based residual fusion gives the spatial label.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod data;
pub mod kernel;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod solver;
pub mod synthetic;
pub mod weights;

pub use classifier::{
    raw_classify, select_neighbors, spatial_postprocess, unmix_scene, ClassMap, PostprocessConfig,
    ResidualField,
};
pub use data::{Dictionary, HsiCube, LabelMap, SplitResult};
pub use kernel::{GramBundle, KernelSpec};
pub use metrics::{compute_metrics, confusion, ConfusionMatrix, MetricsReport, TrialAggregate};
pub use pipeline::{PipelineConfig, PipelineError, Scene};
pub use solver::{admm_weighted_sunsal, SolverConfig, UnmixResult};
pub use weights::{GammaWeights, WeightMode};
