//! Per-pixel diagonal of the L1 weighting matrix Γ.
//!
//! A column far from the pixel gets a large weight and is penalised harder;
//! a close column gets a small weight. Raw distances are divided by their
//! mean so that a single λ serves pixels at any distance from the
//! dictionary, then floored at [`GAMMA_FLOOR`].

use serde::{Deserialize, Serialize};

use crate::data::Dictionary;
use crate::kernel::{cosine_from_parts, KernelError, KernelSpec};

/// Lower bound for every weight, keeps `μΓᵀΓ` from zeroing a Hessian diagonal.
pub const GAMMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Γ = I, plain SUnSAL.
    Identity,
    /// Euclidean distance between the pixel and each column.
    #[default]
    Euclidean,
    /// One minus the kernel-space cosine between the pixel and each column.
    KernelAngle,
}

impl std::str::FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(WeightMode::Identity),
            "euclidean" => Ok(WeightMode::Euclidean),
            "kernel-angle" => Ok(WeightMode::KernelAngle),
            other => Err(format!(
                "unknown weight mode {other:?} (identity | euclidean | kernel-angle)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaWeights(Vec<f64>);

impl GammaWeights {
    /// Wraps explicit weights. Entries must be finite and nonnegative.
    pub fn new(gamma: Vec<f64>) -> Self {
        assert!(gamma.iter().all(|g| g.is_finite() && *g >= 0.0));
        Self(gamma)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.0.iter().map(|g| g * c).collect())
    }
}

pub fn identity_weights(n: usize) -> GammaWeights {
    GammaWeights(vec![1.0; n])
}

/// `max(ε, raw_i / mean(raw))`, or all `ε` when every raw distance is zero.
pub fn normalize_distances(raw: &[f64]) -> GammaWeights {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if !(mean > 0.0) {
        log::warn!("pixel coincides with every dictionary column; using floor weights");
        return GammaWeights(vec![GAMMA_FLOOR; raw.len()]);
    }
    GammaWeights(raw.iter().map(|r| (r / mean).max(GAMMA_FLOOR)).collect())
}

pub fn euclidean_weights(dict: &Dictionary, y: &[f64]) -> Result<GammaWeights, KernelError> {
    if y.len() != dict.band_count() {
        return Err(KernelError::DimensionMismatch(dict.band_count(), y.len()));
    }
    let raw: Vec<f64> = dict
        .columns()
        .map(|a| a.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .collect();
    Ok(normalize_distances(&raw))
}

pub fn kernel_angle_weights(
    spec: &KernelSpec,
    dict: &Dictionary,
    y: &[f64],
) -> Result<GammaWeights, KernelError> {
    if y.len() != dict.band_count() {
        return Err(KernelError::DimensionMismatch(dict.band_count(), y.len()));
    }
    let kyy = spec.self_kernel(y);
    let raw = dict
        .columns()
        .map(|a| {
            let kay = crate::kernel::kernel_eval(spec, a, y)?;
            Ok(1.0 - cosine_from_parts(kay, spec.self_kernel(a), kyy)?)
        })
        .collect::<Result<Vec<f64>, KernelError>>()?;
    Ok(normalize_distances(&raw))
}

/// Dispatches on `mode`. Kernel values already computed for the pixel can be
/// passed in `cross` to avoid re-evaluating them.
pub fn pixel_weights(
    mode: WeightMode,
    dict: &Dictionary,
    self_k_columns: &[f64],
    y: &[f64],
    cross: &[f64],
    k_yy: f64,
) -> Result<GammaWeights, KernelError> {
    match mode {
        WeightMode::Identity => Ok(identity_weights(dict.column_count())),
        WeightMode::Euclidean => euclidean_weights(dict, y),
        WeightMode::KernelAngle => {
            let raw = cross
                .iter()
                .zip(self_k_columns)
                .map(|(&kay, &kaa)| Ok(1.0 - cosine_from_parts(kay, kaa, k_yy)?))
                .collect::<Result<Vec<f64>, KernelError>>()?;
            Ok(normalize_distances(&raw))
        }
    }
}
