//! Kernel evaluation.
//!
//! The solver only ever sees kernel values: the Gram matrix of the dictionary
//! and the cross vector of a pixel against it. With [`KernelSpec::Linear`]
//! these are `AᵀA` and `Aᵀy`, so original-space unmixing is the linear-kernel
//! special case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dictionary;
use crate::numerics::dot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("spectra have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("rbf sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("zero self-kernel, cosine undefined")]
    ZeroNorm,
}

/// `Rbf` is `exp(-‖x - y‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    #[default]
    Linear,
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Rbf { sigma } => Err(KernelError::BadSigma(sigma)),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// `k(x, x)`; identically 1 for the RBF kernel.
    pub fn self_kernel(&self, x: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(x, x),
            KernelSpec::Rbf { .. } => 1.0,
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::DimensionMismatch(x.len(), y.len()));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Kernel Gram matrix of the dictionary columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBundle {
    n: usize,
    /// Row-major `n × n`.
    gram: Vec<f64>,
    self_k_columns: Vec<f64>,
}

impl GramBundle {
    /// Wraps an explicit symmetric Gram matrix.
    pub fn from_matrix(n: usize, gram: Vec<f64>) -> Self {
        assert_eq!(gram.len(), n * n, "gram must be n x n");
        let self_k_columns = (0..n).map(|i| gram[i * n + i]).collect();
        Self {
            n,
            gram,
            self_k_columns,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gram[i * self.n..(i + 1) * self.n]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.gram
    }

    pub fn self_k_columns(&self) -> &[f64] {
        &self.self_k_columns
    }
}

/// Upper triangle is evaluated and mirrored.
pub fn gram_matrix(spec: &KernelSpec, dict: &Dictionary) -> GramBundle {
    let n = dict.column_count();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        let ai = dict.column(i);
        for j in i..n {
            let v = spec.eval_unchecked(ai, dict.column(j));
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    GramBundle::from_matrix(n, gram)
}

/// `g[i] = k(a_i, y)`.
pub fn cross_vector(spec: &KernelSpec, dict: &Dictionary, y: &[f64]) -> Result<Vec<f64>, KernelError> {
    if y.len() != dict.band_count() {
        return Err(KernelError::DimensionMismatch(dict.band_count(), y.len()));
    }
    Ok(dict.columns().map(|a| spec.eval_unchecked(a, y)).collect())
}

/// Cosine of the angle between `Φ(x)` and `Φ(y)`, clamped to `[-1, 1]`.
pub fn kernel_cosine(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    let kxy = kernel_eval(spec, x, y)?;
    cosine_from_parts(kxy, spec.self_kernel(x), spec.self_kernel(y))
}

pub(crate) fn cosine_from_parts(kxy: f64, kxx: f64, kyy: f64) -> Result<f64, KernelError> {
    if !(kxx > 0.0 && kyy > 0.0) {
        return Err(KernelError::ZeroNorm);
    }
    Ok((kxy / (kxx * kyy).sqrt()).clamp(-1.0, 1.0))
}
