//! Weighted L1 SUnSAL.
//!
//! Solves
//!
//! ```text
//! min_x  ½‖Φ(A)x − Φ(y)‖² + λ‖Γx‖₁
//! ```
//!
//! by ADMM with the splitting `u = Γx`. Everything is expressed through the
//! kernel Gram `G = Φ(A)ᵀΦ(A)`, the cross vector `g = Φ(A)ᵀΦ(y)` and
//! `k_yy = ‖Φ(y)‖²`, so the same loop handles original and kernel space.
//!
//! One iteration, with `H = G + μΓᵀΓ` factored once per pixel:
//!
//! ```text
//! x ← H⁻¹(g + μΓ(u + d))
//! v ← Γx − d
//! u ← soft(v, λ/μ)           (optionally projected onto u ≥ 0)
//! d ← d − (Γx − u)
//! ```
//!
//! The loop stops when `‖Γx − u‖₂ ≤ tol·√n` and `μ‖Γ(u − u_prev)‖₂ ≤ tol·√n`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::GramBundle;
use crate::numerics::{cholesky_factor, dot, NumericsError, SpdMatrix};
use crate::weights::GammaWeights;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("negative threshold {0}")]
    NegativeThreshold(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-finite iterate at iteration {0}; try a different mu")]
    NonFiniteIterate(usize),
    #[error("empty class range")]
    EmptyClassRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub positivity: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            mu: 0.1,
            max_iter: 200,
            tol: 1e-4,
            positivity: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be finite and > 0");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        Ok(())
    }
}

/// Iterates of the splitting; `u = Γx` at convergence, `d` is the scaled dual.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub iteration: usize,
}

impl AdmmState {
    fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            u: vec![0.0; n],
            d: vec![0.0; n],
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixResult {
    pub x: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `sign(v)·max(|v| − t, 0)` elementwise.
pub fn soft_threshold(v: &[f64], t: f64) -> Result<Vec<f64>, SolverError> {
    if !(t >= 0.0) {
        return Err(SolverError::NegativeThreshold(t));
    }
    Ok(v.iter().map(|&x| shrink(x, t)).collect())
}

/// Soft threshold followed by projection onto the nonnegative orthant.
pub fn soft_threshold_nonneg(v: &[f64], t: f64) -> Result<Vec<f64>, SolverError> {
    if !(t >= 0.0) {
        return Err(SolverError::NegativeThreshold(t));
    }
    Ok(v.iter().map(|&x| shrink(x, t).max(0.0)).collect())
}

/// `½(xᵀGx − 2xᵀg + k_yy) + λ‖Γx‖₁`.
pub fn objective(gram: &GramBundle, g: &[f64], k_yy: f64, x: &[f64], gamma: &[f64], lambda: f64) -> f64 {
    let quad: f64 = (0..gram.dim()).map(|i| x[i] * dot(gram.row(i), x)).sum();
    let l1: f64 = x.iter().zip(gamma).map(|(xi, gi)| (gi * xi).abs()).sum();
    0.5 * (quad - 2.0 * dot(x, g) + k_yy) + lambda * l1
}

fn check_len(expected: usize, actual: usize) -> Result<(), SolverError> {
    if expected != actual {
        return Err(SolverError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn admm_weighted_sunsal(
    gram: &GramBundle,
    g: &[f64],
    k_yy: f64,
    gamma: &GammaWeights,
    cfg: &SolverConfig,
) -> Result<UnmixResult, SolverError> {
    cfg.validate()?;
    let n = gram.dim();
    check_len(n, g.len())?;
    check_len(n, gamma.len())?;
    let gamma = gamma.as_slice();
    let mu = cfg.mu;
    if !(k_yy >= 0.0 && k_yy.is_finite()) {
        return Err(SolverError::InvalidConfig(format!("k(y, y) = {k_yy} must be finite and >= 0")));
    }

    let mut h = gram.matrix().to_vec();
    for i in 0..n {
        h[i * n + i] += mu * gamma[i] * gamma[i];
    }
    let mut h = SpdMatrix::from_symmetric_unchecked(n, h);
    let factor = match cholesky_factor(&h) {
        Ok(f) => f,
        Err(NumericsError::NotPositiveDefinite { .. }) => {
            let ridge = 1e-8 * h.trace() / n as f64;
            log::debug!("hessian not positive definite, retrying with ridge {ridge:e}");
            h.add_to_diagonal(ridge);
            cholesky_factor(&h)?
        }
        Err(e) => return Err(e.into()),
    };

    let threshold = cfg.lambda / mu;
    let stop = cfg.tol * (n as f64).sqrt();
    let mut state = AdmmState::zeros(n);
    let mut rhs = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut u_prev = vec![0.0; n];
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    while state.iteration < cfg.max_iter {
        for i in 0..n {
            rhs[i] = g[i] + mu * gamma[i] * (state.u[i] + state.d[i]);
        }
        factor.solve_into(&rhs, &mut state.x)?;
        state.iteration += 1;
        if state.x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteIterate(state.iteration));
        }

        u_prev.copy_from_slice(&state.u);
        let (mut p2, mut d2) = (0.0, 0.0);
        for i in 0..n {
            gx[i] = gamma[i] * state.x[i];
            let v = gx[i] - state.d[i];
            let mut u = shrink(v, threshold);
            if cfg.positivity {
                u = u.max(0.0);
            }
            state.u[i] = u;
            state.d[i] -= gx[i] - u;
            p2 += (gx[i] - u) * (gx[i] - u);
            let du = gamma[i] * (u - u_prev[i]);
            d2 += du * du;
        }
        primal = p2.sqrt();
        dual = mu * d2.sqrt();
        if !(primal.is_finite() && dual.is_finite()) {
            return Err(SolverError::NonFiniteIterate(state.iteration));
        }
        if primal <= stop && dual <= stop {
            converged = true;
            break;
        }
    }

    Ok(UnmixResult {
        x: state.x,
        iterations_used: state.iteration,
        converged,
        final_primal_residual: primal,
        final_dual_residual: dual,
    })
}

/// Squared kernel-space reconstruction error using only the columns in
/// `class_range`: `x_cᵀGx_c − 2x_cᵀg + k_yy`, clamped at zero.
pub fn class_residual(
    gram: &GramBundle,
    g: &[f64],
    k_yy: f64,
    x: &[f64],
    class_range: Range<usize>,
) -> Result<f64, SolverError> {
    if class_range.is_empty() {
        return Err(SolverError::EmptyClassRange);
    }
    if class_range.end > gram.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: gram.dim(),
            actual: class_range.end,
        });
    }
    let xc = &x[class_range.clone()];
    let quad: f64 = class_range
        .clone()
        .zip(xc)
        .map(|(i, xi)| xi * dot(&gram.row(i)[class_range.clone()], xc))
        .sum();
    let cross = dot(xc, &g[class_range]);
    Ok((quad - 2.0 * cross + k_yy).max(0.0))
}
