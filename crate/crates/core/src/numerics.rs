//! Dense symmetric positive-definite factorization.
//!
//! The solver factors one Hessian per pixel and then reuses the factor for
//! every ADMM iteration, so only a Cholesky factorization and the matching
//! triangular solves are needed here.

use thiserror::Error;

/// Relative tolerance used when validating symmetry.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SpdMatrix {
    /// Builds a matrix from row-major entries, checking shape and symmetry.
    ///
    /// Positive definiteness is only established by a successful
    /// [`cholesky_factor`].
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if dim == 0 {
            return Err(NumericsError::Empty);
        }
        if entries.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if !((a - b).abs() <= SYMMETRY_TOL * scale) {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    /// Skips the symmetry scan; callers build the matrix symmetrically.
    pub(crate) fn from_symmetric_unchecked(dim: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_to_diagonal(&mut self, value: f64) {
        for i in 0..self.dim {
            self.entries[i * self.dim + i] += value;
        }
    }

    /// Computes `H * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.dim)
            .map(|row| dot(row, x))
            .collect()
    }
}

/// Lower-triangular factor `L` with `L * Lᵀ = H`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `L[row][col]`; zero above the diagonal.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.lower[row * self.dim + col]
    }

    /// Solves `H x = f` into `out` without allocating.
    pub fn solve_into(&self, f: &[f64], out: &mut [f64]) -> Result<(), NumericsError> {
        let n = self.dim;
        if f.len() != n || out.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: if f.len() != n { f.len() } else { out.len() },
            });
        }
        // L z = f
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            out[i] = (f[i] - dot(row, &out[..i])) / self.lower[i * n + i];
        }
        // Lᵀ x = z, column sweep so that L is read row by row
        for i in (0..n).rev() {
            let xi = out[i] / self.lower[i * n + i];
            out[i] = xi;
            let row = &self.lower[i * n..i * n + i];
            for (o, l) in out[..i].iter_mut().zip(row) {
                *o -= l * xi;
            }
        }
        Ok(())
    }
}

/// Cholesky–Banachiewicz factorization of a symmetric matrix.
pub fn cholesky_factor(h: &SpdMatrix) -> Result<CholeskyFactor, NumericsError> {
    let n = h.dim;
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = lower.split_at_mut(i * n);
            let row_i = &tail[..j];
            let row_j: &[f64] = if i == j { row_i } else { &head[j * n..j * n + j] };
            let sum = h.entries[i * n + j] - dot(row_i, row_j);
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite { pivot: i, value: sum });
                }
                tail[j] = sum.sqrt();
            } else {
                tail[j] = sum / head[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: n, lower })
}

/// Solves `H x = f` given the factor of `H`.
pub fn cholesky_solve(factor: &CholeskyFactor, f: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let mut out = vec![0.0; factor.dim];
    factor.solve_into(f, &mut out)?;
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
