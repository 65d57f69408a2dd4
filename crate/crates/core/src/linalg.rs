//! Dense kernels for the small symmetric-positive-definite solves in the
//! per-sample update.
//!
//! The update rule needs one M×M system solve per sample, with M at most 8
//! in practice: the regularized weighted subband correlation matrix
//! (δ+τ)I_M + U_bᵀWU_b is formed, factored, and applied to one or two
//! right-hand sides. Everything here is sized for that loop: Cholesky with
//! triangular solves instead of explicit inversion, and `_into` variants
//! plus a reusable [`CholeskyWorkspace`] so the hot path performs no
//! allocation after setup.

use std::fmt;

/// Relative tolerance for the symmetry check in [`SpdMatrix::new`].
const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// A Cholesky pivot was zero, negative, or NaN. For the update-rule
    /// matrices this signals a corrupted input or a vanishing ridge.
    NotPositiveDefinite { pivot_index: usize },
    /// Constructor input violates symmetry beyond 1e-12 relative tolerance.
    NotSymmetric { row: usize, col: usize },
    /// An input's length or shape does not match the operation.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotPositiveDefinite { pivot_index } => {
                write!(f, "matrix is not positive definite (pivot {pivot_index})")
            }
            LinalgError::NotSymmetric { row, col } => {
                write!(f, "matrix is not symmetric at ({row}, {col})")
            }
            LinalgError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for LinalgError {}

/// Column-major rectangular matrix. Columns are contiguous, which is the
/// access pattern of every kernel here: the update rule walks U_b one band
/// (column) at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds from a column-major slice. Errors if the length is not rows·cols.
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Mat { rows, cols, data: data.to_vec() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.rows + row] = value;
    }

    /// Column as a contiguous slice.
    pub fn col(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn col_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }
}

/// Symmetric positive-definite matrix, row-major.
///
/// Symmetry is validated at construction (1e-12 relative tolerance);
/// positive-definiteness is validated at factor time, where it is
/// equivalent to every Cholesky pivot being strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SpdMatrix {
    /// Builds from row-major entries, checking shape and symmetry.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                let scale = a.abs().max(b.abs());
                if (a - b).abs() > SYMMETRY_RTOL * scale {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SpdMatrix { dim, entries })
    }

    /// Identity scaled by `value`, as a convenient SPD seed matrix.
    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = value;
        }
        SpdMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// y = A·x. Panics on shape mismatch (debug aid, not a user surface).
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let row = &self.entries[i * self.dim..(i + 1) * self.dim];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Forms ridge·I + U_bᵀ·diag(w)·U_b.
///
/// `u_b` is L×M (taps by bands), `w` has length L with every entry
/// positive, `ridge` is positive; the result is then positive definite by
/// construction. The upper triangle is computed and mirrored, so the output
/// is bitwise symmetric.
pub fn weighted_gram(u_b: &Mat, w: &[f64], ridge: f64) -> Result<SpdMatrix, LinalgError> {
    let mut out = SpdMatrix::scaled_identity(u_b.cols(), 0.0);
    weighted_gram_into(u_b, w, ridge, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`weighted_gram`]; `out` must be M×M.
pub fn weighted_gram_into(
    u_b: &Mat,
    w: &[f64],
    ridge: f64,
    out: &mut SpdMatrix,
) -> Result<(), LinalgError> {
    let (l, m) = (u_b.rows(), u_b.cols());
    if w.len() != l {
        return Err(LinalgError::DimensionMismatch { expected: l, got: w.len() });
    }
    if out.dim != m {
        return Err(LinalgError::DimensionMismatch { expected: m, got: out.dim });
    }
    debug_assert!(w.iter().all(|&x| x > 0.0), "weights must be positive");
    debug_assert!(ridge >= 0.0, "ridge must be nonnegative");
    for i in 0..m {
        let ci = u_b.col(i);
        for j in i..m {
            let cj = u_b.col(j);
            let mut acc = 0.0;
            for k in 0..l {
                acc += ci[k] * w[k] * cj[k];
            }
            if i == j {
                acc += ridge;
            }
            out.entries[i * m + j] = acc;
            out.entries[j * m + i] = acc;
        }
    }
    Ok(())
}

/// Reusable Cholesky factorization buffer.
///
/// `factorize` overwrites the internal lower-triangular factor; `solve_into`
/// then applies forward and backward substitution for as many right-hand
/// sides as needed. No allocation happens after construction, so one
/// workspace per adaptive filter keeps the sample loop allocation-free.
/// A workspace is single-threaded; use one instance per thread.
#[derive(Debug, Clone)]
pub struct CholeskyWorkspace {
    dim: usize,
    // Lower factor, row-major; entries above the diagonal are unused.
    l: Vec<f64>,
    factored: bool,
}

impl CholeskyWorkspace {
    pub fn new(dim: usize) -> Self {
        CholeskyWorkspace { dim, l: vec![0.0; dim * dim], factored: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cholesky-Banachiewicz factorization A = L·Lᵀ.
    ///
    /// Fails with `NotPositiveDefinite` on the first pivot that is not
    /// strictly positive (NaN pivots fail the same way).
    pub fn factorize(&mut self, a: &SpdMatrix) -> Result<(), LinalgError> {
        if a.dim != self.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.dim, got: a.dim });
        }
        self.factored = false;
        let n = self.dim;
        for i in 0..n {
            for j in 0..=i {
                let mut acc = a.entry(i, j);
                for k in 0..j {
                    acc -= self.l[i * n + k] * self.l[j * n + k];
                }
                if i == j {
                    if !(acc > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { pivot_index: i });
                    }
                    self.l[i * n + i] = acc.sqrt();
                } else {
                    self.l[i * n + j] = acc / self.l[j * n + j];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves A·x = b using the current factorization.
    ///
    /// `b` and `x` may be the same slice conceptually; `b` is copied into
    /// `x` first and the substitution runs in place.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) -> Result<(), LinalgError> {
        if !self.factored {
            return Err(LinalgError::NotPositiveDefinite { pivot_index: 0 });
        }
        let n = self.dim;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
        }
        if x.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: x.len() });
        }
        x.copy_from_slice(b);
        // Forward: L·y = b.
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * x[k];
            }
            x[i] = acc / self.l[i * n + i];
        }
        // Backward: Lᵀ·x = y.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc -= self.l[k * n + i] * x[k];
            }
            x[i] = acc / self.l[i * n + i];
        }
        Ok(())
    }
}

/// One-shot solve of A·x = b via Cholesky factorization.
pub fn cholesky_solve(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let mut ws = CholeskyWorkspace::new(a.dim());
    ws.factorize(a)?;
    let mut x = vec![0.0; a.dim()];
    ws.solve_into(b, &mut x)?;
    Ok(x)
}
