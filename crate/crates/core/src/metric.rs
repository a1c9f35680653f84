//! Affine-invariant Riemannian distance between SPD matrices.
//!
//! `d(A, B) = sqrt(sum_i ln^2(lambda_i))` where `lambda_i` are the generalized
//! eigenvalues of the pencil `(A, B)`. With `A = L L^T` they are the ordinary
//! eigenvalues of `L^-1 B L^-T`, which is what is computed here.

use nalgebra::{Cholesky, DMatrix};

use crate::descriptor::MultiscaleDescriptor;
use crate::{Error, Result};

/// Generalized eigenvalues below this are clamped before taking logarithms.
const EIGEN_FLOOR: f64 = 1e-300;

/// Symmetric positive-definite matrix with its inverse Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    /// `L^-1` for `matrix = L L^T`.
    inv_chol: DMatrix<f64>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl SpdMatrix {
    /// Validates symmetry (relative tolerance 1e-12) and positive definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = matrix.amax().max(1.0);
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        let inv_chol = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { matrix, inv_chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)])
            .collect()
    }

    /// Rebuilds a matrix from its row-major upper triangle.
    pub fn from_upper_triangle(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: dim * (dim + 1) / 2,
            });
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = values.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().expect("length checked above");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }
}

fn canonical_order(a: &SpdMatrix, b: &SpdMatrix) -> std::cmp::Ordering {
    a.matrix
        .iter()
        .zip(b.matrix.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Riemannian (geodesic) distance between two SPD matrices.
pub fn riemannian_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.matrix == b.matrix {
        return Ok(0.0);
    }
    // Whiten with a canonical member of the pair so that d(A, B) and d(B, A)
    // are bit-identical.
    let (a, b) = if canonical_order(a, b).is_le() { (a, b) } else { (b, a) };
    let mut whitened = &a.inv_chol * &b.matrix * a.inv_chol.transpose();
    let n = whitened.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (whitened[(i, j)] + whitened[(j, i)]);
            whitened[(i, j)] = v;
            whitened[(j, i)] = v;
        }
    }
    let eigenvalues = whitened.symmetric_eigenvalues();
    let sum_sq: f64 = eigenvalues
        .iter()
        .map(|&l| {
            let ln = l.max(EIGEN_FLOOR).ln();
            ln * ln
        })
        .sum();
    if !sum_sq.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(sum_sq.sqrt())
}

/// Distance at each scale, in scale order.
pub fn per_scale_distances(d1: &MultiscaleDescriptor, d2: &MultiscaleDescriptor) -> Result<Vec<f64>> {
    if d1.scales != d2.scales || d1.matrices.len() != d2.matrices.len() {
        return Err(Error::IncompatibleDescriptors(format!(
            "scale lists differ: {:?} vs {:?}",
            d1.scales, d2.scales
        )));
    }
    d1.matrices
        .iter()
        .zip(&d2.matrices)
        .map(|(a, b)| riemannian_distance(a.matrix(), b.matrix()))
        .collect()
}

/// Sum of the per-scale Riemannian distances.
pub fn multiscale_distance(d1: &MultiscaleDescriptor, d2: &MultiscaleDescriptor) -> Result<f64> {
    Ok(per_scale_distances(d1, d2)?.iter().sum())
}
