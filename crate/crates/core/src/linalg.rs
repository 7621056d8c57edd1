//! Dense linear-algebra helpers: numerical rank, kernels, and subspaces
//! compared through principal angles.
//!
//! Every subspace is carried as an orthonormal basis matrix whose columns
//! span it. Rank decisions use a relative singular-value threshold.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative singular-value threshold used for rank and kernel decisions.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Singular values below this are treated as zero even when they are the
/// largest ones present (vanishing vector fields at fixed points).
pub const RANK_ABS_FLOOR: f64 = 1e-13;

/// Full SVD of `m` padded with zero rows so that the right singular vectors
/// form a complete basis of the column space of `m`'s domain.
fn padded_svd(m: &Matrix) -> (Vec<f64>, Matrix, Matrix) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    (svd.singular_values.iter().copied().collect(), u, v_t)
}

fn threshold(values: &[f64], rel_tol: f64) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    (rel_tol * max).max(RANK_ABS_FLOOR)
}

/// Numerical rank of `m` under the relative threshold `rel_tol`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let thr = threshold(sv.as_slice(), rel_tol);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis of the kernel of `m` (columns live in the domain of `m`).
pub fn null_space(m: &Matrix, rel_tol: f64) -> Matrix {
    let n = m.ncols();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    let (sv, _, v_t) = padded_svd(m);
    let thr = threshold(&sv, rel_tol);
    let kernel: Vec<usize> = (0..v_t.nrows()).filter(|&i| sv[i] <= thr).collect();
    let mut basis = Matrix::zeros(n, kernel.len());
    for (c, &i) in kernel.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

/// Smallest and largest singular values, in that order. Empty matrices give (0, 0).
pub fn singular_extremes(m: &Matrix) -> (f64, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0.0, 0.0);
    }
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// A linear subspace of `R^n`, stored as an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// The zero subspace of `R^n`.
    pub fn zero(n: usize) -> Self {
        Self {
            basis: Matrix::zeros(n, 0),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            basis: Matrix::identity(n, n),
        }
    }

    /// Span of the columns of `vectors` with rank decided at `rel_tol`.
    pub fn span_with_tol(vectors: &Matrix, rel_tol: f64) -> Self {
        let n = vectors.nrows();
        if vectors.ncols() == 0 {
            return Self::zero(n);
        }
        let svd = vectors.clone().svd(true, false);
        let u = svd.u.expect("u requested");
        let sv = svd.singular_values.as_slice();
        let thr = threshold(sv, rel_tol);
        let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thr).collect();
        let mut basis = Matrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            basis.set_column(c, &u.column(i));
        }
        Self { basis }
    }

    pub fn span(vectors: &Matrix) -> Self {
        Self::span_with_tol(vectors, RANK_REL_TOL)
    }

    pub fn from_vectors(n: usize, vectors: &[Vector]) -> Self {
        let mut m = Matrix::zeros(n, vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            m.set_column(i, v);
        }
        Self::span(&m)
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Annihilator, identified with the Euclidean orthogonal complement
    /// (covectors are stored as coordinate column vectors).
    pub fn annihilator(&self) -> Self {
        let n = self.ambient_dim();
        if self.dim() == 0 {
            return Self::full(n);
        }
        Self {
            basis: null_space(&self.basis.transpose(), RANK_REL_TOL),
        }
    }

    /// Image of the subspace under a linear map.
    pub fn image(&self, map: &Matrix) -> Self {
        Self::span(&(map * &self.basis))
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let n = self.ambient_dim();
        if self.dim() == 0 || other.dim() == 0 {
            return Self::zero(n);
        }
        let (a, b) = (self.dim(), other.dim());
        let mut stacked = Matrix::zeros(n, a + b);
        stacked.view_mut((0, 0), (n, a)).copy_from(&self.basis);
        stacked.view_mut((0, a), (n, b)).copy_from(&(-&other.basis));
        let kernel = null_space(&stacked, RANK_REL_TOL);
        if kernel.ncols() == 0 {
            return Self::zero(n);
        }
        let coeffs = kernel.rows(0, a).into_owned();
        Self::span(&(&self.basis * coeffs))
    }

    /// Distance of `v` from the subspace, relative to `|v|`.
    pub fn relative_residual(&self, v: &Vector) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm() / norm
    }

    /// Largest principal angle between two subspaces. Subspaces of different
    /// dimension are a right angle apart.
    pub fn max_angle(&self, other: &Self) -> f64 {
        assert_eq!(
            self.ambient_dim(),
            other.ambient_dim(),
            "ambient dimension mismatch"
        );
        if self.dim() != other.dim() {
            return std::f64::consts::FRAC_PI_2;
        }
        if self.dim() == 0 {
            return 0.0;
        }
        // sine of the largest angle is the norm of the part of `other` that
        // sticks out of `self`; accurate for tiny angles unlike the cosine route
        let residual = &other.basis - &self.basis * (self.basis.transpose() * &other.basis);
        let (_, smax) = singular_extremes(&residual);
        smax.min(1.0).asin()
    }
}

/// Write vectors as matrix columns.
pub fn columns(n: usize, vectors: &[Vector]) -> Matrix {
    let mut m = Matrix::zeros(n, vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        m.set_column(i, v);
    }
    m
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel_of_rank_deficient_matrix() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&m, RANK_REL_TOL), 2);
        let k = null_space(&m, RANK_REL_TOL);
        assert_eq!(k.ncols(), 1);
        assert!((&m * &k).norm() < 1e-12);
    }

    #[test]
    fn wide_matrix_kernel_has_full_dimension() {
        let m = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let k = null_space(&m, RANK_REL_TOL);
        assert_eq!(k.ncols(), 2);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(numerical_rank(&Matrix::zeros(4, 3), RANK_REL_TOL), 0);
        assert_eq!(Subspace::span(&Matrix::zeros(4, 3)).dim(), 0);
    }

    #[test]
    fn angle_between_lines() {
        let a = Subspace::from_vectors(2, &[Vector::from_vec(vec![1.0, 0.0])]);
        let b = Subspace::from_vectors(2, &[Vector::from_vec(vec![1.0, 1.0])]);
        assert!((a.max_angle(&b) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(a.max_angle(&a), 0.0);
    }

    #[test]
    fn intersection_of_planes_is_a_line() {
        let xy = Subspace::from_vectors(
            3,
            &[
                Vector::from_vec(vec![1.0, 0.0, 0.0]),
                Vector::from_vec(vec![0.0, 1.0, 0.0]),
            ],
        );
        let yz = Subspace::from_vectors(
            3,
            &[
                Vector::from_vec(vec![0.0, 1.0, 0.0]),
                Vector::from_vec(vec![0.0, 0.0, 1.0]),
            ],
        );
        let line = xy.intersection(&yz);
        let y = Subspace::from_vectors(3, &[Vector::from_vec(vec![0.0, 1.0, 0.0])]);
        assert_eq!(line.dim(), 1);
        assert!(line.max_angle(&y) < 1e-12);
    }

    #[test]
    fn annihilator_dimension_complements() {
        let s = Subspace::from_vectors(4, &[Vector::from_vec(vec![1.0, 2.0, 0.0, 1.0])]);
        let ann = s.annihilator();
        assert_eq!(ann.dim(), 3);
        assert!((s.basis().transpose() * ann.basis()).norm() < 1e-12);
        assert_eq!(Subspace::zero(3).annihilator().dim(), 3);
        assert_eq!(Subspace::full(3).annihilator().dim(), 0);
    }
}
