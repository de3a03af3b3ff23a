//! Small dense linear-algebra kit: a row-major [`Matrix`], vector helpers,
//! Gram–Schmidt, and a one-sided Jacobi SVD.
//!
//! Everything here is sized for the factor matrices and matricizations this
//! crate works with (tens to a few thousand entries per side), so clarity wins
//! over blocking or SIMD.

use crate::error::{Error, Result};

/// Off-diagonal threshold for the Jacobi sweeps: a column pair is rotated while
/// `|<a_i, a_j>| > JACOBI_TOL * |a_i| |a_j|`.
pub const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self {
            rows: rows.len(),
            cols: ncols,
            data,
        })
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let mut m = Self::zeros(nrows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            m.set_column(j, c);
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| self.column(j)).collect();
        let mut m = Matrix::zeros(self.rows, idx.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        m
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch("matrix subtraction".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        dense_svd(self).sigma[0]
    }

    /// Largest entry of `|MᵀM − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let cols = self.columns();
        for i in 0..cols.len() {
            for j in i..cols.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normalizes in place and returns the original norm.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Sine of the acute angle between two nonzero vectors, in `[0, 1]`.
///
/// Computed as the average of the two residual norms `|û − c v̂|` and
/// `|v̂ − c û|` (with `c = <û, v̂>`), which avoids the cancellation of
/// `sqrt(1 − c²)` near zero and is symmetric in its arguments bit for bit.
/// Returns `None` when either input is zero.
pub fn sin_angle(u: &[f64], v: &[f64]) -> Option<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 || u.len() != v.len() {
        return None;
    }
    let c = dot(u, v) / (nu * nv);
    let r = |a: &[f64], na: f64, b: &[f64], nb: f64| {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let t = x / na - c * y / nb;
                t * t
            })
            .sum::<f64>()
            .sqrt()
    };
    let s = 0.5 * (r(u, nu, v, nv) + r(v, nv, u, nu));
    Some(s.clamp(0.0, 1.0))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes the components of `v` along each (unit) vector of `basis`, twice
/// over for numerical orthogonality.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

/// Extends `basis` (orthonormal vectors in R^dim) with standard-basis
/// directions until it has `target` vectors.
pub fn complete_basis(basis: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    let mut e = 0;
    while basis.len() < target && e < dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        project_out(&mut v, basis);
        if normalize(&mut v) > 1e-8 {
            basis.push(v);
        }
        e += 1;
    }
}

/// Thin SVD `M = U diag(sigma) Vᵀ`, singular values in descending order.
///
/// `U` is `m x k`, `V` is `n x k` with `k = min(m, n)`; both have orthonormal
/// columns even when `M` is rank deficient (null directions are completed).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let us = {
            let mut us = self.u.clone();
            for j in 0..us.cols() {
                for i in 0..us.rows() {
                    us[(i, j)] *= self.sigma[j];
                }
            }
            us
        };
        us.matmul(&self.v.transpose())
            .expect("shapes agree by construction")
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Column pairs are rotated until every pair is orthogonal to within
/// [`JACOBI_TOL`] relative to their norms.
pub fn dense_svd(m: &Matrix) -> Svd {
    if m.rows() < m.cols() {
        let t = dense_svd(&m.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (rows, n) = (m.rows(), m.cols());
    let mut a = m.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms[order[0]];
    let cutoff = smax * 1e-15 * (rows.max(n) as f64);

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut vcols = Vec::with_capacity(n);
    let mut null_slots = 0;
    for &k in &order {
        if norms[k] > cutoff && norms[k] > 0.0 {
            ucols.push(a[k].iter().map(|x| x / norms[k]).collect());
            sigma.push(norms[k]);
        } else {
            sigma.push(0.0);
            null_slots += 1;
        }
        vcols.push(v[k].clone());
    }
    if null_slots > 0 {
        complete_basis(&mut ucols, rows, n);
    }
    Svd {
        u: Matrix::from_columns(&ucols).expect("equal lengths"),
        sigma,
        v: Matrix::from_columns(&vcols).expect("equal lengths"),
    }
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Orthonormalizes the columns of `m` in order (modified Gram–Schmidt with
/// one reorthogonalization pass). Columns that become numerically dependent
/// are replaced by completion directions.
pub fn gram_schmidt(m: &Matrix) -> Matrix {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(m.cols());
    let mut dependent = Vec::new();
    for j in 0..m.cols() {
        let mut c = m.column(j);
        let scale = norm(&c);
        project_out(&mut c, &out);
        if scale > 0.0 && normalize(&mut c) > 1e-10 * scale {
            out.push(c);
        } else {
            dependent.push(out.len());
            out.push(Vec::new());
        }
    }
    if !dependent.is_empty() {
        let mut basis: Vec<Vec<f64>> = out.iter().filter(|c| !c.is_empty()).cloned().collect();
        let have = basis.len();
        complete_basis(&mut basis, m.rows(), have + dependent.len());
        for (slot, extra) in dependent.iter().zip(basis.drain(have..)) {
            out[*slot] = extra;
        }
    }
    Matrix::from_columns(&out).expect("equal lengths")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut s = seed;
        let data = (0..rows * cols)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        Matrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn svd_of_identity_is_all_ones() {
        let svd = dense_svd(&Matrix::identity(4));
        assert!(svd.sigma.iter().all(|s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn svd_reconstructs_random_5x3() {
        let m = lcg_matrix(5, 3, 7);
        let svd = dense_svd(&m);
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err <= 1e-10 * m.frobenius_norm(), "err {err}");
        assert!(svd.u.orthonormality_defect() < 1e-10);
        assert!(svd.v.orthonormality_defect() < 1e-10);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_handles_wide_and_rank_deficient() {
        let col = [1.0, 2.0, -1.0];
        let m = Matrix::from_columns(&[col.to_vec(), col.iter().map(|x| 2.0 * x).collect()])
            .unwrap()
            .transpose();
        let svd = dense_svd(&m);
        assert_eq!(svd.u.rows(), 2);
        assert!(svd.sigma[1].abs() < 1e-12);
        assert!(svd.u.orthonormality_defect() < 1e-12);
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn bhatia_pair_difference_norm() {
        // diag(1+d, 1-d) against [[1, d], [d, 1]]: the difference has norm sqrt(2) d.
        let d = 0.01;
        let t = Matrix::diag(&[1.0 + d, 1.0 - d]);
        let tt = Matrix::from_rows(&[vec![1.0, d], vec![d, 1.0]]).unwrap();
        let n = t.sub(&tt).unwrap().spectral_norm();
        assert!((n - 2f64.sqrt() * d).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_replaces_dependent_columns() {
        let m = Matrix::from_columns(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]).unwrap();
        let q = gram_schmidt(&m);
        assert!(q.orthonormality_defect() < 1e-12);
    }
}
