//! Dense real symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-type shifts. The orthogonal factor is never formed
//! unless requested: the characteristic driver only needs a handful of its rows
//! and the localization statistics only need eigenvectors for the spectral bulk,
//! which are obtained by inverse iteration on the tridiagonal matrix.

mod householder;
mod inverse;
mod kernels;
mod ql;

pub use householder::Householder;
pub use inverse::tridiagonal_eigenvectors;
pub use ql::{ql_eigenvalues, ql_with_rows};

use crate::error::NumericalFailure;
use crate::scalar::Real;

/// Dense symmetric matrix, stored in full so that symmetry is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Real> SymMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn from_diagonal(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.n + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major data. Only the lower triangle is read;
    /// the upper triangle is overwritten by its mirror image.
    pub fn from_lower(n: usize, mut data: Vec<S>) -> Self {
        assert_eq!(data.len(), n * n, "dimension mismatch");
        for i in 0..n {
            for j in 0..i {
                data[j * n + i] = data[i * n + j];
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `v` to both `(i, j)` and `(j, i)` (once on the diagonal).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Frobenius norm, an upper bound on the spectral norm.
    pub fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn max_asymmetry(&self) -> S {
        let mut worst = S::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues (ascending) and eigenvectors stored column by column:
/// `vectors[i * n + x]` is component `x` of the `i`-th eigenvector.
#[derive(Debug, Clone)]
pub struct Eigen<S> {
    pub values: Vec<S>,
    pub vectors: Vec<S>,
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen<S: Real>(a: &SymMatrix<S>) -> Result<Eigen<S>, NumericalFailure> {
    let n = a.dim();
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let hh = Householder::reduce(a);
    let rows: Vec<usize> = (0..n).collect();
    let mut q = hh.q_rows(&rows);
    let mut d = hh.diag.clone();
    let mut e = hh.off.clone();
    ql_with_rows(&mut d, &mut e, &mut q, n)?;
    let order = ascending_order(&d);
    let values: Vec<S> = order.iter().map(|&i| d[i]).collect();
    // q holds rows indexed by site; transpose into eigenvector columns
    let mut vectors = vec![S::zero(); n * n];
    for x in 0..n {
        let row = &q[x * n..(x + 1) * n];
        for (slot, &i) in order.iter().enumerate() {
            vectors[slot * n + x] = row[i];
        }
    }
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues<S: Real>(a: &SymMatrix<S>) -> Result<Vec<S>, NumericalFailure> {
    let hh = Householder::reduce(a);
    let mut d = hh.diag.clone();
    let mut e = hh.off.clone();
    ql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
    Ok(d)
}

/// Eigenvalues (ascending) together with the eigenvector components at the
/// requested sites: `rows[k * n + i]` is `psi_i(sites[k])`.
pub fn symmetric_eigen_rows<S: Real>(
    a: &SymMatrix<S>,
    sites: &[usize],
) -> Result<(Vec<S>, Vec<S>), NumericalFailure> {
    let n = a.dim();
    let hh = Householder::reduce(a);
    let mut q = hh.q_rows(sites);
    let mut d = hh.diag.clone();
    let mut e = hh.off.clone();
    ql_with_rows(&mut d, &mut e, &mut q, n)?;
    let order = ascending_order(&d);
    let values = order.iter().map(|&i| d[i]).collect();
    let mut rows = vec![S::zero(); sites.len() * n];
    for k in 0..sites.len() {
        for (slot, &i) in order.iter().enumerate() {
            rows[k * n + slot] = q[k * n + i];
        }
    }
    Ok((values, rows))
}

/// Eigenvalues (ascending) plus eigenvectors for those eigenvalues accepted by
/// `select`. Returns the selected indices (into the ascending spectrum) and the
/// vectors stored one after another.
pub fn symmetric_eigen_selected<S: Real>(
    a: &SymMatrix<S>,
    select: impl Fn(S) -> bool,
) -> Result<SelectedEigen<S>, NumericalFailure> {
    let n = a.dim();
    let hh = Householder::reduce(a);
    let mut d = hh.diag.clone();
    let mut e = hh.off.clone();
    ql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
    let indices: Vec<usize> = (0..n).filter(|&i| select(d[i])).collect();
    let wanted: Vec<S> = indices.iter().map(|&i| d[i]).collect();
    let mut vectors = tridiagonal_eigenvectors(&hh.diag, &hh.off, &wanted);
    hh.apply_q(&mut vectors, wanted.len());
    Ok(SelectedEigen {
        values: d,
        indices,
        vectors,
    })
}

#[derive(Debug, Clone)]
pub struct SelectedEigen<S> {
    /// Full spectrum, ascending.
    pub values: Vec<S>,
    /// Indices into `values` for which a vector was computed.
    pub indices: Vec<usize>,
    /// `vectors[k * n..(k + 1) * n]` belongs to `values[indices[k]]`.
    pub vectors: Vec<S>,
}

fn ascending_order<S: Real>(d: &[S]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalue"));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64) -> SymMatrix<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, next());
            }
        }
        m
    }

    fn residual(a: &SymMatrix<f64>, lambda: f64, v: &[f64]) -> f64 {
        let av = a.mul_vec(v);
        av.iter()
            .zip(v)
            .map(|(x, y)| (x - lambda * y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn diagonal_input_gives_permuted_identity() {
        let a = SymMatrix::<f64>::from_diagonal(&[3.0, 1.0, 2.0]);
        let eig = symmetric_eigen(&a).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        let expect_site = [1, 2, 0];
        for (i, &x) in expect_site.iter().enumerate() {
            for y in 0..3 {
                let want = if y == x { 1.0 } else { 0.0 };
                assert!((eig.vectors[i * 3 + y].abs() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_by_two_swap() {
        let a = SymMatrix::<f64>::from_lower(2, vec![0.0, 0.0, 1.0, 0.0]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = &eig.vectors[0..2];
        let v1 = &eig.vectors[2..4];
        assert!((v0[0] * v0[1] + 0.5).abs() < 1e-15 && (v0[0].abs() - r).abs() < 1e-15);
        assert!((v1[0] * v1[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_matrix_residual_and_orthonormality() {
        let n = 60;
        let a = lcg_matrix(n, 7);
        let eig = symmetric_eigen(&a).unwrap();
        let norm = a.frobenius_norm();
        for i in 0..n {
            let v = &eig.vectors[i * n..(i + 1) * n];
            assert!(residual(&a, eig.values[i], v) <= 1e-12 * norm);
            for j in 0..=i {
                let w = &eig.vectors[j * n..(j + 1) * n];
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "({i},{j}) {dot}");
            }
        }
        let only = symmetric_eigenvalues(&a).unwrap();
        for (a, b) in only.iter().zip(&eig.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn selected_rows_match_full_vectors() {
        let n = 40;
        let a = lcg_matrix(n, 11);
        let eig = symmetric_eigen(&a).unwrap();
        let sites = [0, 17, 39];
        let (values, rows) = symmetric_eigen_rows(&a, &sites).unwrap();
        for i in 0..n {
            assert!((values[i] - eig.values[i]).abs() < 1e-13);
            for (k, &x) in sites.iter().enumerate() {
                // sign of an eigenvector is arbitrary; squared weights are not
                let w_full = eig.vectors[i * n + x].powi(2);
                let w_rows = rows[k * n + i].powi(2);
                assert!((w_full - w_rows).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_iteration_vectors_are_eigenvectors() {
        let n = 80;
        let a = lcg_matrix(n, 3);
        let norm = a.frobenius_norm();
        let sel = symmetric_eigen_selected(&a, |l| l.abs() < 0.6).unwrap();
        assert!(!sel.indices.is_empty());
        let k = sel.indices.len();
        for p in 0..k {
            let v = &sel.vectors[p * n..(p + 1) * n];
            assert!(residual(&a, sel.values[sel.indices[p]], v) <= 1e-11 * norm);
            for q in 0..=p {
                let w = &sel.vectors[q * n..(q + 1) * n];
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "({p},{q}) {dot}");
            }
        }
    }

    #[test]
    fn single_precision_instance() {
        let a64 = lcg_matrix(20, 5);
        let a32 = SymMatrix::from_lower(20, a64.as_slice().iter().map(|&x| x as f32).collect());
        let e32 = symmetric_eigenvalues(&a32).unwrap();
        let e64 = symmetric_eigenvalues(&a64).unwrap();
        for (a, b) in e32.iter().zip(&e64) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }
}
