use super::kernels::{axpy, dot};
use super::SymMatrix;
use crate::scalar::Real;

/// Householder reduction `A = Q T Q^T` of a symmetric matrix.
///
/// Row `i` of `work` keeps the (scaled) reflector `u_i` in columns `0..i`; the
/// orthogonal factor is `Q = P_{n-1} ... P_1` with `P_i = I - u_i u_i^T / h_i`.
#[derive(Debug, Clone)]
pub struct Householder<S> {
    n: usize,
    work: Vec<S>,
    h: Vec<S>,
    /// Diagonal of `T`.
    pub diag: Vec<S>,
    /// `off[i]` couples `i - 1` and `i`; `off[0] = 0`.
    pub off: Vec<S>,
}

impl<S: Real> Householder<S> {
    pub fn reduce(a: &SymMatrix<S>) -> Self {
        let n = a.dim();
        let mut w = a.as_slice().to_vec();
        let mut h = vec![S::zero(); n];
        let mut diag = vec![S::zero(); n];
        let mut off = vec![S::zero(); n];
        let mut p = vec![S::zero(); n];
        // rank-two update of step i + 1, applied lazily while the symmetric
        // product of step i streams over the same rows
        let mut q_prev = vec![S::zero(); n];
        let mut pending = false;

        for i in (1..n).rev() {
            let l = i - 1;
            let (head, tail) = w.split_at_mut(i * n);
            let (row_i, rest) = tail.split_at_mut(n);
            let u_prev: &[S] = if pending { &rest[..i + 1] } else { &[] };
            if pending {
                rank_two(&mut row_i[..=i], &u_prev[..=i], &q_prev[..=i], u_prev[i], q_prev[i]);
            }
            let u = &mut row_i[..i];
            let scale: S = if l == 0 { S::zero() } else { u.iter().map(|x| x.abs()).sum() };
            if scale == S::zero() {
                off[i] = u[l];
                if pending {
                    for j in 0..i {
                        let row = &mut head[j * n..j * n + j + 1];
                        rank_two(row, &u_prev[..=j], &q_prev[..=j], u_prev[j], q_prev[j]);
                    }
                    pending = false;
                }
                continue;
            }
            let mut hs = S::zero();
            for x in u.iter_mut() {
                *x /= scale;
                hs += *x * *x;
            }
            let f = u[l];
            let g = if f >= S::zero() { -hs.sqrt() } else { hs.sqrt() };
            off[i] = scale * g;
            hs -= f * g;
            u[l] = f - g;

            // p = A u / h over the leading i x i block, lower rows only
            let p = &mut p[..i];
            p.iter_mut().for_each(|x| *x = S::zero());
            for j in 0..i {
                let row = &mut head[j * n..j * n + j + 1];
                if pending {
                    rank_two(row, &u_prev[..=j], &q_prev[..=j], u_prev[j], q_prev[j]);
                }
                let uj = u[j];
                let acc = dot(&row[..j], &u[..j]) + row[j] * uj;
                axpy(uj, &row[..j], &mut p[..j]);
                p[j] += acc;
            }
            let mut f = S::zero();
            for (pj, &uj) in p.iter_mut().zip(u.iter()) {
                *pj /= hs;
                f += *pj * uj;
            }
            let hh = f / (hs + hs);
            for ((qj, &pj), &uj) in q_prev[..i].iter_mut().zip(p.iter()).zip(u.iter()) {
                *qj = pj - hh * uj;
            }
            pending = true;
            h[i] = hs;
        }
        for i in 0..n {
            diag[i] = w[i * n + i];
        }
        Self {
            n,
            work: w,
            h,
            diag,
            off,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn reflector(&self, i: usize) -> &[S] {
        &self.work[i * self.n..i * self.n + i]
    }

    /// Rows of `Q` for the given sites, packed `rows[k * n..(k + 1) * n]`.
    pub fn q_rows(&self, sites: &[usize]) -> Vec<S> {
        let n = self.n;
        let mut rows = vec![S::zero(); sites.len() * n];
        for (k, &x) in sites.iter().enumerate() {
            rows[k * n + x] = S::one();
        }
        // r <- r P_{n-1} ... P_1, blocked over rows to reuse each reflector
        const BLOCK: usize = 16;
        for block in rows.chunks_mut(BLOCK * n) {
            for i in (1..n).rev() {
                if self.h[i] == S::zero() {
                    continue;
                }
                let u = self.reflector(i);
                let inv_h = S::one() / self.h[i];
                for r in block.chunks_mut(n) {
                    reflect(&mut r[..i], u, inv_h);
                }
            }
        }
        rows
    }

    /// In-place `v <- Q v` for `count` vectors packed one after another.
    pub fn apply_q(&self, vectors: &mut [S], count: usize) {
        let n = self.n;
        debug_assert_eq!(vectors.len(), count * n);
        const BLOCK: usize = 16;
        for block in vectors.chunks_mut(BLOCK * n) {
            for i in 1..n {
                if self.h[i] == S::zero() {
                    continue;
                }
                let u = self.reflector(i);
                let inv_h = S::one() / self.h[i];
                for v in block.chunks_mut(n) {
                    reflect(&mut v[..i], u, inv_h);
                }
            }
        }
    }
}

#[inline]
fn reflect<S: Real>(r: &mut [S], u: &[S], inv_h: S) {
    let s = dot(r, u) * inv_h;
    if s != S::zero() {
        axpy(-s, u, r);
    }
}

/// `row -= u_j q + q_j u` restricted to the lower-triangular row.
#[inline]
fn rank_two<S: Real>(row: &mut [S], u: &[S], q: &[S], uj: S, qj: S) {
    for ((a, &uk), &qk) in row.iter_mut().zip(u).zip(q) {
        *a -= uj * qk + qj * uk;
    }
}
