use super::kernels::{axpy, dot};
use crate::scalar::Real;

const ITERATIONS: usize = 3;

/// Eigenvectors of the tridiagonal matrix `(diag, off)` for the given
/// eigenvalues (ascending), by inverse iteration with Gram-Schmidt inside
/// clusters of close eigenvalues. Vectors are packed one after another.
pub fn tridiagonal_eigenvectors<S: Real>(diag: &[S], off: &[S], wanted: &[S]) -> Vec<S> {
    let n = diag.len();
    let mut out = vec![S::zero(); wanted.len() * n];
    if n == 0 {
        return out;
    }
    if n == 1 {
        out.iter_mut().for_each(|x| *x = S::one());
        return out;
    }
    let norm = (0..n)
        .map(|i| {
            diag[i].abs()
                + off[i].abs()
                + if i + 1 < n { off[i + 1].abs() } else { S::zero() }
        })
        .fold(S::zero(), S::max);
    let norm = if norm == S::zero() { S::one() } else { norm };
    let ortho_tol = S::lit(1e-3) * norm;
    let sep = S::lit(10.0) * S::epsilon() * norm;

    let mut lu = TridiagLu::new(n);
    let mut cluster_start = 0;
    let mut prev_shift = S::neg_infinity();
    let mut seed: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut b = vec![S::zero(); n];

    for (j, &lambda) in wanted.iter().enumerate() {
        if j > 0 && lambda - wanted[j - 1] > ortho_tol {
            cluster_start = j;
        }
        let mut shift = lambda;
        if j > 0 && shift - prev_shift < sep {
            shift = prev_shift + sep;
        }
        prev_shift = shift;
        lu.factor(diag, off, shift, norm);

        for x in b.iter_mut() {
            seed = seed
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            *x = S::lit(((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5);
        }
        let (done, rest) = out.split_at_mut(j * n);
        let v = &mut rest[..n];
        for _ in 0..ITERATIONS {
            v.copy_from_slice(&b);
            lu.solve(v);
            for k in cluster_start..j {
                let w = &done[k * n..(k + 1) * n];
                let proj = dot(v, w);
                axpy(-proj, w, v);
            }
            let nrm = dot(v, v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            b.copy_from_slice(v);
        }
    }
    out
}

/// LU factorization with partial pivoting of `T - shift I`.
struct TridiagLu<S> {
    u0: Vec<S>,
    u1: Vec<S>,
    u2: Vec<S>,
    mult: Vec<S>,
    swapped: Vec<bool>,
}

impl<S: Real> TridiagLu<S> {
    fn new(n: usize) -> Self {
        Self {
            u0: vec![S::zero(); n],
            u1: vec![S::zero(); n],
            u2: vec![S::zero(); n],
            mult: vec![S::zero(); n],
            swapped: vec![false; n],
        }
    }

    fn factor(&mut self, diag: &[S], off: &[S], shift: S, norm: S) {
        let n = diag.len();
        let tiny = S::epsilon() * norm;
        let guard = |x: S| if x.abs() < tiny { if x < S::zero() { -tiny } else { tiny } } else { x };
        // pending row occupies columns i, i+1 (its i+2 entry is always zero)
        let mut p0 = diag[0] - shift;
        let mut p1 = off[1];
        for i in 0..n - 1 {
            let b = off[i + 1];
            let a_next = diag[i + 1] - shift;
            let c_next = if i + 2 < n { off[i + 2] } else { S::zero() };
            if p0.abs() >= b.abs() {
                let piv = guard(p0);
                let m = b / piv;
                self.u0[i] = piv;
                self.u1[i] = p1;
                self.u2[i] = S::zero();
                self.mult[i] = m;
                self.swapped[i] = false;
                p0 = a_next - m * p1;
                p1 = c_next;
            } else {
                let m = p0 / b;
                self.u0[i] = b;
                self.u1[i] = a_next;
                self.u2[i] = c_next;
                self.mult[i] = m;
                self.swapped[i] = true;
                p0 = p1 - m * a_next;
                p1 = -m * c_next;
            }
        }
        self.u0[n - 1] = guard(p0);
        self.u1[n - 1] = S::zero();
        self.u2[n - 1] = S::zero();
    }

    fn solve(&self, y: &mut [S]) {
        let n = y.len();
        // forward elimination, writing the transformed right-hand side in place
        let mut pending = y[0];
        for i in 0..n - 1 {
            let next = y[i + 1];
            if self.swapped[i] {
                y[i] = next;
                pending -= self.mult[i] * next;
            } else {
                y[i] = pending;
                pending = next - self.mult[i] * pending;
            }
        }
        y[n - 1] = pending;
        // back substitution
        y[n - 1] /= self.u0[n - 1];
        if n >= 2 {
            y[n - 2] = (y[n - 2] - self.u1[n - 2] * y[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            y[i] = (y[i] - self.u1[i] * y[i + 1] - self.u2[i] * y[i + 2]) / self.u0[i];
        }
    }
}
