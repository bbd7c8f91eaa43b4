use crate::ensemble::{DysonPath, Potential};
use crate::error::Result;
use crate::linalg::symmetric_eigen_rows;
use crate::scalar::{inv_shift, Real, C};
use crate::spectral::with_context;

/// Time-dependent Stieltjes transform driving the characteristic ODE.
pub trait Drift<S: Real>: Sync {
    /// Grid times `0 = t_0 < ... < t_M = T`; the integrator never steps across one.
    fn breakpoints(&self) -> &[S];

    /// `S_t(z)`.
    fn stieltjes(&self, t: S, z: C<S>) -> C<S>;

    /// `∂_z S_t(z)`.
    fn stieltjes_derivative(&self, t: S, z: C<S>) -> C<S>;

    /// `G_{t_k}(x, z)` for every tracked site at grid index `k`.
    fn local_resolvents(&self, _k: usize, _z: C<S>) -> Vec<C<S>> {
        Vec::new()
    }

    fn horizon(&self) -> S {
        *self.breakpoints().last().expect("non-empty grid")
    }
}

/// Constant drift `S_t(z) = s` on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ConstantDrift<S> {
    pub value: C<S>,
    grid: Vec<S>,
}

impl<S: Real> ConstantDrift<S> {
    pub fn new(value: C<S>, horizon: S) -> Self {
        Self {
            value,
            grid: vec![S::zero(), horizon],
        }
    }
}

impl<S: Real> Drift<S> for ConstantDrift<S> {
    fn breakpoints(&self) -> &[S] {
        &self.grid
    }

    fn stieltjes(&self, _t: S, _z: C<S>) -> C<S> {
        self.value
    }

    fn stieltjes_derivative(&self, _t: S, _z: C<S>) -> C<S> {
        C::new(S::zero(), S::zero())
    }
}

/// Exact spectra of `H_{t_k}` at the path grid times, with the squared
/// eigenvector components at a set of tracked sites.
///
/// Between grid times the sorted eigenvalues are interpolated linearly; at
/// grid times every value is exact.
#[derive(Debug, Clone)]
pub struct SpectralPath<S> {
    times: Vec<S>,
    eigenvalues: Vec<Vec<S>>,
    sites: Vec<usize>,
    /// `weights[k][j * n + i] = ψ_i(sites[j])²` at `t_k`.
    weights: Vec<Vec<S>>,
}

impl<S: Real> SpectralPath<S> {
    pub fn build(v: &Potential<S>, path: &DysonPath<S>, sites: &[usize]) -> Result<Self> {
        let n = v.len();
        let mut eigenvalues = Vec::with_capacity(path.steps() + 1);
        let mut weights = Vec::with_capacity(path.steps() + 1);
        for snap in path.snapshots(v) {
            if snap.index == 0 {
                // H_0 is diagonal
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| v.values()[a].partial_cmp(&v.values()[b]).expect("finite potential"));
                let mut rank = vec![0; n];
                for (slot, &x) in order.iter().enumerate() {
                    rank[x] = slot;
                }
                let mut w = vec![S::zero(); sites.len() * n];
                for (j, &x) in sites.iter().enumerate() {
                    w[j * n + rank[x]] = S::one();
                }
                eigenvalues.push(order.iter().map(|&x| v.values()[x]).collect());
                weights.push(w);
                continue;
            }
            let (values, rows) = symmetric_eigen_rows(&snap.matrix, sites).map_err(|e| with_context(e, snap.seed, snap.t))?;
            eigenvalues.push(values);
            weights.push(rows.into_iter().map(|r| r * r).collect());
        }
        Ok(Self {
            times: path.time_grid(),
            eigenvalues,
            sites: sites.to_vec(),
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues[0].len()
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Ascending eigenvalues at grid index `k`.
    pub fn eigenvalues(&self, k: usize) -> &[S] {
        &self.eigenvalues[k]
    }

    /// `ψ_i(sites[j])²` at grid index `k`.
    pub fn weights(&self, k: usize, j: usize) -> &[S] {
        let n = self.dim();
        &self.weights[k][j * n..(j + 1) * n]
    }

    /// Interval `k` with `t_k <= t <= t_{k+1}` and the position inside it.
    fn locate(&self, t: S) -> (usize, S) {
        let m = self.times.len() - 1;
        if m == 0 || t <= self.times[0] {
            return (0, S::zero());
        }
        let k = match self.times.binary_search_by(|p| p.partial_cmp(&t).expect("finite time")) {
            Ok(k) => return (k.min(m - 1), if k == m { S::one() } else { S::zero() }),
            Err(k) => (k - 1).min(m - 1),
        };
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, s.min(S::one()))
    }

    fn sum(&self, t: S, z: C<S>, power: i32) -> C<S> {
        let (k, s) = self.locate(t);
        let mut acc = C::new(S::zero(), S::zero());
        let a = &self.eigenvalues[k];
        let term = |lam: S| {
            let g = inv_shift(lam, z);
            if power == 1 {
                g
            } else {
                g * g
            }
        };
        if s == S::zero() || self.times.len() == 1 {
            for &lam in a {
                acc = acc + term(lam);
            }
        } else if s == S::one() {
            for &lam in &self.eigenvalues[k + 1] {
                acc = acc + term(lam);
            }
        } else {
            let b = &self.eigenvalues[k + 1];
            let r = S::one() - s;
            for (&la, &lb) in a.iter().zip(b) {
                acc = acc + term(r * la + s * lb);
            }
        }
        acc / S::from_usize_lossy(a.len())
    }
}

impl<S: Real> Drift<S> for SpectralPath<S> {
    fn breakpoints(&self) -> &[S] {
        &self.times
    }

    fn stieltjes(&self, t: S, z: C<S>) -> C<S> {
        let s = self.sum(t, z, 1);
        debug_assert!(s.im > S::zero(), "Herglotz violation: Im S_t = {} at t = {t}, z = {z}", s.im);
        s
    }

    fn stieltjes_derivative(&self, t: S, z: C<S>) -> C<S> {
        self.sum(t, z, 2)
    }

    fn local_resolvents(&self, k: usize, z: C<S>) -> Vec<C<S>> {
        let n = self.dim();
        let lam = &self.eigenvalues[k];
        (0..self.sites.len())
            .map(|j| {
                let w = &self.weights[k][j * n..(j + 1) * n];
                let mut acc = C::new(S::zero(), S::zero());
                for (&l, &wi) in lam.iter().zip(w) {
                    acc = acc + inv_shift(l, z) * wi;
                }
                acc
            })
            .collect()
    }
}
