//! Model parameters, potentials, the matrix Brownian path and Hamiltonian
//! snapshots `H_t = diag(V) + Φ_t`.
//!
//! `Φ_t(x, y) = sqrt((1 + δ_xy) / N) B_xy(t)` with independent standard
//! Brownian motions `B_xy = B_yx`, so the entry variance of `Φ_1` is
//! `(1 + δ_xy) / N`.

use rand_distr::{Distribution, StandardNormal};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Real;
use crate::seed::{stream_rng, streams};

/// Size and scale exponents: `T = N^{-1+δ}`, `η = N^{-1+α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<S> {
    pub n: usize,
    pub delta: S,
    pub alpha: S,
    pub t: S,
    pub eta: S,
}

impl<S: Real> ModelParams<S> {
    pub fn new(n: usize, delta: S, alpha: S) -> Result<Self> {
        let mut bad = Vec::new();
        if n < 2 {
            bad.push(format!("N = {n} must be at least 2"));
        }
        if !(delta > S::zero() && delta < S::one()) {
            bad.push(format!("delta = {delta} must lie in (0, 1)"));
        }
        if !(alpha > S::zero() && alpha < S::one()) {
            bad.push(format!("alpha = {alpha} must lie in (0, 1)"));
        }
        if !bad.is_empty() {
            return Err(Error::Config(bad.join("; ")));
        }
        Ok(Self {
            n,
            delta,
            alpha,
            t: Self::scale(n, delta),
            eta: Self::scale(n, alpha),
        })
    }

    /// `N^{-1+e}`.
    pub fn scale(n: usize, e: S) -> S {
        S::from_usize_lossy(n).powf(e - S::one())
    }

    pub fn n_s(&self) -> S {
        S::from_usize_lossy(self.n)
    }
}

/// Where a potential came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    DeterministicList,
    IidDensity { density: Density, seed: u64 },
}

/// Diagonal part `V` of the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<S> {
    values: Vec<S>,
    provenance: Provenance,
}

impl<S: Real> Potential<S> {
    pub fn from_values(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("potential must have at least one entry".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("potential entry {i} is not finite")));
        }
        Ok(Self {
            values,
            provenance: Provenance::DeterministicList,
        })
    }

    /// `n` i.i.d. draws from `density`.
    pub fn sample(n: usize, density: Density, seed: u64) -> Self {
        let mut rng = stream_rng(seed, streams::POTENTIAL);
        let values = (0..n).map(|_| S::lit(density.sample(&mut rng))).collect();
        Self {
            values,
            provenance: Provenance::IidDensity { density, seed },
        }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// `N` i.i.d. draws from the density named by `density_id`.
pub fn sample_potential<S: Real>(params: &ModelParams<S>, density_id: &str, seed: u64) -> Result<Potential<S>> {
    let density: Density = density_id.parse()?;
    Ok(Potential::sample(params.n, density, seed))
}

/// Number of free entries `(u, v)`, `u <= v`, of an `n x n` symmetric matrix.
pub fn pair_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Seeded matrix Brownian motion on a uniform time grid.
///
/// Increments are not stored: interval `k` is regenerated from its own random
/// stream on request. A path of refinement level `L` splits every base interval
/// into `2^L` pieces by exact Brownian-bridge sampling, so refining keeps the
/// values at the coarser grid times (up to rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct DysonPath<S> {
    n: usize,
    horizon: S,
    base_steps: usize,
    level: u32,
    seed: u64,
}

impl<S: Real> DysonPath<S> {
    /// Path on `[0, horizon]` with `steps` base intervals. `horizon = 0` is
    /// allowed and gives the constant path.
    pub fn new(n: usize, horizon: S, steps: usize, seed: u64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("grid_size must be at least 1".into()));
        }
        if !(horizon >= S::zero()) || !horizon.is_finite() {
            return Err(Error::Config(format!("path horizon {horizon} must be finite and non-negative")));
        }
        Ok(Self {
            n,
            horizon,
            base_steps: steps,
            level: 0,
            seed,
        })
    }

    /// The same path with every interval split into `2^levels` pieces.
    pub fn refined(&self, levels: u32) -> Self {
        let mut p = self.clone();
        p.level += levels;
        assert!(p.level < 40, "refinement level too deep");
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of intervals `M` of the (refined) grid.
    pub fn steps(&self) -> usize {
        self.base_steps << self.level
    }

    pub fn time(&self, k: usize) -> S {
        let m = self.steps();
        if k == m {
            self.horizon
        } else {
            self.horizon * S::from_usize_lossy(k) / S::from_usize_lossy(m)
        }
    }

    pub fn time_grid(&self) -> Vec<S> {
        (0..=self.steps()).map(|k| self.time(k)).collect()
    }

    /// Brownian increments `B(t_{k+1}) - B(t_k)` for all pairs `u <= v`,
    /// packed row by row (`(0,0), (0,1), ..., (0,n-1), (1,1), ...`).
    pub fn increments(&self, k: usize) -> Vec<f64> {
        assert!(k < self.steps(), "interval {k} outside grid of {} steps", self.steps());
        let h = self.horizon.to_f64_lossy();
        let base_dt = h / self.base_steps as f64;
        let len = pair_count(self.n);
        let top = (k >> self.level) as u64;
        let mut rng = stream_rng(self.seed, streams::increment(top));
        let sd = base_dt.sqrt();
        let mut inc: Vec<f64> = (0..len)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                sd * g
            })
            .collect();
        // descend through the bridge levels towards interval k
        let mut dt = base_dt;
        for l in 1..=self.level {
            let parent = (k >> (self.level - l + 1)) as u64;
            let right = (k >> (self.level - l)) & 1 == 1;
            let sd = (dt / 4.0).sqrt();
            let mut rng = stream_rng(self.seed, streams::bridge(l, parent));
            for x in inc.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                let dev = sd * g;
                *x = 0.5 * *x + if right { -dev } else { dev };
            }
            dt *= 0.5;
        }
        inc
    }

    /// Snapshots `H_{t_0}, ..., H_{t_M}` in order, accumulating increments.
    pub fn snapshots<'a>(&'a self, v: &'a Potential<S>) -> Snapshots<'a, S> {
        assert_eq!(v.len(), self.n, "potential and path dimensions differ");
        Snapshots {
            path: self,
            v,
            b: vec![0.0; pair_count(self.n)],
            next: 0,
        }
    }
}

/// Path with `grid_size` intervals on `[0, T]`.
pub fn sample_dyson_path<S: Real>(params: &ModelParams<S>, grid_size: usize, seed: u64) -> Result<DysonPath<S>> {
    DysonPath::new(params.n, params.t, grid_size, seed)
}

/// `H_t` at one grid time.
#[derive(Debug, Clone)]
pub struct HamiltonianSnapshot<S> {
    pub t: S,
    pub index: usize,
    /// Seed of the generating path, for error reports.
    pub seed: Option<u64>,
    pub matrix: SymMatrix<S>,
}

fn build_matrix<S: Real>(v: &[S], b: &[f64]) -> SymMatrix<S> {
    let n = v.len();
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    let mut m = SymMatrix::zeros(n);
    let mut p = 0;
    for u in 0..n {
        m.set(u, u, v[u] + S::lit(diag * b[p]));
        p += 1;
        for w in u + 1..n {
            m.set(u, w, S::lit(off * b[p]));
            p += 1;
        }
    }
    m
}

/// `H_{t_k} = diag(V) + Φ_{t_k}`.
pub fn assemble_snapshot<S: Real>(v: &Potential<S>, path: &DysonPath<S>, k: usize) -> Result<HamiltonianSnapshot<S>> {
    if k > path.steps() {
        return Err(Error::OutOfRange {
            index: k,
            limit: path.steps(),
        });
    }
    if v.len() != path.dim() {
        return Err(Error::Config(format!(
            "potential has {} entries but the path has dimension {}",
            v.len(),
            path.dim()
        )));
    }
    let mut b = vec![0.0; pair_count(path.dim())];
    for j in 0..k {
        for (acc, d) in b.iter_mut().zip(path.increments(j)) {
            *acc += d;
        }
    }
    Ok(HamiltonianSnapshot {
        t: path.time(k),
        index: k,
        seed: Some(path.seed()),
        matrix: build_matrix(v.values(), &b),
    })
}

/// Sequential snapshot iterator; see [`DysonPath::snapshots`].
pub struct Snapshots<'a, S> {
    path: &'a DysonPath<S>,
    v: &'a Potential<S>,
    b: Vec<f64>,
    next: usize,
}

impl<S: Real> Iterator for Snapshots<'_, S> {
    type Item = HamiltonianSnapshot<S>;

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.next;
        if k > self.path.steps() {
            return None;
        }
        if k > 0 {
            for (acc, d) in self.b.iter_mut().zip(self.path.increments(k - 1)) {
                *acc += d;
            }
        }
        self.next += 1;
        Some(HamiltonianSnapshot {
            t: self.path.time(k),
            index: k,
            seed: Some(self.path.seed()),
            matrix: build_matrix(self.v.values(), &self.b),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_recompute_exactly() {
        let p = ModelParams::<f64>::new(1000, 0.5, 0.3).unwrap();
        assert!((p.t - 1000f64.powf(-0.5)).abs() <= 1e-14 * p.t);
        assert!((p.eta - 1000f64.powf(-0.7)).abs() <= 1e-14 * p.eta);
        assert!(ModelParams::<f64>::new(1, 0.5, 0.3).is_err());
        assert!(ModelParams::<f64>::new(10, 1.0, 0.3).is_err());
        assert!(ModelParams::<f64>::new(10, 0.5, 0.0).is_err());
    }

    #[test]
    fn point_mass_potential() {
        let p = ModelParams::<f64>::new(4, 0.5, 0.3).unwrap();
        let v = sample_potential(&p, "point-mass", 1).unwrap();
        assert_eq!(v.values(), &[0.0; 4]);
        assert!(sample_potential(&p, "lognormal", 1).is_err());
    }

    #[test]
    fn zero_index_snapshot_is_diagonal() {
        let v = Potential::from_values(vec![0.5, -0.25, 0.125]).unwrap();
        let path = DysonPath::new(3, 0.1, 4, 9).unwrap();
        let h = assemble_snapshot(&v, &path, 0).unwrap();
        assert_eq!(h.matrix, SymMatrix::from_diagonal(v.values()));
        assert!(assemble_snapshot(&v, &path, 5).is_err());
    }

    #[test]
    fn single_site_snapshot() {
        let v = Potential::from_values(vec![0.0]).unwrap();
        let path = DysonPath::new(1, 0.3, 1, 4).unwrap();
        let inc = path.increments(0);
        let h = assemble_snapshot(&v, &path, 1).unwrap();
        assert_eq!(h.matrix.get(0, 0), 2f64.sqrt() * inc[0]);
    }

    #[test]
    fn walker_matches_direct_assembly() {
        let v = Potential::<f64>::sample(7, Density::default(), 3);
        let path = DysonPath::new(7, 0.2, 5, 11).unwrap();
        for (k, h) in path.snapshots(&v).enumerate() {
            let direct = assemble_snapshot(&v, &path, k).unwrap();
            assert_eq!(h.matrix, direct.matrix);
            assert_eq!(h.matrix.max_asymmetry(), 0.0);
            assert_eq!(h.t, path.time(k));
        }
    }

    #[test]
    fn refinement_preserves_coarse_values() {
        let v = Potential::<f64>::sample(5, Density::default(), 2);
        let coarse = DysonPath::new(5, 0.5, 3, 21).unwrap();
        let fine = coarse.refined(3);
        assert_eq!(fine.steps(), 24);
        let hc: Vec<_> = coarse.snapshots(&v).collect();
        let hf: Vec<_> = fine.snapshots(&v).collect();
        for k in 0..=3 {
            let a = &hc[k].matrix;
            let b = &hf[8 * k].matrix;
            assert_eq!(hc[k].t, hf[8 * k].t);
            for i in 0..5 {
                for j in 0..5 {
                    assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn f32_snapshot() {
        let v = Potential::<f32>::sample(6, Density::default(), 2);
        let path = DysonPath::<f32>::new(6, 0.1, 2, 3).unwrap();
        let h = assemble_snapshot(&v, &path, 2).unwrap();
        assert_eq!(h.matrix.max_asymmetry(), 0.0);
    }
}
