use rand::Rng;

use crate::ensemble::{ModelParams, Potential};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::seed::stream_rng;
use crate::spectral::{stieltjes_of, UpperHalfPoint};

/// Square lattice covering `{Im z > η, dist(z, D) <= T/η}` with
/// `D = W + i[η, 1]`, at mesh radius `r`.
///
/// The lattice is implicit: cell centers `(x0 + (i + 1/2) s, η + (j + 1/2) s)`
/// with spacing `s = r √2`, so every point of the bounding box
/// `[w0 - R, w1 + R] x (η, 1 + R]`, `R = T/η`, lies within `r` of a center.
/// Its cardinality `|D̃| = n_re n_im` satisfies
/// `|D̃| (η r)² <= (|W| + 2R + 1)(2 + R) η² / 2`, the covering constant
/// reported by [`GridSpec::covering_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<S> {
    pub r: S,
    pub upsilon: S,
    /// `sup_{Im z = η} |S_0|` from the probe scan.
    pub sup_abs_s0: S,
    pub spacing: S,
    pub window: (S, S),
    pub eta: S,
    /// `R = T / η`.
    pub reach: S,
    x0: S,
    n_re: u64,
    n_im: u64,
}

/// A sampled lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<S> {
    pub z: UpperHalfPoint<S>,
    /// Whether `z` lies in `D = W + i[η, 1]`.
    pub in_domain: bool,
}

/// `sup |S_0|` over `Im z >= η`. `S_0` is analytic and vanishes at infinity
/// on that half-plane, so the supremum is attained on the line `Im z = η`;
/// it is scanned at spacing `η/8` over the range of `V` widened by 1, then
/// rescanned at spacing `η/128` around the eight largest probes.
pub fn sup_abs_stieltjes<S: Real>(v: &Potential<S>, eta: S) -> S {
    let vals = v.values();
    let lo = vals.iter().copied().fold(S::infinity(), S::min) - S::one();
    let hi = vals.iter().copied().fold(S::neg_infinity(), S::max) + S::one();
    let h = eta / S::lit(8.0);
    let count = ((hi - lo) / h).ceil().to_usize().expect("finite probe count") + 1;
    let at = |x: S| stieltjes_of(vals, C::new(x, eta)).norm();
    let mut probes: Vec<(S, S)> = (0..count)
        .map(|i| {
            let x = lo + h * S::from_usize_lossy(i);
            (at(x), x)
        })
        .collect();
    probes.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite modulus"));
    let fine = h / S::lit(16.0);
    let mut best = probes[0].0;
    for &(_, x) in probes.iter().take(8) {
        for k in -16i32..=16 {
            best = best.max(at(x + fine * S::lit(k as f64)));
        }
    }
    best
}

/// Mesh radius `r = min{Υ T η², N^{-2θ} η³, N^{-(1+2γ)} η³}`.
pub fn mesh_radius<S: Real>(params: &ModelParams<S>, upsilon: S, theta: S, gamma: S) -> S {
    let n = params.n_s();
    let eta3 = params.eta.powi(3);
    (upsilon * params.t * params.eta * params.eta)
        .min(n.powf(-S::two() * theta) * eta3)
        .min(n.powf(-(S::one() + S::two() * gamma)) * eta3)
}

fn upsilon_from_sup<S: Real>(params: &ModelParams<S>, sup: S) -> S {
    sup + S::lit(4.0) / (params.n_s() * params.eta).sqrt()
}

/// `Υ = sup_{Im z >= η} |S_0(z)| + 4 / sqrt(Nη)`.
pub fn upsilon<S: Real>(params: &ModelParams<S>, v: &Potential<S>) -> S {
    upsilon_from_sup(params, sup_abs_stieltjes(v, params.eta))
}

/// Builds the lattice; fails when `|D̃|` exceeds `budget`.
pub fn build_grid<S: Real>(
    params: &ModelParams<S>,
    v: &Potential<S>,
    window: (S, S),
    theta: S,
    gamma: S,
    budget: u128,
) -> Result<GridSpec<S>> {
    if !(window.0 < window.1) {
        return Err(Error::Config(format!("window [{}, {}] is empty", window.0, window.1)));
    }
    let eta = params.eta;
    let sup = sup_abs_stieltjes(v, eta);
    let upsilon = upsilon_from_sup(params, sup);
    let r = mesh_radius(params, upsilon, theta, gamma);
    let spacing = r * S::SQRT_2();
    let reach = params.t / eta;
    let width = window.1 - window.0 + S::two() * reach;
    let height = S::one() + reach - eta;
    let count = |len: S| -> Result<u64> {
        (len / spacing)
            .ceil()
            .to_u64()
            .ok_or_else(|| Error::Config(format!("grid side {len}/{spacing} does not fit in 64 bits; raise alpha or shrink W")))
    };
    let n_re = count(width)?.max(1);
    let n_im = count(height)?.max(1);
    let grid = GridSpec {
        r,
        upsilon,
        sup_abs_s0: sup,
        spacing,
        window,
        eta,
        reach,
        x0: window.0 - reach,
        n_re,
        n_im,
    };
    if grid.cardinality() > budget {
        return Err(Error::Config(format!(
            "grid has {} points, above the budget {budget}; raise alpha or shrink W",
            grid.cardinality()
        )));
    }
    Ok(grid)
}

impl<S: Real> GridSpec<S> {
    pub fn cardinality(&self) -> u128 {
        self.n_re as u128 * self.n_im as u128
    }

    pub fn shape(&self) -> (u64, u64) {
        (self.n_re, self.n_im)
    }

    /// `(|W| + 2R + 1)(2 + R) η² / 2`.
    pub fn covering_constant(&self) -> S {
        let a = self.window.1 - self.window.0 + S::two() * self.reach;
        (a + S::one()) * (S::two() + self.reach) * self.eta * self.eta * S::half()
    }

    pub fn point(&self, i: u64, j: u64) -> UpperHalfPoint<S> {
        let re = self.x0 + (S::lit(i as f64) + S::half()) * self.spacing;
        let im = self.eta + (S::lit(j as f64) + S::half()) * self.spacing;
        UpperHalfPoint { re, im }
    }

    fn index_of(&self, v: S, origin: S, len: u64) -> u64 {
        let f = ((v - origin) / self.spacing).floor();
        if f < S::zero() {
            0
        } else {
            f.to_u64().unwrap_or(u64::MAX).min(len - 1)
        }
    }

    /// Lattice point nearest to `z`.
    pub fn nearest(&self, z: C<S>) -> UpperHalfPoint<S> {
        self.point(self.index_of(z.re, self.x0, self.n_re), self.index_of(z.im, self.eta, self.n_im))
    }

    /// Whether `z` belongs to the covered region.
    pub fn covers(&self, z: C<S>) -> bool {
        if !(z.im > self.eta) {
            return false;
        }
        let dx = if z.re < self.window.0 {
            self.window.0 - z.re
        } else if z.re > self.window.1 {
            z.re - self.window.1
        } else {
            S::zero()
        };
        let dy = if z.im > S::one() { z.im - S::one() } else { S::zero() };
        (dx * dx + dy * dy).sqrt() <= self.reach
    }

    /// Index ranges of the lattice points lying in `D`.
    fn domain_ranges(&self) -> Option<((u64, u64), (u64, u64))> {
        let first = |lo: S, origin: S| ((lo - origin) / self.spacing - S::half()).ceil().max(S::zero());
        let last = |hi: S, origin: S| ((hi - origin) / self.spacing - S::half()).floor();
        let i0 = first(self.window.0, self.x0).to_u64()?;
        let i1 = last(self.window.1, self.x0).to_u64()?.min(self.n_re - 1);
        let j0 = 0u64;
        let j1 = last(S::one(), self.eta).to_u64()?.min(self.n_im - 1);
        (i0 <= i1 && j0 <= j1).then_some(((i0, i1), (j0, j1)))
    }

    fn in_domain(&self, z: &UpperHalfPoint<S>) -> bool {
        z.re >= self.window.0 && z.re <= self.window.1 && z.im >= self.eta && z.im <= S::one()
    }

    /// `count` lattice points drawn uniformly with replacement: a fraction
    /// `in_domain_fraction` from the points inside `D`, the rest from the
    /// whole covered region. When the lattice has at most `count` points it is
    /// returned in full.
    pub fn subsample(&self, count: usize, in_domain_fraction: f64, seed: u64) -> Vec<GridPoint<S>> {
        let tag = |z: UpperHalfPoint<S>| GridPoint { z, in_domain: self.in_domain(&z) };
        if self.cardinality() <= count as u128 {
            return (0..self.n_im)
                .flat_map(|j| (0..self.n_re).map(move |i| (i, j)))
                .map(|(i, j)| tag(self.point(i, j)))
                .collect();
        }
        let mut rng = stream_rng(seed, 0);
        let inner = ((count as f64) * in_domain_fraction.clamp(0.0, 1.0)).round() as usize;
        let ranges = self.domain_ranges();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let z = match (k < inner, ranges) {
                (true, Some(((i0, i1), (j0, j1)))) => self.point(rng.random_range(i0..=i1), rng.random_range(j0..=j1)),
                // rejection from the bounding box onto the covered region
                _ => loop {
                    let z = self.point(rng.random_range(0..self.n_re), rng.random_range(0..self.n_im));
                    if self.covers(z.z()) {
                        break z;
                    }
                },
            };
            out.push(tag(z));
        }
        out
    }
}
