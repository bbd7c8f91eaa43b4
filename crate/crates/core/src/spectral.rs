//! Eigendecomposition of snapshots, local resolvents `G_t(x, z)`, Stieltjes
//! transforms and the deformed-semicircle fixed point.
//!
//! Sites are 0-based throughout.

use crate::ensemble::{HamiltonianSnapshot, Potential};
use crate::error::{Error, NumericalFailure, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::{inv_shift, Real, C};

/// A point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperHalfPoint<S> {
    pub re: S,
    pub im: S,
}

impl<S: Real> UpperHalfPoint<S> {
    pub fn new(re: S, im: S) -> Result<Self> {
        if !(im > S::zero()) || !re.is_finite() || !im.is_finite() {
            return Err(Error::Config(format!("{re} + {im}i is not in the upper half-plane")));
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(z: C<S>) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    #[inline]
    pub fn z(&self) -> C<S> {
        C::new(self.re, self.im)
    }
}

/// Eigenpairs of `H_t`: ascending eigenvalues and orthonormal eigenvectors
/// stored column by column (`eigenvectors[i * n + x] = ψ_i(x)`).
#[derive(Debug, Clone)]
pub struct SpectralData<S> {
    pub t: S,
    pub eigenvalues: Vec<S>,
    pub eigenvectors: Vec<S>,
}

impl<S: Real> SpectralData<S> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> &[S] {
        let n = self.dim();
        &self.eigenvectors[i * n..(i + 1) * n]
    }

    /// `ψ_i(x)²` for all `i`.
    pub fn site_weights(&self, x: usize) -> Vec<S> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors[i * n + x].powi(2)).collect()
    }
}

/// `G(x, z)` at one site and spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventValue<S> {
    pub z: UpperHalfPoint<S>,
    pub site: usize,
    pub value: C<S>,
}

pub fn eigendecompose<S: Real>(h: &HamiltonianSnapshot<S>) -> Result<SpectralData<S>> {
    let eig = symmetric_eigen(&h.matrix).map_err(|e| with_context(e, h.seed, h.t))?;
    Ok(SpectralData {
        t: h.t,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
    })
}

/// Attaches the snapshot seed and time to an eigensolver failure.
pub(crate) fn with_context<S: Real>(e: NumericalFailure, seed: Option<u64>, t: S) -> Error {
    match e {
        NumericalFailure::Eigensolver { index, iterations, .. } => NumericalFailure::Eigensolver {
            index,
            iterations,
            seed,
            time: t.to_f64_lossy(),
        }
        .into(),
        other => other.into(),
    }
}

/// `(1/n) Σ_i 1 / (values_i - z)`.
#[inline]
pub fn stieltjes_of<S: Real>(values: &[S], z: C<S>) -> C<S> {
    let mut acc = C::new(S::zero(), S::zero());
    for &v in values {
        acc = acc + inv_shift(v, z);
    }
    let s = acc / S::from_usize_lossy(values.len());
    debug_assert!(s.im > S::zero(), "Herglotz violation: Im S = {} at {z}", s.im);
    s
}

/// `Σ_i w_i / (values_i - z)`.
#[inline]
pub fn weighted_stieltjes<S: Real>(values: &[S], weights: &[S], z: C<S>) -> C<S> {
    let mut acc = C::new(S::zero(), S::zero());
    for (&v, &w) in values.iter().zip(weights) {
        acc = acc + inv_shift(v, z) * w;
    }
    acc
}

/// `S_0(z) = (1/N) Σ_x 1 / (V_x - z)`.
pub fn stieltjes_potential<S: Real>(v: &Potential<S>, z: UpperHalfPoint<S>) -> C<S> {
    stieltjes_of(v.values(), z.z())
}

/// `S_t(z) = (1/N) Tr (H_t - z)^{-1}`.
pub fn stieltjes_trace<S: Real>(spec: &SpectralData<S>, z: UpperHalfPoint<S>) -> C<S> {
    stieltjes_of(&spec.eigenvalues, z.z())
}

/// `G_t(x, z) = Σ_i ψ_i(x)² / (λ_i - z)`.
pub fn local_resolvent<S: Real>(spec: &SpectralData<S>, x: usize, z: UpperHalfPoint<S>) -> Result<ResolventValue<S>> {
    let n = spec.dim();
    if x >= n {
        return Err(Error::OutOfRange { index: x, limit: n });
    }
    let zc = z.z();
    let mut acc = C::new(S::zero(), S::zero());
    for (i, &lam) in spec.eigenvalues.iter().enumerate() {
        let w = spec.eigenvectors[i * n + x];
        acc = acc + inv_shift(lam, zc) * (w * w);
    }
    debug_assert!(acc.im > S::zero(), "Herglotz violation: Im G = {} at site {x}", acc.im);
    Ok(ResolventValue { z, site: x, value: acc })
}

/// Iteration controls for [`deformed_semicircle`].
#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 10_000,
        }
    }
}

/// Herglotz solution of `m = (1/N) Σ_x 1 / (V_x - z - T m)`.
pub fn deformed_semicircle<S: Real>(v: &Potential<S>, t: S, z: UpperHalfPoint<S>) -> Result<C<S>> {
    deformed_semicircle_with(v, t, z, FixedPointOptions::default())
}

pub fn deformed_semicircle_with<S: Real>(
    v: &Potential<S>,
    t: S,
    z: UpperHalfPoint<S>,
    opts: FixedPointOptions,
) -> Result<C<S>> {
    let mut m = stieltjes_potential(v, z);
    if t == S::zero() {
        return Ok(m);
    }
    let d = S::lit(opts.damping);
    // f32 cannot resolve 1e-12
    let tol = S::lit(opts.tolerance).max(S::lit(16.0) * S::epsilon() * m.norm());
    let mut step = S::infinity();
    for _ in 0..opts.max_iterations {
        let shifted = z.z() + m * t;
        let f = stieltjes_of(v.values(), shifted);
        let next = m + (f - m) * d;
        step = (next - m).norm();
        m = next;
        if step <= tol {
            debug_assert!(m.im > S::zero());
            return Ok(m);
        }
    }
    Err(NumericalFailure::FixedPoint {
        iterations: opts.max_iterations,
        damping: opts.damping,
        residual: step.to_f64_lossy(),
    }
    .into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;
    use crate::ensemble::{assemble_snapshot, DysonPath};
    use crate::linalg::SymMatrix;

    fn snapshot(m: SymMatrix<f64>) -> HamiltonianSnapshot<f64> {
        HamiltonianSnapshot {
            t: 0.0,
            index: 0,
            seed: None,
            matrix: m,
        }
    }

    fn zp(re: f64, im: f64) -> UpperHalfPoint<f64> {
        UpperHalfPoint::new(re, im).unwrap()
    }

    #[test]
    fn rejects_real_axis() {
        assert!(UpperHalfPoint::new(0.0, 0.0).is_err());
        assert!(UpperHalfPoint::new(0.0, -1.0).is_err());
    }

    #[test]
    fn diagonal_decomposition() {
        let h = snapshot(SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]));
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.vector(0)[1].abs(), 1.0);
        assert_eq!(s.vector(1)[2].abs(), 1.0);
        assert_eq!(s.vector(2)[0].abs(), 1.0);
    }

    #[test]
    fn two_site_resolvent() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 1, 1.0);
        let s = eigendecompose(&snapshot(m)).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15 && (s.eigenvalues[1] - 1.0).abs() < 1e-15);
        let g = local_resolvent(&s, 0, zp(0.0, 1.0)).unwrap().value;
        assert!((g - C::new(0.0, 0.5)).norm() < 1e-15);
        assert!(local_resolvent(&s, 2, zp(0.0, 1.0)).is_err());
    }

    #[test]
    fn potential_transform_examples() {
        let v = Potential::from_values(vec![0.0]).unwrap();
        assert_eq!(stieltjes_potential(&v, zp(0.0, 1.0)), C::new(0.0, 1.0));
        let v = Potential::from_values(vec![1.0, -1.0]).unwrap();
        assert!((stieltjes_potential(&v, zp(0.0, 1.0)) - C::new(0.0, 0.5)).norm() < 1e-16);
    }

    #[test]
    fn zero_time_trace_matches_potential() {
        let v = Potential::<f64>::sample(40, Density::default(), 5);
        let path = DysonPath::new(40, 0.1, 2, 5).unwrap();
        let s = eigendecompose(&assemble_snapshot(&v, &path, 0).unwrap()).unwrap();
        for &(x, y) in &[(0.0, 0.01), (0.4, 0.3), (-2.0, 1.0)] {
            let z = zp(x, y);
            assert!((stieltjes_trace(&s, z) - stieltjes_potential(&v, z)).norm() < 1e-12);
        }
    }

    #[test]
    fn semicircle_closed_form() {
        let v = Potential::from_values(vec![0.0; 3]).unwrap();
        let m = deformed_semicircle(&v, 1.0, zp(0.0, 1.0)).unwrap();
        let want = C::new(0.0, (5f64.sqrt() - 1.0) / 2.0);
        assert!((m - want).norm() < 1e-10);
        let v = Potential::<f64>::sample(50, Density::default(), 1);
        let z = zp(0.1, 0.2);
        assert_eq!(deformed_semicircle(&v, 0.0, z).unwrap(), stieltjes_potential(&v, z));
    }

    #[test]
    fn fixed_point_failure_is_reported() {
        let v = Potential::from_values(vec![0.0; 3]).unwrap();
        let opts = FixedPointOptions {
            max_iterations: 2,
            ..Default::default()
        };
        match deformed_semicircle_with(&v, 1.0, zp(0.0, 1.0), opts) {
            Err(Error::Numerical(NumericalFailure::FixedPoint { iterations: 2, .. })) => {}
            other => panic!("{other:?}"),
        }
    }
}
