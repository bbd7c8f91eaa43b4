//! Support sets `X_λ = {x : |λ - V_x| <= N^{-1+κ}}` and the eigenvector
//! statistics measured against them.

use rayon::prelude::*;

use crate::density::Density;
use crate::ensemble::{assemble_snapshot, DysonPath, HamiltonianSnapshot, ModelParams, Potential};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_selected;
use crate::scalar::{inv_shift, Real, C};
use crate::seed::derive_seed;
use crate::spectral::{with_context, SpectralData};
use crate::stats::{log_log_fit, median, LinearFit};

/// Exponents `(κ, θ, γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents<S> {
    pub kappa: S,
    pub theta: S,
    pub gamma: S,
}

impl<S: Real> Exponents<S> {
    /// `κ = δ + 0.2`, `θ = δ - 0.15`, `γ = 0.05`.
    pub fn defaults(delta: S) -> Self {
        Self {
            kappa: delta + S::lit(0.2),
            theta: delta - S::lit(0.15),
            gamma: S::lit(0.05),
        }
    }
}

/// Statistics of one eigenvector `ψ_λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationReport<S> {
    pub lambda: S,
    pub x_size: usize,
    /// `Σ_{x ∉ X_λ} ψ_λ(x)²`.
    pub mass_outside: S,
    /// `Σ_{x ∈ X_λ} ψ_λ(x)²`.
    pub mass_inside: S,
    /// `max_x ψ_λ(x)²`.
    pub sup_norm_sq: S,
    /// `Σ_x ψ_λ(x)⁴`.
    pub ipr: S,
    pub kappa: S,
    pub theta: S,
    pub gamma: S,
}

/// Reports for the bulk eigenvalues of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationOutcome<S> {
    pub reports: Vec<LocalizationReport<S>>,
    /// No eigenvalue fell in the bulk of the window.
    pub empty_window: bool,
}

/// Eigenvalues with (some of) their eigenvectors.
pub trait Eigenpairs<S: Real> {
    fn dim(&self) -> usize;

    /// Eigenpairs with eigenvalue in `[lo, hi]` for which a vector is available.
    fn pairs_in(&self, lo: S, hi: S) -> Vec<(S, &[S])>;
}

impl<S: Real> Eigenpairs<S> for SpectralData<S> {
    fn dim(&self) -> usize {
        SpectralData::dim(self)
    }

    fn pairs_in(&self, lo: S, hi: S) -> Vec<(S, &[S])> {
        (0..self.dim())
            .filter(|&i| self.eigenvalues[i] >= lo && self.eigenvalues[i] <= hi)
            .map(|i| (self.eigenvalues[i], self.vector(i)))
            .collect()
    }
}

/// Full spectrum of a snapshot with eigenvectors for a window only.
#[derive(Debug, Clone)]
pub struct WindowSpectrum<S> {
    pub t: S,
    pub eigenvalues: Vec<S>,
    pub window: (S, S),
    /// `(value, vector)` for every eigenvalue in the window.
    pub pairs: Vec<(S, Vec<S>)>,
}

impl<S: Real> Eigenpairs<S> for WindowSpectrum<S> {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn pairs_in(&self, lo: S, hi: S) -> Vec<(S, &[S])> {
        assert!(lo >= self.window.0 && hi <= self.window.1, "requested range outside the computed window");
        self.pairs
            .iter()
            .filter(|(l, _)| *l >= lo && *l <= hi)
            .map(|(l, v)| (*l, v.as_slice()))
            .collect()
    }
}

/// Eigenvalues of `H` and eigenvectors for the eigenvalues in `window`.
pub fn window_spectrum<S: Real>(h: &HamiltonianSnapshot<S>, window: (S, S)) -> Result<WindowSpectrum<S>> {
    let sel = symmetric_eigen_selected(&h.matrix, |l| l >= window.0 && l <= window.1)
        .map_err(|e| with_context(e, h.seed, h.t))?;
    let n = h.matrix.dim();
    let pairs = sel
        .indices
        .iter()
        .enumerate()
        .map(|(k, &i)| (sel.values[i], sel.vectors[k * n..(k + 1) * n].to_vec()))
        .collect();
    Ok(WindowSpectrum {
        t: h.t,
        eigenvalues: sel.values,
        window,
        pairs,
    })
}

/// Central `fraction` of `window`.
pub fn bulk_window<S: Real>(window: (S, S), fraction: S) -> (S, S) {
    let mid = (window.0 + window.1) * S::half();
    let half = (window.1 - window.0) * S::half() * fraction;
    (mid - half, mid + half)
}

/// `X_λ` (0-based sites, ascending).
pub fn support_set<S: Real>(v: &Potential<S>, lambda: S, kappa: S, n: usize) -> Vec<usize> {
    let radius = ModelParams::<S>::scale(n, kappa);
    v.values()
        .iter()
        .enumerate()
        .filter(|(_, &vx)| (lambda - vx).abs() <= radius)
        .map(|(x, _)| x)
        .collect()
}

/// Statistics of one normalized vector against `X_λ`.
pub fn report_for<S: Real>(v: &Potential<S>, lambda: S, psi: &[S], exps: Exponents<S>) -> LocalizationReport<S> {
    let n = v.len();
    let radius = ModelParams::<S>::scale(n, exps.kappa);
    let (mut inside, mut outside, mut sup, mut ipr) = (S::zero(), S::zero(), S::zero(), S::zero());
    let mut x_size = 0;
    for (&vx, &p) in v.values().iter().zip(psi) {
        let w = p * p;
        if (lambda - vx).abs() <= radius {
            inside += w;
            x_size += 1;
        } else {
            outside += w;
        }
        sup = sup.max(w);
        ipr += w * w;
    }
    LocalizationReport {
        lambda,
        x_size,
        mass_outside: outside,
        mass_inside: inside,
        sup_norm_sq: sup,
        ipr,
        kappa: exps.kappa,
        theta: exps.theta,
        gamma: exps.gamma,
    }
}

/// One report per eigenvalue in the central `bulk_fraction` of `window`.
pub fn localization_report<S: Real, E: Eigenpairs<S>>(
    spec: &E,
    v: &Potential<S>,
    window: (S, S),
    exps: Exponents<S>,
    bulk_fraction: S,
) -> LocalizationOutcome<S> {
    let (lo, hi) = bulk_window(window, bulk_fraction);
    let reports: Vec<_> = spec
        .pairs_in(lo, hi)
        .into_iter()
        .map(|(lambda, psi)| report_for(v, lambda, psi, exps))
        .collect();
    LocalizationOutcome {
        empty_window: reports.is_empty(),
        reports,
    }
}

/// `η Σ_{x ∉ X} Im G(x, λ + iη)`, an upper bound for the mass of `ψ_λ` outside `X`.
pub fn spectral_measure_bound<S: Real>(spec: &SpectralData<S>, outside: &[usize], lambda: S, eta: S) -> S {
    let n = spec.dim();
    let z = C::new(lambda, eta);
    let g: Vec<C<S>> = spec.eigenvalues.iter().map(|&l| inv_shift(l, z)).collect();
    let mut total = S::zero();
    for &x in outside {
        let mut im = S::zero();
        for (i, gi) in g.iter().enumerate() {
            let w = spec.eigenvectors[i * n + x];
            im += w * w * gi.im;
        }
        total += im;
    }
    eta * total
}

/// One localization experiment at a single `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationConfig {
    pub n: usize,
    pub delta: f64,
    pub exponents: Exponents<f64>,
    pub window: (f64, f64),
    pub bulk_fraction: f64,
    pub density: Density,
    pub ensemble: usize,
    pub master_seed: u64,
    /// Replaces `T = N^{-1+δ}` (for the frozen `T = 0` limit).
    pub horizon_override: Option<f64>,
}

impl LocalizationConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon_override.unwrap_or_else(|| ModelParams::<f64>::scale(self.n, self.delta))
    }
}

/// Samples `V` and `H_T` for realization `r` and reports its bulk eigenvectors.
/// `H_T` is assembled from a single increment over `[0, T]`, which has the
/// law of the path at its endpoint.
pub fn localization_realization<S: Real>(cfg: &LocalizationConfig, r: u64) -> Result<LocalizationOutcome<S>> {
    let v = Potential::<S>::sample(cfg.n, cfg.density, derive_seed(cfg.master_seed, r, "potential"));
    let path = DysonPath::new(cfg.n, S::lit(cfg.horizon()), 1, derive_seed(cfg.master_seed, r, "path"))?;
    let h = assemble_snapshot(&v, &path, 1)?;
    let window = (S::lit(cfg.window.0), S::lit(cfg.window.1));
    let bulk = bulk_window(window, S::lit(cfg.bulk_fraction));
    let spec = window_spectrum(&h, bulk)?;
    let exps = Exponents {
        kappa: S::lit(cfg.exponents.kappa),
        theta: S::lit(cfg.exponents.theta),
        gamma: S::lit(cfg.exponents.gamma),
    };
    Ok(localization_report(&spec, &v, bulk, exps, S::one()))
}

/// Per-`N` medians over all bulk eigenvectors of all realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub realizations: usize,
    pub eigenvectors: usize,
    pub median_ipr: f64,
    pub median_sup_norm_sq: f64,
    pub median_mass_outside: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub ipr_fit: LinearFit,
    pub sup_norm_fit: LinearFit,
    pub mass_outside_fit: LinearFit,
}

/// Aggregates per-`N` report lists into medians and log-log slopes against `N`.
pub fn scaling_table(per_n: &[(usize, usize, Vec<LocalizationReport<f64>>)]) -> Result<ScalingTable> {
    let mut ns: Vec<usize> = per_n.iter().map(|p| p.0).collect();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Config(format!("a scaling sweep needs at least 3 distinct N, got {}", ns.len())));
    }
    let rows: Vec<ScalingRow> = per_n
        .iter()
        .map(|(n, realizations, reports)| {
            let col = |f: fn(&LocalizationReport<f64>) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
            ScalingRow {
                n: *n,
                realizations: *realizations,
                eigenvectors: reports.len(),
                median_ipr: col(|r| r.ipr),
                median_sup_norm_sq: col(|r| r.sup_norm_sq),
                median_mass_outside: col(|r| r.mass_outside),
            }
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let fit = |f: fn(&ScalingRow) -> f64| log_log_fit(&x, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(ScalingTable {
        ipr_fit: fit(|r| r.median_ipr),
        sup_norm_fit: fit(|r| r.median_sup_norm_sq),
        mass_outside_fit: fit(|r| r.median_mass_outside),
        rows,
    })
}

/// Runs every configuration (which must differ only in `N`) and fits the
/// scaling of the medians. Realizations run on the rayon pool.
pub fn scaling_sweep(configs: &[LocalizationConfig]) -> Result<ScalingTable> {
    if let Some(first) = configs.first() {
        for c in configs {
            let mut probe = c.clone();
            probe.n = first.n;
            if probe != *first {
                return Err(Error::Config("scaling sweep configurations must differ only in N".into()));
            }
        }
    }
    let mut distinct: Vec<usize> = configs.iter().map(|c| c.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Config(format!("a scaling sweep needs at least 3 distinct N, got {}", distinct.len())));
    }
    let mut per_n = Vec::new();
    for c in configs {
        let outcomes: Vec<Result<LocalizationOutcome<f64>>> = (0..c.ensemble as u64)
            .into_par_iter()
            .map(|r| localization_realization::<f64>(c, r))
            .collect();
        let mut reports = Vec::new();
        for o in outcomes {
            reports.extend(o?.reports);
        }
        per_n.push((c.n, c.ensemble, reports));
    }
    scaling_table(&per_n)
}
