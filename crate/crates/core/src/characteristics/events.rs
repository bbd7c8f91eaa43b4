use super::driver::{Drift, SpectralPath};
use super::grid::{GridPoint, GridSpec};
use super::integrate::{integrate_characteristic, CharacteristicTrajectory, FlowOptions, TrajectorySample};
use crate::ensemble::Potential;
use crate::error::Result;
use crate::scalar::{inv_shift, Real};

/// Event thresholds and the grid subsample.
#[derive(Debug, Clone, Copy)]
pub struct EventOptions {
    /// `A_G(ℓ)` threshold exponent: `N^ℓ`.
    pub ell: f64,
    /// `A_S` threshold `4 / (Nη)^β`.
    pub beta: f64,
    /// Number of lattice points followed (the whole lattice when smaller).
    pub subsample: usize,
    /// Share of the subsample drawn from `D` itself.
    pub in_domain_fraction: f64,
    pub seed: u64,
    /// Keep the trajectories in the result.
    pub keep_trajectories: bool,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self {
            ell: 0.25,
            beta: 0.5,
            subsample: 512,
            in_domain_fraction: 0.5,
            seed: 0,
            keep_trajectories: false,
        }
    }
}

/// Per-point summary of one characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDiagnostics<S> {
    pub point: GridPoint<S>,
    /// `sup |S_t(ξ_t) - S_0(z)|` over the path grid times `t <= τ`.
    pub s_deviation: S,
    /// The same supremum over every accepted integrator step.
    pub s_deviation_all_steps: S,
    /// `sup` over tracked sites and grid times `t <= τ` of `Im G_t(x, ξ_t) / Im G_0(x, z)`.
    pub g_ratio: S,
    pub stopped: bool,
    pub tau: Option<S>,
    /// `∫_0^{T ∧ τ} (Im ξ_s)^{-2} ds`.
    pub inverse_square_integral: S,
}

/// Fluctuation statistics over a grid subsample and the tracked sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEvents<S> {
    pub a_s_statistic: S,
    pub a_s_threshold: S,
    pub a_s_occurred: bool,
    pub a_g_statistic: S,
    pub a_g_threshold: S,
    pub a_g_occurred: bool,
    pub subsample_seed: u64,
    pub points: Vec<PointDiagnostics<S>>,
    pub trajectories: Vec<CharacteristicTrajectory<S>>,
}

/// Follows the characteristics of a lattice subsample and records the
/// suprema entering `A_S` and `A_G(ℓ)`. Both are taken over the path grid
/// times, where the spectral data is exact rather than interpolated.
pub fn track_flow_events<S: Real>(
    drift: &SpectralPath<S>,
    v: &Potential<S>,
    grid: &GridSpec<S>,
    flow: &FlowOptions<S>,
    opts: &EventOptions,
) -> Result<FlowEvents<S>> {
    let n = S::from_usize_lossy(v.len());
    let a_s_threshold = S::lit(4.0) / (n * grid.eta).powf(S::lit(opts.beta));
    let a_g_threshold = n.powf(S::lit(opts.ell));
    let flow = flow.tracking();
    let mut points = Vec::new();
    let mut trajectories = Vec::new();
    for gp in grid.subsample(opts.subsample, opts.in_domain_fraction, opts.seed) {
        let traj = integrate_characteristic(drift, gp.z, &flow)?;
        let s0 = drift.stieltjes(S::zero(), gp.z.z());
        let dev = |p: &TrajectorySample<S>| (p.s - s0).norm();
        let s_deviation = traj.samples.iter().filter(|p| p.grid_index.is_some()).map(dev).fold(S::zero(), S::max);
        let s_deviation_all_steps = traj.samples.iter().map(dev).fold(S::zero(), S::max);
        let im_g0: Vec<S> = drift.sites().iter().map(|&x| inv_shift(v.values()[x], gp.z.z()).im).collect();
        let g_ratio = traj
            .g_along
            .iter()
            .flat_map(|g| g.values.iter().zip(&im_g0).map(|(gt, g0)| gt.im / *g0))
            .fold(S::zero(), S::max);
        points.push(PointDiagnostics {
            point: gp,
            s_deviation,
            s_deviation_all_steps,
            g_ratio,
            stopped: traj.stopped,
            tau: traj.tau,
            inverse_square_integral: traj.last().inverse_square_integral,
        });
        if opts.keep_trajectories {
            trajectories.push(traj);
        }
    }
    let a_s_statistic = points.iter().map(|p| p.s_deviation).fold(S::zero(), S::max);
    let a_g_statistic = points.iter().map(|p| p.g_ratio).fold(S::zero(), S::max);
    Ok(FlowEvents {
        a_s_statistic,
        a_s_threshold,
        a_s_occurred: a_s_statistic > a_s_threshold,
        a_g_statistic,
        a_g_threshold,
        a_g_occurred: a_g_statistic > a_g_threshold,
        subsample_seed: opts.seed,
        points,
        trajectories,
    })
}
