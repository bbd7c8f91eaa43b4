use super::driver::{Drift, SpectralPath};
use super::integrate::{run, FlowOptions, RunSpec, Stepping};
use crate::ensemble::Potential;
use crate::error::{NumericalFailure, Result};
use crate::scalar::{inv_shift, Real, C};
use crate::spectral::UpperHalfPoint;

const MAX_CORRECTIONS: usize = 12;

/// A solution `w` of `ξ_T(w) = z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage<S> {
    pub z: UpperHalfPoint<S>,
    pub w: UpperHalfPoint<S>,
    /// `|ξ_T(w) - z|` for the shooting integrator.
    pub residual: S,
    pub corrections: usize,
    /// RK4 steps per grid interval used by the shooting integrator.
    pub substeps: usize,
}

/// Shooting target for `|ξ_T(w) - z|`.
fn target<S: Real>(z: C<S>) -> S {
    S::lit(1e-10).max(S::lit(64.0) * S::epsilon() * z.norm())
}

/// Integrates the time-reversed flow from `z` at `t = T` back to `t = 0`, then
/// refines by Newton shooting on `w ↦ ξ_T(w)` with the variational equation
/// `dJ/dt = -∂_z S_t(ξ) J`. The shooting runs use a fixed RK4 step sequence
/// (the finest one the backward pass needed, on every interval) so the map
/// being solved is smooth in `w`.
pub fn find_preimage<S: Real, D: Drift<S>>(drift: &D, z: UpperHalfPoint<S>, opts: &FlowOptions<S>) -> Result<Preimage<S>> {
    if drift.horizon() == S::zero() {
        return Ok(Preimage {
            z,
            w: z,
            residual: S::zero(),
            corrections: 0,
            substeps: 0,
        });
    }
    let mut local = *opts;
    local.track_sites = false;
    let back = run(
        drift,
        &RunSpec {
            z0: z.z(),
            forward: false,
            stop: false,
            jacobian: false,
            stepping: Stepping::Adaptive,
        },
        &local,
    )?;
    let substeps = back.steps_per_interval.iter().copied().max().unwrap_or(1).max(4);
    let mut w = back.state.xi;
    let goal = target(z.z());
    let mut residual = S::infinity();
    for corrections in 0..=MAX_CORRECTIONS {
        let fwd = run(
            drift,
            &RunSpec {
                z0: w,
                forward: true,
                stop: false,
                jacobian: true,
                stepping: Stepping::Fixed(substeps),
            },
            &local,
        )?;
        let f = fwd.state.xi - z.z();
        residual = f.norm();
        if residual <= goal {
            return Ok(Preimage {
                z,
                w: UpperHalfPoint::from_complex(w)?,
                residual,
                corrections,
                substeps,
            });
        }
        w = w - f / fwd.state.j;
        if !(w.im > S::zero()) {
            break;
        }
    }
    Err(NumericalFailure::Shooting {
        residual: residual.to_f64_lossy(),
        iterations: MAX_CORRECTIONS,
    }
    .into())
}

/// `ξ_T(w)` from the same fixed-step integrator the shooting used.
pub fn flow_endpoint<S: Real, D: Drift<S>>(drift: &D, pre: &Preimage<S>, opts: &FlowOptions<S>) -> Result<C<S>> {
    if pre.substeps == 0 {
        return Ok(pre.w.z());
    }
    let r = run(
        drift,
        &RunSpec {
            z0: pre.w.z(),
            forward: true,
            stop: false,
            jacobian: false,
            stepping: Stepping::Fixed(pre.substeps),
        },
        opts,
    )?;
    Ok(r.state.xi)
}

/// Per-site comparison of `G_T(x, z)` with `G_0(x, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinationCheck<S> {
    pub preimage: Preimage<S>,
    pub sites: Vec<usize>,
    pub g_t: Vec<C<S>>,
    pub g_0: Vec<C<S>>,
    /// `|G_T(x, z) - G_0(x, w)| / |G_0(x, w)|`.
    pub relative_errors: Vec<S>,
}

/// Compares the exact local resolvents of `H_T` at the driver's tracked sites
/// with the diagonal resolvent of `V` at the preimage.
pub fn subordination_check<S: Real>(
    drift: &SpectralPath<S>,
    v: &Potential<S>,
    z: UpperHalfPoint<S>,
    opts: &FlowOptions<S>,
) -> Result<SubordinationCheck<S>> {
    let pre = find_preimage(drift, z, opts)?;
    let last = drift.breakpoints().len() - 1;
    let g_t = drift.local_resolvents(last, z.z());
    let g_0: Vec<C<S>> = drift.sites().iter().map(|&x| inv_shift(v.values()[x], pre.w.z())).collect();
    let relative_errors = g_t.iter().zip(&g_0).map(|(a, b)| (*a - *b).norm() / b.norm()).collect();
    Ok(SubordinationCheck {
        preimage: pre,
        sites: drift.sites().to_vec(),
        g_t,
        g_0,
        relative_errors,
    })
}
