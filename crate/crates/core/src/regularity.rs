//! Regularity of `S_0` for concrete potentials, and concentration of
//! `Im S_0` around its continuum mean for random ones.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::characteristics::sup_abs_stieltjes;
use crate::density::Density;
use crate::ensemble::{ModelParams, Potential};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::seed::derive_seed;
use crate::spectral::stieltjes_of;

/// Thresholds turning the fitted constants into a pass/fail pair, and the
/// probe resolution.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Top of the domain `D = W + i[η, top]`.
    pub top: f64,
    /// `K_m` passes when `K_m_fit <= km_ceiling`.
    pub km_ceiling: f64,
    /// `K_l` passes when `K_l_fit >= kl_floor`.
    pub kl_floor: f64,
    /// Boundary probes at height `y` are spaced `y * relative_spacing`.
    pub relative_spacing: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            top: 1.0,
            km_ceiling: 2.0,
            kl_floor: 0.1,
            relative_spacing: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityVerdict {
    /// `sup_{Im z >= η} |S_0| / log N`, slack included.
    pub k_m_fit: f64,
    /// `sup_{Im z >= η} |S_0| / (1 + log(1 + η^{-2}))`.
    pub k_m_log_eta: f64,
    /// `inf Im S_0` over `{Im z >= η, dist(z, D) <= ε}`, slack included.
    pub k_l_fit: f64,
    pub sup_abs_s0: f64,
    /// `(K_m passes, K_l passes)`.
    pub passes: (bool, bool),
    /// Spacing of the `|S_0|` probes on `Im z = η` after refinement.
    pub sup_probe_spacing: f64,
    /// Relative spacing of the `Im S_0` boundary probes.
    pub inf_relative_spacing: f64,
}

/// Points on the boundary of `{z : Re z ∈ [a, b], lo <= Im z <= hi}` with
/// spacing `c * Im z`: geometric along the sides, uniform on the bottom and top.
fn rectangle_boundary(a: f64, b: f64, lo: f64, hi: f64, c: f64) -> Vec<Complex64> {
    let mut pts = Vec::new();
    let line = |y: f64, pts: &mut Vec<Complex64>| {
        let k = ((b - a) / (c * y)).ceil().max(1.0) as usize;
        for i in 0..=k {
            pts.push(Complex64::new(a + (b - a) * i as f64 / k as f64, y));
        }
    };
    line(lo, &mut pts);
    line(hi, &mut pts);
    let mut y = lo;
    while y < hi {
        y = (y * (1.0 + c)).min(hi);
        pts.push(Complex64::new(a, y));
        pts.push(Complex64::new(b, y));
    }
    pts
}

/// Boundary of `{Im z >= η, dist(z, W + i[η, top]) <= ε}`: the bottom segment,
/// the two sides, the top segment and the two corner quarter-circles.
fn fattened_boundary(w: (f64, f64), eta: f64, top: f64, eps: f64, c: f64) -> Vec<Complex64> {
    let mut pts = rectangle_boundary(w.0 - eps, w.1 + eps, eta, top, c);
    let k = ((w.1 - w.0) / (c * (top + eps))).ceil().max(1.0) as usize;
    for i in 0..=k {
        pts.push(Complex64::new(w.0 + (w.1 - w.0) * i as f64 / k as f64, top + eps));
    }
    let arc = ((std::f64::consts::FRAC_PI_2 * eps) / (c * top)).ceil().max(4.0) as usize;
    for i in 0..=arc {
        let phi = std::f64::consts::FRAC_PI_2 * i as f64 / arc as f64;
        pts.push(Complex64::new(w.0 - eps * phi.cos(), top + eps * phi.sin()));
        pts.push(Complex64::new(w.1 + eps * phi.cos(), top + eps * phi.sin()));
    }
    pts
}

/// Fits the constants of `|S_0| <= K_m log N` and `Im S_0 >= K_l`.
///
/// The supremum of `|S_0|` over `Im z >= η` is attained on `Im z = η`
/// (maximum modulus); see [`sup_abs_stieltjes`]. Its slack is
/// `(h/2) sup Im S_0 / η`, using `|S_0'| <= Im S_0 / Im z` and the final probe
/// spacing `h = η/128`. The infimum of the harmonic `Im S_0` is attained on the
/// boundary of the fattened domain, probed at spacing `c y`; by the same
/// derivative bound the value between probes is at least `(1 - c/2)` times the
/// smaller neighbour, and that factor is applied.
pub fn verify_assumption<S: Real>(
    v: &Potential<S>,
    params: &ModelParams<S>,
    window: (f64, f64),
    epsilon: f64,
    opts: &VerifyOptions,
) -> RegularityVerdict {
    let eta = params.eta.to_f64_lossy();
    let n = params.n as f64;
    let sup = sup_abs_stieltjes(v, params.eta).to_f64_lossy();
    let h = eta / 128.0;
    let slack = 0.5 * h * sup / eta;
    let sup_bound = sup + slack;
    let c = opts.relative_spacing;
    let inf = fattened_boundary(window, eta, opts.top, epsilon, c)
        .into_iter()
        .map(|z| stieltjes_of(v.values(), C::new(S::lit(z.re), S::lit(z.im))).im.to_f64_lossy())
        .fold(f64::INFINITY, f64::min);
    let k_l_fit = inf * (1.0 - 0.5 * c);
    let k_m_fit = sup_bound / n.ln();
    RegularityVerdict {
        k_m_fit,
        k_m_log_eta: sup_bound / (1.0 + (1.0 + eta.powi(-2)).ln()),
        k_l_fit,
        sup_abs_s0: sup,
        passes: (k_m_fit <= opts.km_ceiling, k_l_fit >= opts.kl_floor),
        sup_probe_spacing: h,
        inf_relative_spacing: c,
    }
}

/// How the supremum over `D(J, ζ)` is approximated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcentrationLattice {
    /// Boundary probes at spacing `c Im z`. `Im S_0 - E Im S_0` is harmonic on
    /// `D(J, ζ)`, so its supremum modulus is attained on the boundary.
    Boundary { relative_spacing: f64 },
    /// Full square lattice of spacing `μ_min ζ² / 12` over `D(J, ζ)`.
    Dense { max_points: usize },
}

impl Default for ConcentrationLattice {
    fn default() -> Self {
        ConcentrationLattice::Boundary { relative_spacing: 1.0 / 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationEstimate {
    pub density: Density,
    pub n: usize,
    pub j: (f64, f64),
    pub zeta: f64,
    pub mu_grid: Vec<f64>,
    /// Empirical `P(sup |Im S_0 - E Im S_0| > μ)` per `μ`.
    pub tail_prob: Vec<f64>,
    pub ensemble: usize,
    pub seed: u64,
    /// Supremum for every draw.
    pub sups: Vec<f64>,
    pub lattice: ConcentrationLattice,
    pub lattice_points: usize,
    /// `(z, E Im S_0(z))` at a few audit points.
    pub reference: Vec<(Complex64, f64)>,
}

fn lattice_points(j: (f64, f64), zeta: f64, mu_min: f64, lattice: ConcentrationLattice) -> Result<Vec<Complex64>> {
    match lattice {
        ConcentrationLattice::Boundary { relative_spacing } => Ok(rectangle_boundary(j.0, j.1, zeta, 1.0, relative_spacing)),
        ConcentrationLattice::Dense { max_points } => {
            let h = mu_min * zeta * zeta / 12.0;
            let nx = ((j.1 - j.0) / h).ceil() + 1.0;
            let ny = ((1.0 - zeta) / h).ceil() + 1.0;
            if nx * ny > max_points as f64 {
                return Err(Error::Config(format!(
                    "dense lattice of spacing {h:e} has {:.3e} points, above the budget {max_points}",
                    nx * ny
                )));
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let mut pts = Vec::with_capacity(nx * ny);
            for a in 0..nx {
                for b in 0..ny {
                    let x = (j.0 + a as f64 * h).min(j.1);
                    let y = (zeta + b as f64 * h).min(1.0);
                    pts.push(Complex64::new(x, y));
                }
            }
            Ok(pts)
        }
    }
}

/// Monte-Carlo tail of `sup_{D(J, ζ)} |Im S_0 - E Im S_0|` over `ensemble`
/// i.i.d. potentials; `E Im S_0` is the continuum transform of `density`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_experiment(
    density: Density,
    n: usize,
    j: (f64, f64),
    zeta: f64,
    mu_grid: &[f64],
    ensemble: usize,
    seed: u64,
    lattice: ConcentrationLattice,
) -> Result<ConcentrationEstimate> {
    if ensemble < 100 {
        return Err(Error::Config(format!("concentration needs an ensemble of at least 100, got {ensemble}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) || !(j.0 < j.1) {
        return Err(Error::Config(format!("need 0 < zeta < 1 and a non-empty J, got zeta = {zeta}, J = {j:?}")));
    }
    if mu_grid.iter().any(|m| !(*m > 0.0)) || mu_grid.is_empty() {
        return Err(Error::Config("mu grid must be non-empty and positive".into()));
    }
    let mu_min = mu_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let pts = lattice_points(j, zeta, mu_min, lattice)?;
    let reference: Vec<f64> = pts.iter().map(|&z| density.stieltjes(z).im).collect();
    let sups: Vec<f64> = (0..ensemble as u64)
        .into_par_iter()
        .map(|r| {
            let v = Potential::<f64>::sample(n, density, derive_seed(seed, r, "concentration"));
            pts.iter()
                .zip(&reference)
                .map(|(&z, &e)| (stieltjes_of(v.values(), z).im - e).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let tail_prob = mu_grid
        .iter()
        .map(|&mu| sups.iter().filter(|&&s| s > mu).count() as f64 / ensemble as f64)
        .collect();
    let audit = [Complex64::new(j.0, zeta), Complex64::new(0.5 * (j.0 + j.1), zeta), Complex64::new(j.1, 1.0)];
    Ok(ConcentrationEstimate {
        density,
        n,
        j,
        zeta,
        mu_grid: mu_grid.to_vec(),
        tail_prob,
        ensemble,
        seed,
        sups,
        lattice,
        lattice_points: pts.len(),
        reference: audit.iter().map(|&z| (z, density.stieltjes(z).im)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_blows_up() {
        let n = 400;
        let p = ModelParams::<f64>::new(n, 0.5, 0.3).unwrap();
        let v = Potential::from_values(vec![0.0; n]).unwrap();
        let verdict = verify_assumption(&v, &p, (-0.25, 0.25), 0.25, &VerifyOptions::default());
        assert!((verdict.sup_abs_s0 - 1.0 / p.eta).abs() < 1e-9 / p.eta);
        assert!(!verdict.passes.0);
    }

    #[test]
    fn tail_above_deterministic_cap_is_zero() {
        let zeta = 0.05;
        let est = concentration_experiment(Density::default(), 200, (-0.25, 0.25), zeta, &[0.1, 2.0 / zeta], 100, 3, Default::default())
            .unwrap();
        assert_eq!(est.tail_prob[1], 0.0);
        assert!(est.tail_prob[0] >= est.tail_prob[1]);
    }

    #[test]
    fn dense_lattice_budget() {
        let r = concentration_experiment(
            Density::default(),
            200,
            (-0.25, 0.25),
            0.05,
            &[0.01],
            100,
            3,
            ConcentrationLattice::Dense { max_points: 1000 },
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
