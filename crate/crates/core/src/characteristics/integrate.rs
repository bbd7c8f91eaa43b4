use std::fmt;

use super::driver::Drift;
use crate::error::{Error, NumericalFailure};
use crate::scalar::{Real, C};
use crate::spectral::UpperHalfPoint;

/// Integrator controls.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions<S> {
    /// Spectral scale `η`; trajectories stop at `Im ξ = η / 2`.
    pub eta: S,
    /// Relative local-error tolerance of the step-doubling control.
    pub tolerance: S,
    /// `h <= T / steps_per_horizon`.
    pub steps_per_horizon: usize,
    /// Record `G_t(x, ξ_t)` for the drift's tracked sites at grid times.
    pub track_sites: bool,
}

impl<S: Real> FlowOptions<S> {
    pub fn new(eta: S) -> Self {
        Self {
            eta,
            tolerance: S::lit(1e-8),
            steps_per_horizon: 256,
            track_sites: false,
        }
    }

    pub fn tracking(mut self) -> Self {
        self.track_sites = true;
        self
    }

    fn effective_tolerance(&self) -> S {
        self.tolerance.max(S::lit(64.0) * S::epsilon())
    }
}

/// One recorded point of a characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<S> {
    pub t: S,
    pub xi: C<S>,
    /// `S_t(ξ_t)`.
    pub s: C<S>,
    /// `∫_0^t Im S_u(ξ_u) / (Im ξ_u)² du`.
    pub drift_integral: S,
    /// `∫_0^t (Im ξ_u)^{-2} du`.
    pub inverse_square_integral: S,
    /// Index of the path grid time, when `t` is one.
    pub grid_index: Option<usize>,
}

/// `G_{t_k}(x, ξ_{t_k})` for the tracked sites at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteResolvents<S> {
    /// Index into the trajectory samples.
    pub sample: usize,
    pub grid_index: usize,
    pub values: Vec<C<S>>,
}

/// The stopped curve `ξ_t(z0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicTrajectory<S> {
    pub z0: UpperHalfPoint<S>,
    pub samples: Vec<TrajectorySample<S>>,
    pub stopped: bool,
    /// Stopping time, when the curve reached `Im ξ = η/2` before the horizon.
    pub tau: Option<S>,
    pub g_along: Vec<SiteResolvents<S>>,
}

impl<S: Real> CharacteristicTrajectory<S> {
    pub fn last(&self) -> &TrajectorySample<S> {
        self.samples.last().expect("trajectory has its initial sample")
    }

    pub fn s_along(&self) -> impl Iterator<Item = C<S>> + '_ {
        self.samples.iter().map(|p| p.s)
    }

    /// Largest `|1/Im ξ_t - 1/Im z0 - ∫ Im S / (Im ξ)²|` relative to `1/Im ξ_t - 1/Im z0`.
    pub fn drift_conservation_error(&self) -> S {
        let inv0 = S::one() / self.z0.im;
        self.samples
            .iter()
            .skip(1)
            .map(|p| {
                let exact = S::one() / p.xi.im - inv0;
                ((p.drift_integral - exact) / exact).abs()
            })
            .fold(S::zero(), S::max)
    }
}

/// An integration failure together with everything computed before it.
#[derive(Debug, Clone)]
pub struct IntegrationError<S> {
    pub failure: NumericalFailure,
    pub partial: CharacteristicTrajectory<S>,
}

impl<S: Real> fmt::Display for IntegrationError<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.failure.fmt(f)
    }
}

impl<S: Real> std::error::Error for IntegrationError<S> {}

impl<S> From<IntegrationError<S>> for Error {
    fn from(e: IntegrationError<S>) -> Self {
        Error::Numerical(e.failure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct State<S> {
    pub xi: C<S>,
    pub q: S,
    pub p: S,
    pub j: C<S>,
}

impl<S: Real> State<S> {
    fn start(xi: C<S>) -> Self {
        Self {
            xi,
            q: S::zero(),
            p: S::zero(),
            j: C::new(S::one(), S::zero()),
        }
    }

    #[inline]
    fn axpy(&self, h: S, d: &Self) -> Self {
        Self {
            xi: self.xi + d.xi * h,
            q: self.q + d.q * h,
            p: self.p + d.p * h,
            j: self.j + d.j * h,
        }
    }
}

/// How a run is stepped.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stepping {
    Adaptive,
    /// This many equal RK4 steps per grid interval.
    Fixed(usize),
}

pub(crate) struct RunSpec<S> {
    pub z0: C<S>,
    pub forward: bool,
    pub stop: bool,
    pub jacobian: bool,
    pub stepping: Stepping,
}

pub(crate) struct Run<S> {
    pub traj: CharacteristicTrajectory<S>,
    pub state: State<S>,
    /// Accepted steps per grid interval, in the order visited.
    pub steps_per_interval: Vec<usize>,
}

struct Ode<'a, S, D> {
    drift: &'a D,
    jacobian: bool,
    _p: std::marker::PhantomData<S>,
}

impl<S: Real, D: Drift<S>> Ode<'_, S, D> {
    /// Derivative of the augmented state and the drift value `S_t(ξ)`.
    #[inline]
    fn eval(&self, t: S, y: &State<S>) -> (State<S>, C<S>) {
        let s = self.drift.stieltjes(t, y.xi);
        let inv = S::one() / (y.xi.im * y.xi.im);
        let j = if self.jacobian {
            -(self.drift.stieltjes_derivative(t, y.xi) * y.j)
        } else {
            C::new(S::zero(), S::zero())
        };
        (
            State {
                xi: -s,
                q: s.im * inv,
                p: inv,
                j,
            },
            s,
        )
    }

    #[inline]
    fn rk4(&self, t: S, y: &State<S>, h: S, k1: &State<S>) -> State<S> {
        let hh = h * S::half();
        let (k2, _) = self.eval(t + hh, &y.axpy(hh, k1));
        let (k3, _) = self.eval(t + hh, &y.axpy(hh, &k2));
        let (k4, _) = self.eval(t + h, &y.axpy(h, &k3));
        let sixth = h / S::lit(6.0);
        State {
            xi: y.xi + (k1.xi + (k2.xi + k3.xi) * S::two() + k4.xi) * sixth,
            q: y.q + (k1.q + (k2.q + k3.q) * S::two() + k4.q) * sixth,
            p: y.p + (k1.p + (k2.p + k3.p) * S::two() + k4.p) * sixth,
            j: y.j + (k1.j + (k2.j + k3.j) * S::two() + k4.j) * sixth,
        }
    }

    /// Two half steps; the more accurate of the step-doubling pair.
    fn doubled(&self, t: S, y: &State<S>, h: S, k1: &State<S>) -> State<S> {
        let hh = h * S::half();
        let mid = self.rk4(t, y, hh, k1);
        let (km, _) = self.eval(t + hh, &mid);
        self.rk4(t + hh, &mid, hh, &km)
    }
}

fn local_error<S: Real>(a: &State<S>, b: &State<S>, h: S, jacobian: bool) -> S {
    let im = b.xi.im.abs();
    let e_xi = (a.xi - b.xi).norm() / im;
    let e_q = (a.q - b.q).abs() / (b.q.abs() + S::one() / im);
    let e_p = (a.p - b.p).abs() / (b.p.abs() + h.abs() / (im * im));
    let mut e = e_xi.max(e_q).max(e_p);
    if jacobian {
        e = e.max((a.j - b.j).norm() / b.j.norm());
    }
    e / S::lit(15.0)
}

pub(crate) fn run<S: Real, D: Drift<S>>(
    drift: &D,
    spec: &RunSpec<S>,
    opts: &FlowOptions<S>,
) -> Result<Run<S>, IntegrationError<S>> {
    let ode = Ode {
        drift,
        jacobian: spec.jacobian,
        _p: std::marker::PhantomData,
    };
    let grid = drift.breakpoints();
    let m = grid.len() - 1;
    let horizon = drift.horizon();
    let tol = opts.effective_tolerance();
    let level = opts.eta * S::half();
    let cross_tol = S::lit(1e-3) * opts.eta;
    let h_cap = horizon / S::from_usize_lossy(opts.steps_per_horizon);

    // visit order of grid indices
    let order: Vec<usize> = if spec.forward { (0..=m).collect() } else { (0..=m).rev().collect() };
    let mut t = grid[order[0]];
    let mut y = State::start(spec.z0);
    let (mut k1, mut s) = ode.eval(t, &y);
    let z0 = UpperHalfPoint {
        re: spec.z0.re,
        im: spec.z0.im,
    };
    let mut traj = CharacteristicTrajectory {
        z0,
        samples: Vec::new(),
        stopped: false,
        tau: None,
        g_along: Vec::new(),
    };
    let mut steps_per_interval = Vec::with_capacity(m);
    let record = |traj: &mut CharacteristicTrajectory<S>, t: S, y: &State<S>, s: C<S>, grid_index: Option<usize>| {
        traj.samples.push(TrajectorySample {
            t,
            xi: y.xi,
            s,
            drift_integral: y.q,
            inverse_square_integral: y.p,
            grid_index,
        });
        if let (true, Some(k)) = (opts.track_sites, grid_index) {
            traj.g_along.push(SiteResolvents {
                sample: traj.samples.len() - 1,
                grid_index: k,
                values: drift.local_resolvents(k, y.xi),
            });
        }
    };
    record(&mut traj, t, &y, s, Some(order[0]));
    let fail = |traj: CharacteristicTrajectory<S>, failure: NumericalFailure| IntegrationError { failure, partial: traj };
    if horizon == S::zero() || m == 0 {
        return Ok(Run {
            traj,
            state: y,
            steps_per_interval,
        });
    }

    let mut h = h_cap;
    for &k in &order[1..] {
        let target = grid[k];
        let mut accepted = 0usize;
        match spec.stepping {
            Stepping::Fixed(n_sub) => {
                let dt = (target - t) / S::from_usize_lossy(n_sub);
                let t0 = t;
                for i in 1..=n_sub {
                    let next = ode.rk4(t, &y, dt, &k1);
                    t = if i == n_sub { target } else { t0 + dt * S::from_usize_lossy(i) };
                    y = next;
                    if !(y.xi.im > S::zero()) {
                        return Err(fail(
                            traj,
                            NumericalFailure::PrematureStop {
                                re: z0.re.to_f64_lossy(),
                                im: z0.im.to_f64_lossy(),
                            },
                        ));
                    }
                    (k1, s) = ode.eval(t, &y);
                }
                accepted = n_sub;
                record(&mut traj, t, &y, s, Some(k));
            }
            Stepping::Adaptive => loop {
                let remaining = (target - t).abs();
                let h_max = h_cap.min(opts.eta / (S::lit(4.0) * s.norm()));
                h = h.min(h_max);
                let last = remaining <= h * (S::one() + S::lit(1e-9));
                let step = if last { remaining } else { h };
                let signed = if spec.forward { step } else { -step };
                let coarse = ode.rk4(t, &y, signed, &k1);
                let fine = ode.doubled(t, &y, signed, &k1);
                let err = local_error(&coarse, &fine, signed, spec.jacobian);
                if err.is_finite() && err <= tol && fine.xi.im > S::zero() {
                    // accepted
                    if spec.stop && fine.xi.im <= level {
                        let (theta, ys) = bisect_crossing(&ode, t, &y, signed, &k1, level, cross_tol);
                        t = t + theta;
                        y = ys;
                        s = ode.eval(t, &y).1;
                        accepted += 1;
                        record(&mut traj, t, &y, s, None);
                        traj.stopped = true;
                        traj.tau = Some(t);
                        steps_per_interval.push(accepted);
                        return Ok(Run {
                            traj,
                            state: y,
                            steps_per_interval,
                        });
                    }
                    debug_assert!(
                        if spec.forward { fine.xi.im < y.xi.im } else { fine.xi.im > y.xi.im },
                        "Im ξ not monotone"
                    );
                    t = if last { target } else { t + signed };
                    y = fine;
                    (k1, s) = ode.eval(t, &y);
                    accepted += 1;
                    let grow = if err > S::zero() {
                        (S::lit(0.9) * (tol / err).powf(S::lit(0.2))).min(S::two())
                    } else {
                        S::two()
                    };
                    if last {
                        record(&mut traj, t, &y, s, Some(k));
                        break;
                    }
                    record(&mut traj, t, &y, s, None);
                    h = step * grow;
                } else {
                    let shrink = if err.is_finite() && err > S::zero() {
                        (S::lit(0.9) * (tol / err).powf(S::lit(0.2))).max(S::lit(0.1))
                    } else {
                        S::lit(0.1)
                    };
                    h = step * shrink.min(S::half());
                    if h <= S::lit(1e-13) * horizon {
                        let samples = traj.samples.len();
                        return Err(fail(
                            traj,
                            NumericalFailure::StepUnderflow {
                                time: t.to_f64_lossy(),
                                step: h.to_f64_lossy(),
                                samples,
                            },
                        ));
                    }
                }
            },
        }
        steps_per_interval.push(accepted);
    }
    Ok(Run {
        traj,
        state: y,
        steps_per_interval,
    })
}

/// Step `theta` in `(0, h]` at which `Im ξ` crosses `level`, to within `tol`.
fn bisect_crossing<S: Real, D: Drift<S>>(
    ode: &Ode<'_, S, D>,
    t: S,
    y: &State<S>,
    h: S,
    k1: &State<S>,
    level: S,
    tol: S,
) -> (S, State<S>) {
    let (mut lo, mut hi) = (S::zero(), h);
    let mut best = ode.doubled(t, y, h, k1);
    let mut theta = h;
    for _ in 0..200 {
        if (best.xi.im - level).abs() <= tol {
            break;
        }
        theta = (lo + hi) * S::half();
        best = ode.doubled(t, y, theta, k1);
        if best.xi.im > level {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    (theta, best)
}

/// Integrates `dξ/dt = -S_t(ξ)` from `z0` on `[0, T]`, stopping where
/// `Im ξ` reaches `η/2`.
pub fn integrate_characteristic<S: Real, D: Drift<S>>(
    drift: &D,
    z0: UpperHalfPoint<S>,
    opts: &FlowOptions<S>,
) -> Result<CharacteristicTrajectory<S>, IntegrationError<S>> {
    let spec = RunSpec {
        z0: z0.z(),
        forward: true,
        stop: true,
        jacobian: false,
        stepping: Stepping::Adaptive,
    };
    if !(z0.im > opts.eta * S::half()) {
        return Err(IntegrationError {
            failure: NumericalFailure::PrematureStop {
                re: z0.re.to_f64_lossy(),
                im: z0.im.to_f64_lossy(),
            },
            partial: CharacteristicTrajectory {
                z0,
                samples: Vec::new(),
                stopped: true,
                tau: Some(S::zero()),
                g_along: Vec::new(),
            },
        });
    }
    run(drift, &spec, opts).map(|r| r.traj)
}

#[cfg(test)]
mod tests {
    use super::super::driver::ConstantDrift;
    use super::*;

    #[test]
    fn constant_drift_is_exact() {
        let s = C::new(0.3, 0.7);
        let drift = ConstantDrift::new(s, 0.05);
        let z0 = UpperHalfPoint::new(0.1, 0.5).unwrap();
        let traj = integrate_characteristic(&drift, z0, &FlowOptions::new(0.01)).unwrap();
        assert!(!traj.stopped);
        for p in &traj.samples {
            assert!((p.xi - (z0.z() - s * p.t)).norm() < 1e-10);
        }
        assert_eq!(traj.last().t, 0.05);
        assert!(traj.drift_conservation_error() < 1e-8);
    }

    #[test]
    fn constant_drift_stops_at_half_eta() {
        let drift = ConstantDrift::new(C::new(0.0, 1.0), 1.0);
        let eta = 0.1f64;
        let traj = integrate_characteristic(&drift, UpperHalfPoint::new(0.0, 0.3).unwrap(), &FlowOptions::new(eta)).unwrap();
        assert!(traj.stopped);
        let tau = traj.tau.unwrap();
        assert!((tau - 0.25).abs() <= 1e-3 * eta);
        assert!((traj.last().xi.im - eta / 2.0).abs() <= 1e-3 * eta);
    }

    #[test]
    fn start_below_stopping_level_is_rejected() {
        let drift = ConstantDrift::new(C::new(0.0, 1.0), 1.0);
        assert!(integrate_characteristic(&drift, UpperHalfPoint::new(0.0, 0.04).unwrap(), &FlowOptions::new(0.1)).is_err());
    }
}
