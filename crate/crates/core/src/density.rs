//! Registered densities for i.i.d. potentials and their continuum Stieltjes
//! transforms `E S_0(z) = ∫ ρ(v) / (v - z) dv`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::quadrature;
use statrs::function::erf::erf;

/// Compactly supported density of the potential entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    /// All mass at one point.
    PointMass(f64),
    /// Uniform on `[a, b]`.
    Uniform(f64, f64),
    /// Centered Gaussian of scale `sigma` conditioned on `[-cutoff, cutoff]`.
    TruncatedGaussian { sigma: f64, cutoff: f64 },
}

impl Default for Density {
    fn default() -> Self {
        Density::Uniform(-1.0, 1.0)
    }
}

const QUAD_TOL: f64 = 1e-10;

impl Density {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density::PointMass(a) => (a, a),
            Density::Uniform(a, b) => (a, b),
            Density::TruncatedGaussian { cutoff, .. } => (-cutoff, cutoff),
        }
    }

    /// Probability density at `v` (`None` for the point mass).
    pub fn pdf(&self, v: f64) -> Option<f64> {
        match *self {
            Density::PointMass(_) => None,
            Density::Uniform(a, b) => Some(if (a..=b).contains(&v) { 1.0 / (b - a) } else { 0.0 }),
            Density::TruncatedGaussian { sigma, cutoff } => {
                if v.abs() > cutoff {
                    return Some(0.0);
                }
                let mass = erf(cutoff / (sigma * std::f64::consts::SQRT_2));
                let g = (-0.5 * (v / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                Some(g / mass)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density::PointMass(a) => a,
            Density::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
            Density::TruncatedGaussian { sigma, cutoff } => loop {
                let g: f64 = rng.sample(StandardNormal);
                let v = sigma * g;
                if v.abs() <= cutoff {
                    break v;
                }
            },
        }
    }

    /// `E S_0(z)` for `Im z > 0`. Closed form for the uniform and point
    /// densities, adaptive quadrature (absolute tolerance 1e-10) otherwise.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        match *self {
            Density::PointMass(a) => 1.0 / (a - z),
            Density::Uniform(a, b) => {
                let (x, y) = (z.re, z.im);
                let im = ((b - x) / y).atan() - ((a - x) / y).atan();
                let re = 0.5 * (((b - x).powi(2) + y * y) / ((a - x).powi(2) + y * y)).ln();
                Complex64::new(re, im) / (b - a)
            }
            Density::TruncatedGaussian { cutoff, .. } => {
                let (x, y) = (z.re, z.im);
                let re_f = |v: f64| self.pdf(v).unwrap() * (v - x) / ((v - x).powi(2) + y * y);
                let im_f = |v: f64| self.pdf(v).unwrap() * y / ((v - x).powi(2) + y * y);
                let split = |f: &dyn Fn(f64) -> f64| {
                    if x > -cutoff && x < cutoff {
                        quadrature::integrate(f, -cutoff, x, 0.5 * QUAD_TOL)
                            + quadrature::integrate(f, x, cutoff, 0.5 * QUAD_TOL)
                    } else {
                        quadrature::integrate(f, -cutoff, cutoff, QUAD_TOL)
                    }
                };
                Complex64::new(split(&re_f), split(&im_f))
            }
        }
    }

    /// Variance of a single draw.
    pub fn variance(&self) -> f64 {
        match *self {
            Density::PointMass(_) => 0.0,
            Density::Uniform(a, b) => (b - a).powi(2) / 12.0,
            Density::TruncatedGaussian { cutoff, .. } => {
                quadrature::integrate(|v| v * v * self.pdf(v).unwrap(), -cutoff, cutoff, 1e-12)
            }
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Density::PointMass(a) => write!(f, "point-mass({a})"),
            Density::Uniform(a, b) => write!(f, "uniform({a},{b})"),
            Density::TruncatedGaussian { sigma, cutoff } => {
                write!(f, "truncated-gaussian({sigma},{cutoff})")
            }
        }
    }
}

impl FromStr for Density {
    type Err = Error;

    /// Accepts `uniform`, `uniform(a,b)`, `point-mass`, `point-mass(a)`,
    /// `truncated-gaussian` (σ = 1/2 on [-1, 1]) and `truncated-gaussian(sigma,cutoff)`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown density id '{s}'"));
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => {
                let args: Result<Vec<f64>, _> =
                    s[i + 1..s.len() - 1].split(',').map(|a| a.trim().parse::<f64>()).collect();
                (&s[..i], args.map_err(|_| bad())?)
            }
            Some(_) => return Err(bad()),
            None => (s, Vec::new()),
        };
        if args.iter().any(|a| !a.is_finite()) {
            return Err(bad());
        }
        let d = match (name, args.as_slice()) {
            ("uniform", []) => Density::Uniform(-1.0, 1.0),
            ("uniform", &[a, b]) if a < b => Density::Uniform(a, b),
            ("point-mass", []) => Density::PointMass(0.0),
            ("point-mass", &[a]) => Density::PointMass(a),
            ("truncated-gaussian", []) => Density::TruncatedGaussian { sigma: 0.5, cutoff: 1.0 },
            ("truncated-gaussian", &[sigma, cutoff]) if sigma > 0.0 && cutoff > 0.0 => {
                Density::TruncatedGaussian { sigma, cutoff }
            }
            _ => return Err(bad()),
        };
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for id in ["uniform", "uniform(-2,0.5)", "point-mass", "point-mass(0.3)", "truncated-gaussian"] {
            let d: Density = id.parse().unwrap();
            let again: Density = d.to_string().parse().unwrap();
            assert_eq!(d, again);
        }
        assert!("cauchy".parse::<Density>().is_err());
        assert!("uniform(1,0)".parse::<Density>().is_err());
    }

    #[test]
    fn uniform_transform_matches_quadrature() {
        let d = Density::Uniform(-1.0, 1.0);
        for &(x, y) in &[(0.0, 1.0), (0.3, 0.01), (-1.5, 0.2), (0.99, 1e-3)] {
            let z = Complex64::new(x, y);
            let re = quadrature::integrate(|v| 0.5 * (v - x) / ((v - x).powi(2) + y * y), -1.0, 1.0, 1e-12);
            let im = quadrature::integrate(|v| 0.5 * y / ((v - x).powi(2) + y * y), -1.0, 1.0, 1e-12);
            let s = d.stieltjes(z);
            assert!((s.re - re).abs() < 1e-10 && (s.im - im).abs() < 1e-10, "{z}: {s} vs {re} {im}");
        }
        // (1/2) ∫ dv / (v - i) = i pi / 4
        let s = d.stieltjes(Complex64::new(0.0, 1.0));
        assert!((s - Complex64::new(0.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-14);
    }

    #[test]
    fn truncated_gaussian_is_normalized() {
        let d: Density = "truncated-gaussian".parse().unwrap();
        let mass = quadrature::integrate(|v| d.pdf(v).unwrap(), -1.0, 1.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-11);
        // large-|z| asymptotics: S(z) ≈ -1/z
        let z = Complex64::new(0.0, 300.0);
        assert!((d.stieltjes(z) * z + 1.0).norm() < 1e-4);
    }
}
