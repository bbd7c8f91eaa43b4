mod common;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpflow_core::density::Density;
use rpflow_core::ensemble::{assemble_snapshot, DysonPath, HamiltonianSnapshot, ModelParams, Potential};
use rpflow_core::linalg::symmetric_eigenvalues;
use rpflow_core::spectral::*;

fn snapshot(n: usize, horizon: f64, seed: u64) -> (Potential<f64>, HamiltonianSnapshot<f64>) {
    let v = Potential::sample(n, Density::default(), seed);
    let path = DysonPath::new(n, horizon, 1, seed ^ 0xabc).unwrap();
    let h = assemble_snapshot(&v, &path, 1).unwrap();
    (v, h)
}

fn point(re: f64, im: f64) -> UpperHalfPoint<f64> {
    UpperHalfPoint::new(re, im).unwrap()
}

#[test]
fn eigen_sum_matches_linear_solve() {
    let (_, h) = snapshot(40, 0.3, 1);
    let spec = eigendecompose(&h).unwrap();
    for x in [0, 7, 39] {
        for z in [point(0.0, 0.1), point(-0.7, 0.5), point(0.3, 1.0)] {
            let g = local_resolvent(&spec, x, z).unwrap().value;
            let oracle = common::resolvent_column(&h.matrix, x, z.z())[x];
            assert!((g - oracle).norm() <= 1e-12 * oracle.norm().max(1.0), "{g} vs {oracle}");
        }
    }
}

#[test]
fn trace_identity_and_imaginary_sum() {
    let (_, h) = snapshot(60, 0.5, 2);
    let spec = eigendecompose(&h).unwrap();
    let n = spec.dim();
    for z in [point(0.1, 0.05), point(-1.5, 0.3), point(0.0, 2.0)] {
        let sum: Complex64 = (0..n).map(|x| local_resolvent(&spec, x, z).unwrap().value).sum();
        let s = stieltjes_trace(&spec, z);
        assert!((sum / n as f64 - s).norm() < 1e-12);
        assert!((sum.im - n as f64 * s.im).abs() < 1e-12 * n as f64);
    }
}

#[test]
fn eigenpairs_residual_and_orthonormality() {
    let (_, h) = snapshot(50, 1.0, 3);
    let spec = eigendecompose(&h).unwrap();
    let n = spec.dim();
    let norm = h.matrix.frobenius_norm();
    for i in 0..n {
        let psi = spec.vector(i);
        let hp = h.matrix.mul_vec(psi);
        let r: f64 = hp.iter().zip(psi).map(|(a, b)| (a - spec.eigenvalues[i] * b).powi(2)).sum::<f64>().sqrt();
        assert!(r <= 1e-10 * norm);
        for j in 0..=i {
            let d: f64 = psi.iter().zip(spec.vector(j)).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((d - want).abs() < 1e-12);
        }
    }
}

#[test]
fn resolvent_lipschitz_bound() {
    let (_, h) = snapshot(80, 0.5, 4);
    let spec = eigendecompose(&h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let z = point(rng.random_range(-2.0..2.0), rng.random_range(0.01..1.0));
        let w = point(z.re + rng.random_range(-0.1..0.1), rng.random_range(0.01..1.0));
        let x = rng.random_range(0..80);
        let d = (local_resolvent(&spec, x, z).unwrap().value - local_resolvent(&spec, x, w).unwrap().value).norm();
        assert!(d <= (z.z() - w.z()).norm() / (z.im * w.im) * (1.0 + 1e-12));
    }
}

#[test]
fn uniform_potential_transform_at_i() {
    let v = Potential::<f64>::sample(100_000, Density::default(), 6);
    let s = stieltjes_potential(&v, point(0.0, 1.0));
    assert!((s - Complex64::new(0.0, std::f64::consts::FRAC_PI_4)).norm() < 0.01);
}

#[test]
fn free_matrix_is_semicircular() {
    let v = Potential::from_values(vec![0.0; 500]).unwrap();
    let path = DysonPath::new(500, 1.0, 1, 7).unwrap();
    let h = assemble_snapshot(&v, &path, 1).unwrap();
    let vals = symmetric_eigenvalues(&h.matrix).unwrap();
    let s = stieltjes_of(&vals, Complex64::new(0.0, 1.0));
    let want = Complex64::new(0.0, (5f64.sqrt() - 1.0) / 2.0);
    assert!((s - want).norm() < 0.05, "{s}");
}

#[test]
fn deformed_semicircle_tracks_ensemble_mean() {
    let n = 1000;
    let p = ModelParams::<f64>::new(n, 0.5, 0.3).unwrap();
    let zs = [point(-0.2, 0.1), point(0.0, 0.1), point(0.2, 0.1)];
    let mut mean_trace = [Complex64::new(0.0, 0.0); 3];
    let mut mean_fp = [Complex64::new(0.0, 0.0); 3];
    let reps = 20;
    for r in 0..reps {
        let (v, h) = snapshot(n, p.t, 100 + r);
        let vals = symmetric_eigenvalues(&h.matrix).unwrap();
        for (k, z) in zs.iter().enumerate() {
            mean_trace[k] += stieltjes_of(&vals, z.z()) / reps as f64;
            mean_fp[k] += deformed_semicircle(&v, p.t, *z).unwrap() / reps as f64;
        }
    }
    for k in 0..3 {
        assert!((mean_trace[k] - mean_fp[k]).norm() < 0.02, "{} vs {}", mean_trace[k], mean_fp[k]);
    }
}
