use num_complex::Complex64;
use rpflow_core::density::Density;
use rpflow_core::ensemble::{ModelParams, Potential};
use rpflow_core::regularity::*;
use rpflow_core::spectral::stieltjes_of;
use rpflow_core::stats::{linear_fit, mean, variance};

fn uniform_im(z: Complex64) -> f64 {
    0.5 * (((1.0 - z.re) / z.im).atan() + ((1.0 + z.re) / z.im).atan())
}

#[test]
fn continuum_reference_is_exact() {
    let d = Density::default();
    for z in [Complex64::new(0.0, 1.0), Complex64::new(0.3, 0.01), Complex64::new(-0.99, 0.002), Complex64::new(1.7, 0.5)] {
        assert!((d.stieltjes(z).im - uniform_im(z)).abs() < 1e-10);
    }
}

#[test]
fn continuum_reference_matches_monte_carlo() {
    let z = Complex64::new(0.1, 0.05);
    let v = Potential::<f64>::sample(1_000_000, Density::default(), 1);
    let terms: Vec<f64> = v.values().iter().map(|&x| (Complex64::new(1.0, 0.0) / (x - z)).im).collect();
    let se = (variance(&terms) / terms.len() as f64).sqrt();
    assert!((mean(&terms) - uniform_im(z)).abs() < 3.0 * se);
    let g: Density = "truncated-gaussian".parse().unwrap();
    let v = Potential::<f64>::sample(1_000_000, g, 2);
    let terms: Vec<f64> = v.values().iter().map(|&x| (Complex64::new(1.0, 0.0) / (x - z)).im).collect();
    let se = (variance(&terms) / terms.len() as f64).sqrt();
    assert!((mean(&terms) - g.stieltjes(z).im).abs() < 3.0 * se);
}

#[test]
fn doubling_probe_resolution_is_stable() {
    let run = |c: f64| {
        concentration_experiment(
            Density::default(),
            500,
            (-0.25, 0.25),
            500f64.powf(-0.5),
            &[0.2],
            100,
            3,
            ConcentrationLattice::Boundary { relative_spacing: c },
        )
        .unwrap()
    };
    let (a, b) = (run(1.0 / 16.0), run(1.0 / 32.0));
    for (x, y) in a.sups.iter().zip(&b.sups) {
        assert!((x - y).abs() < 0.2 / 3.0);
    }
}

#[test]
fn boundary_supremum_matches_dense_lattice() {
    let args = (Density::default(), 100, (-0.25, 0.25), 0.1, [4.0], 100, 4);
    let b = concentration_experiment(args.0, args.1, args.2, args.3, &args.4, args.5, args.6, ConcentrationLattice::default()).unwrap();
    let d = concentration_experiment(args.0, args.1, args.2, args.3, &args.4, args.5, args.6, ConcentrationLattice::Dense { max_points: 1_000_000 })
        .unwrap();
    for (x, y) in b.sups.iter().zip(&d.sups) {
        assert!((x - y).abs() <= 0.05 * y.max(0.05), "{x} vs {y}");
    }
}

#[test]
fn tails_shrink_with_n_and_mu() {
    let mus = [0.2, 0.3, 0.4];
    let est = |n: usize| concentration_experiment(Density::default(), n, (-0.25, 0.25), (n as f64).powf(-0.5), &mus, 400, 5, Default::default()).unwrap();
    let (small, large) = (est(500), est(2000));
    assert!(large.tail_prob[1] < small.tail_prob[1]);
    let logs: Vec<f64> = small.tail_prob.iter().map(|p| p.ln()).collect();
    assert!(linear_fit(&mus, &logs).slope < 0.0);
}

#[test]
fn log_eta_constant_is_stable_across_n() {
    let k: Vec<f64> = [500usize, 1000, 2000]
        .iter()
        .map(|&n| {
            let p = ModelParams::<f64>::new(n, 0.5, 0.3).unwrap();
            let v = Potential::sample(n, Density::default(), 6 + n as u64);
            verify_assumption(&v, &p, (-0.25, 0.25), 0.25, &VerifyOptions::default()).k_m_log_eta
        })
        .collect();
    let (lo, hi) = k.iter().fold((f64::INFINITY, 0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi < 2.0 * lo, "{k:?}");
}

#[test]
fn lower_constant_against_continuum() {
    // Near the real axis over W(ε) = [-1/2, 1/2] the continuum transform
    // exceeds 1; the finite-N fit stays positive and below its continuum
    // counterpart over the same boundary.
    let n = 2000;
    let p = ModelParams::<f64>::new(n, 0.5, 0.3).unwrap();
    for i in 0..=100 {
        let x = -0.5 + i as f64 / 100.0;
        assert!(uniform_im(Complex64::new(x, p.eta)) >= 1.0);
    }
    let v = Potential::<f64>::sample(n, Density::default(), 7);
    let opts = VerifyOptions { top: 0.1, ..Default::default() };
    let verdict = verify_assumption(&v, &p, (-0.25, 0.25), 0.25, &opts);
    let continuum_min = uniform_im(Complex64::new(0.0, 0.35)).min(uniform_im(Complex64::new(0.5, 0.1)));
    assert!(verdict.k_l_fit > 0.0 && verdict.k_l_fit < continuum_min);
    assert!(verdict.passes.1);
    let z = Complex64::new(0.0, p.eta);
    assert!(stieltjes_of(v.values(), z).im > verdict.k_l_fit);
}
