use rpflow_core::density::Density;
use rpflow_core::ensemble::{assemble_snapshot, DysonPath, ModelParams, Potential};
use rpflow_core::localization::*;
use rpflow_core::spectral::{eigendecompose, stieltjes_potential, UpperHalfPoint};

#[test]
fn goe_bulk_ipr() {
    let n = 1000;
    let v = Potential::<f64>::from_values(vec![0.0; n]).unwrap();
    let h = assemble_snapshot(&v, &DysonPath::new(n, 1.0, 1, 1).unwrap(), 1).unwrap();
    let spec = eigendecompose(&h).unwrap();
    let iprs: Vec<f64> = (0..n)
        .filter(|&i| spec.eigenvalues[i].abs() < 1.0)
        .map(|i| spec.vector(i).iter().map(|p| p.powi(4)).sum::<f64>())
        .collect();
    let m = iprs.iter().sum::<f64>() / iprs.len() as f64 * n as f64;
    assert!((2.5..=3.5).contains(&m), "{m}");
}

#[test]
fn support_set_size_bound() {
    let n = 2000;
    let kappa = 0.7;
    let v = Potential::<f64>::sample(n, Density::default(), 2);
    let r = ModelParams::<f64>::scale(n, kappa);
    for lambda in [-0.9, -0.2, 0.0, 0.13, 0.5] {
        let x = support_set(&v, lambda, kappa, n).len() as f64;
        let im = stieltjes_potential(&v, UpperHalfPoint::new(lambda, r).unwrap()).im;
        assert!(x <= 2.0 * n as f64 * r * im);
    }
}

#[test]
fn report_invariants() {
    let n = 300;
    let p = ModelParams::<f64>::new(n, 0.5, 0.3).unwrap();
    let v = Potential::<f64>::sample(n, Density::default(), 3);
    let h = assemble_snapshot(&v, &DysonPath::new(n, p.t, 1, 4).unwrap(), 1).unwrap();
    let spec = eigendecompose(&h).unwrap();
    let exps = Exponents::defaults(0.5);
    let out = localization_report(&spec, &v, (-0.25, 0.25), exps, 0.8);
    assert!(!out.empty_window);
    for r in &out.reports {
        assert!((r.mass_inside + r.mass_outside - 1.0).abs() < 1e-12);
        assert!(r.ipr <= r.sup_norm_sq * (1.0 + 1e-12));
        assert!(r.ipr >= 1.0 / n as f64 * (1.0 - 1e-12));
        let i = spec.eigenvalues.iter().position(|&l| l == r.lambda).unwrap();
        let norm: f64 = spec.vector(i).iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for k in [0.55, 0.65, 0.75, 0.9] {
            let m = report_for(&v, r.lambda, spec.vector(i), Exponents { kappa: k, ..exps }).mass_outside;
            assert!(m <= last);
            last = m;
        }
        let inside = support_set(&v, r.lambda, exps.kappa, n);
        let outside: Vec<usize> = (0..n).filter(|x| inside.binary_search(x).is_err()).collect();
        assert!(r.mass_outside <= spectral_measure_bound(&spec, &outside, r.lambda, p.eta) * (1.0 + 1e-12));
    }
}

#[test]
fn frozen_sweep_has_flat_sup_norm() {
    let configs: Vec<LocalizationConfig> = [60usize, 120, 240]
        .iter()
        .map(|&n| LocalizationConfig {
            n,
            delta: 0.5,
            exponents: Exponents::defaults(0.5),
            window: (-0.25, 0.25),
            bulk_fraction: 0.8,
            density: Density::default(),
            ensemble: 2,
            master_seed: 5,
            horizon_override: Some(0.0),
        })
        .collect();
    let t = scaling_sweep(&configs).unwrap();
    assert!(t.sup_norm_fit.slope.abs() < 1e-12);
    assert!(t.rows.iter().all(|r| r.median_mass_outside < 1e-24));
}

