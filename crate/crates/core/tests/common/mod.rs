#![allow(dead_code)]

use num_complex::Complex64;
use rpflow_core::linalg::SymMatrix;

/// `(H - z)^{-1} e_x` by Gaussian elimination with partial pivoting.
pub fn resolvent_column(h: &SymMatrix<f64>, x: usize, z: Complex64) -> Vec<Complex64> {
    let n = h.dim();
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| Complex64::new(h.get(i, j), 0.0) - if i == j { z } else { Complex64::new(0.0, 0.0) }).collect())
        .collect();
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    b[x] = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f.norm() == 0.0 {
                continue;
            }
            for k in c..n {
                let t = a[c][k];
                a[r][k] -= f * t;
            }
            let t = b[c];
            b[r] -= f * t;
        }
    }
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r][k] * g[k];
        }
        g[r] = s / a[r][r];
    }
    g
}

/// Fixed-step RK4 for `dξ/dt = -f(t, ξ)`.
pub fn rk4(f: impl Fn(f64, Complex64) -> Complex64, z0: Complex64, t1: f64, steps: usize) -> Vec<(f64, Complex64)> {
    let h = t1 / steps as f64;
    let mut out = vec![(0.0, z0)];
    let mut z = z0;
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = -f(t, z);
        let k2 = -f(t + h / 2.0, z + k1 * (h / 2.0));
        let k3 = -f(t + h / 2.0, z + k2 * (h / 2.0));
        let k4 = -f(t + h, z + k3 * h);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push((t + h, z));
    }
    out
}
