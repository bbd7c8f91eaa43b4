use crate::error::NumericalFailure;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 60;

/// Eigenvalues of the tridiagonal matrix `(d, e)` (unsorted, in `d`).
/// `e[i]` couples `i - 1` and `i`; `e` is destroyed.
pub fn ql_eigenvalues<S: Real>(d: &mut [S], e: &mut [S]) -> Result<(), NumericalFailure> {
    implicit_ql(d, e, |_| {})
}

/// Implicit QL with the rotations applied to `rows`, a packed set of row
/// vectors of length `n`. Starting from rows of `Q`, the result holds the
/// corresponding rows of the eigenvector matrix (columns unsorted, matching `d`).
pub fn ql_with_rows<S: Real>(
    d: &mut [S],
    e: &mut [S],
    rows: &mut [S],
    n: usize,
) -> Result<(), NumericalFailure> {
    implicit_ql(d, e, |sweep| apply_sweep(sweep, rows, n))
}

#[derive(Clone, Copy)]
struct Rotation<S> {
    i: usize,
    c: S,
    s: S,
}

fn implicit_ql<S: Real>(
    d: &mut [S],
    e: &mut [S],
    mut on_sweep: impl FnMut(&[Rotation<S>]),
) -> Result<(), NumericalFailure> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = S::zero();
    let eps = S::epsilon();
    let mut sweep: Vec<Rotation<S>> = Vec::with_capacity(n);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(NumericalFailure::Eigensolver {
                    index: l,
                    iterations: iter,
                    seed: None,
                    time: f64::NAN,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (S::two() * e[l]);
            let mut r = g.hypot(S::one());
            g = d[m] - d[l] + e[l] / (g + if g >= S::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (S::one(), S::one(), S::zero());
            sweep.clear();
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == S::zero() {
                    d[i + 1] -= p;
                    e[m] = S::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + S::two() * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                sweep.push(Rotation { i, c, s });
            }
            on_sweep(&sweep);
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = S::zero();
        }
    }
    Ok(())
}

/// Applies one sweep of plane rotations to every packed row. Four rows are
/// processed together so the dependent update chains interleave.
fn apply_sweep<S: Real>(sweep: &[Rotation<S>], rows: &mut [S], n: usize) {
    if sweep.is_empty() {
        return;
    }
    let mut chunks = rows.chunks_exact_mut(4 * n);
    for quad in &mut chunks {
        let (r0, rest) = quad.split_at_mut(n);
        let (r1, rest) = rest.split_at_mut(n);
        let (r2, r3) = rest.split_at_mut(n);
        for rot in sweep {
            let (i, c, s) = (rot.i, rot.c, rot.s);
            let f0 = r0[i + 1];
            let f1 = r1[i + 1];
            let f2 = r2[i + 1];
            let f3 = r3[i + 1];
            r0[i + 1] = s * r0[i] + c * f0;
            r1[i + 1] = s * r1[i] + c * f1;
            r2[i + 1] = s * r2[i] + c * f2;
            r3[i + 1] = s * r3[i] + c * f3;
            r0[i] = c * r0[i] - s * f0;
            r1[i] = c * r1[i] - s * f1;
            r2[i] = c * r2[i] - s * f2;
            r3[i] = c * r3[i] - s * f3;
        }
    }
    for r in chunks.into_remainder().chunks_exact_mut(n) {
        for rot in sweep {
            let (i, c, s) = (rot.i, rot.c, rot.s);
            let f = r[i + 1];
            r[i + 1] = s * r[i] + c * f;
            r[i] = c * r[i] - s * f;
        }
    }
}
