//! Small one-dimensional solvers shared by the spectral, rate and exponent code.

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Brent's method on a sign-changing bracket `[a, b]`.
///
/// `fa` and `fb` must have opposite signs (zero at either end is accepted).
pub fn brent_root<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, what: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    const MAX_ITER: usize = 200;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::BracketFailure(what));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol {
            b += d;
        } else {
            b += tol.copysign(xm);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::BracketingFailure(format!("{what}: non-finite value at {b}")));
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: MAX_ITER,
    })
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_max<F>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let fa = f(a);
    let fb = f(b);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    best
}

/// Maximise a concave function on `[lo, hi]`: a uniform pre-scan with `scan`
/// intervals picks the bracket, then golden-section refines to `tol`.
///
/// Ties in the pre-scan resolve towards the smallest abscissa.
pub fn maximize_concave<F>(mut f: F, lo: f64, hi: f64, scan: usize, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let scan = scan.max(2);
    let h = (hi - lo) / scan as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=scan {
        let x = if i == scan { hi } else { lo + h * i as f64 };
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = if best_i == 0 { lo } else { lo + h * (best_i - 1) as f64 };
    let b = if best_i == scan { hi } else { (lo + h * (best_i + 1) as f64).min(hi) };
    let (x, v) = golden_max(&mut f, a, b, tol);
    if v >= best_v {
        (x, v)
    } else {
        let x = if best_i == scan { hi } else { lo + h * best_i as f64 };
        (x, best_v)
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored. The matrices built by this crate
/// are diagonally dominant M-matrices, so no pivoting is needed.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

/// Numerically stable `ln(mean(exp(w)))` with the maximum factored out.
pub fn log_mean_exp(w: &[f64]) -> f64 {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = w.iter().map(|&x| (x - max).exp()).sum();
    max + (s / w.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0;
        let r = brent_root(f, 0.0, 2.0, f(0.0), f(2.0), 1e-14, "cubic").unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_same_sign() {
        let f = |x: f64| x * x + 1.0;
        assert!(brent_root(f, -1.0, 1.0, 2.0, 2.0, 1e-12, "q").is_err());
    }

    #[test]
    fn golden_on_parabola() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn concave_max_at_endpoint() {
        let (x, v) = maximize_concave(|x| x, 0.0, 1.0, 64, 1e-12);
        assert!((x - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        let (x, _) = maximize_concave(|x| -x, 0.0, 1.0, 64, 1e-12);
        assert!(x.abs() < 1e-12);
    }

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [3.0, 3.0, 3.0, 3.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, -1.0, 0.5];
        let mut b = [
            3.0 * x[0] - x[1],
            -x[0] + 3.0 * x[1] - x[2],
            -x[1] + 3.0 * x[2] - x[3],
            -x[2] + 3.0 * x[3],
        ];
        let mut s = Vec::new();
        solve_tridiagonal(&lower, &diag, &upper, &mut b, &mut s);
        for i in 0..4 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn log_mean_exp_handles_large_exponents() {
        let w = [1000.0, 1000.0 + 2f64.ln()];
        assert!((log_mean_exp(&w) - (1000.0 + 1.5f64.ln())).abs() < 1e-12);
    }
}
