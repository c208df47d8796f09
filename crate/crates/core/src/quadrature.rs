//! Scalar numerics shared by the modules: adaptive Simpson quadrature,
//! bracketed 1-D maximization and deterministic pairwise summation.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
const MIN_DEPTH: u32 = 2;

/// Adaptive Simpson quadrature of a fallible integrand over `[a, b]` with
/// absolute tolerance `tol`. `b < a` yields the negated integral.
pub fn try_adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return try_adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let value = simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, 0)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("quadrature over [{a}, {b}]")))
    }
}

/// Infallible convenience wrapper around [`try_adaptive_simpson`].
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_adaptive_simpson(|x| Ok(f(x)), a, b, tol)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?)
}

/// Ternary search for the maximum of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn ternary_maximize<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    let mut iters = 0;
    while hi - lo > width && iters < 200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
        iters += 1;
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Maximum of `f` on `[lo, hi]`: a uniform grid of `n` points followed by a
/// ternary refinement inside the bracket around the best grid point. The
/// result is never below the best grid value.
pub fn grid_maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let n = n.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    if step == 0.0 {
        return best;
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let refined = ternary_maximize(&f, a, b, 1e-13 * (1.0 + best.0.abs()));
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// Minimum of `f` on `[lo, hi]`, see [`grid_maximize`].
pub fn grid_minimize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let (x, v) = grid_maximize(|s| -f(s), lo, hi, n);
    (x, -v)
}

/// Pairwise (tree) summation. The reduction order depends only on the slice
/// length, so results are bitwise reproducible.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_transcendental() {
        let v = adaptive_simpson(|x| x * x * x - x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(|x| x.sin(), std::f64::consts::PI, 0.0, 1e-12).unwrap();
        assert!((v + 2.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_propagates_errors() {
        let r = try_adaptive_simpson(
            |x| if x > 0.5 { Err(Error::Division { location: x }) } else { Ok(1.0) },
            0.0,
            1.0,
            1e-8,
        );
        assert!(matches!(r, Err(Error::Division { .. })));
    }

    #[test]
    fn grid_maximize_kink() {
        // maximum at a kink
        let (x, v) = grid_maximize(|x| -(x - 0.3).abs(), -1.0, 1.0, 101);
        assert!((x - 0.3).abs() < 1e-10);
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }
}
