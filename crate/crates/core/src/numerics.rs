//! Small numerical kernels shared across the crate: adaptive quadrature,
//! periodic trapezoid sums and monotone bisection.

use std::f64::consts::PI;

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The integrand may fail; the first error aborts the integration.
pub fn adaptive_simpson<F, E>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&mut f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F, E>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // an absolute tolerance below the rounding level of the panel is unreachable
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol.max(floor) || lm <= a || rm >= b {
        return Ok(left + right + delta / 15.0);
    }
    let l = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Integrates `f` over `[a, b]` by splitting into `pieces` equal panels, each
/// handled by [`adaptive_simpson`] with a share of the tolerance.
pub fn integrate<F, E>(mut f: F, a: f64, b: f64, tol: f64, pieces: usize) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + h * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + h };
        total += adaptive_simpson(&mut f, lo, hi, tol / pieces as f64, 48)?;
    }
    Ok(total)
}

/// Trapezoid rule on a uniform periodic grid over `[-pi, pi)`: `dx * sum`.
pub fn periodic_trapezoid(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let dx = 2.0 * PI / values.len() as f64;
    dx * values.iter().sum::<f64>()
}

/// Finds `x` in `[lo, hi]` with `f(x) = target` for nondecreasing `f`.
///
/// Returns `None` when the bracket does not contain the target.
pub fn bisect_increasing<F>(mut f: F, target: f64, mut lo: f64, mut hi: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if !(flo <= target && target <= fhi) {
        return None;
    }
    if flo == target {
        return Some(lo);
    }
    if fhi == target {
        return Some(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Expands `hi` geometrically from `start` until `f(hi) >= target`.
pub fn expand_bracket<F>(mut f: F, target: f64, start: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start.max(1.0);
    for _ in 0..2100 {
        let v = f(hi);
        if v.is_nan() {
            return None;
        }
        if v >= target {
            return Some(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    None
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn simpson_polynomial_and_exponential() {
        let v = adaptive_simpson::<_, Infallible>(|x| Ok(x * x * x), 0.0, 2.0, 1e-12, 40).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = integrate::<_, Infallible>(|x| Ok((-x).exp()), 0.0, 30.0, 1e-12, 8).unwrap();
        assert!((v - (1.0 - (-30.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn bisection_finds_root_and_rejects_bad_bracket() {
        let r = bisect_increasing(|x| x * x, 2.0, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(bisect_increasing(|x| x, 5.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn trapezoid_of_constant() {
        assert!((periodic_trapezoid(&[1.0; 64]) - 2.0 * PI).abs() < 1e-14);
    }
}
