//! Bracketed scalar root finding.

use crate::error::{FslError, Result};

/// Bisection on a sign-changing bracket, finished by secant steps that are
/// only accepted inside the current bracket.
pub fn bracketed_root(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) {
        return Err(FslError::RootBracketFailure(lo, hi));
    }
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        // secant (regula falsi) candidate, fall back to bisection if it
        // lands too close to an endpoint
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        let w = hi - lo;
        if !(x > lo + 0.1 * w && x < hi - 0.1 * w) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    Ok(if flo.abs() < fhi.abs() { lo } else { hi })
}

/// Plain bisection, used where the function is only piecewise smooth.
pub fn bisect(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, iterations: usize) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let flo = f(lo);
    let fhi = f(hi);
    if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        return Err(FslError::RootBracketFailure(a, b));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = bracketed_root(|x| x * x * x - 2.0, 0.0, 3.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        let r = bisect(|x| x * x * x - 2.0, 0.0, 3.0, 80).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn reports_missing_bracket() {
        assert!(matches!(
            bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(FslError::RootBracketFailure(..))
        ));
    }
}
