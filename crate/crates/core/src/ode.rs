//! Classical fixed-step Runge–Kutta integration.

use crate::error::Result;

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> Result<[f64; N]> {
    let add = |a: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + s * k[i]) };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Integrate from `t0` to `t1` in `steps` equal steps, returning the final state.
pub fn rk4_integrate<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    steps: usize,
) -> Result<[f64; N]> {
    let h = (t1 - t0) / steps.max(1) as f64;
    let mut y = y0;
    for k in 0..steps.max(1) {
        y = rk4_step(f, t0 + k as f64 * h, &y, h)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_integrated_to_fourth_order() {
        let mut f = |_t: f64, y: &[f64; 2]| Ok([-y[1], y[0]]);
        let y = rk4_integrate(&mut f, 0.0, [1.0, 0.0], 1.0, 100).unwrap();
        assert!((y[0] - 1f64.cos()).abs() < 1e-9 && (y[1] - 1f64.sin()).abs() < 1e-9);
        let coarse = rk4_integrate(&mut f, 0.0, [1.0, 0.0], 1.0, 10).unwrap();
        let ratio = (coarse[0] - 1f64.cos()).abs() / (y[0] - 1f64.cos()).abs();
        assert!(ratio > 5e3, "ratio {ratio}");
    }
}
