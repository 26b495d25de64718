//! Differentiation engines: produce the Taylor expansion of `F` at `(p, v)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{FslError, Result};
use crate::metric::{non_smooth, MetricField};
use crate::taylor::{factorial, Shape, Taylor};

/// Step sizes of the finite-difference engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSettings {
    /// Fiber step relative to `|v|`.
    pub fiber_step: f64,
    /// Base step in chart units.
    pub base_step: f64,
    /// Combine steps `h` and `h/2` to cancel the `h²` error term.
    pub richardson: bool,
}

impl Default for FdSettings {
    fn default() -> Self {
        FdSettings {
            fiber_step: 0.02,
            base_step: 0.02,
            richardson: true,
        }
    }
}

/// How partial derivatives of `F` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Engine {
    /// Truncated Taylor arithmetic (forward mode, all orders at once).
    /// Metrics without a Taylor evaluator fall back to finite differences.
    #[default]
    Dual,
    /// Central finite differences on the plain evaluator.
    Fd(FdSettings),
}

impl Engine {
    pub fn fd() -> Engine {
        Engine::Fd(FdSettings::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Dual => "dual",
            Engine::Fd(_) => "fd",
        }
    }

    /// Taylor expansion of `F` at `(p, v)` in the given shape.
    pub fn expand(
        &self,
        m: &dyn MetricField,
        p: [f64; 2],
        v: [f64; 2],
        shape: &'static Shape,
    ) -> Result<Taylor> {
        if !(v[0].hypot(v[1]) >= 1e-12) {
            return Err(FslError::DegenerateFiber(v[0], v[1]));
        }
        let t = match self {
            Engine::Dual => {
                let at = [p[0], p[1], v[0], v[1]];
                let vars: [Taylor; 4] = std::array::from_fn(|i| Taylor::variable(shape, i, at[i]));
                match m.eval_taylor(&vars) {
                    Some(t) => t,
                    None => fd_expand(m, p, v, shape, &FdSettings::default())?,
                }
            }
            Engine::Fd(s) => fd_expand(m, p, v, shape, s)?,
        };
        if t.coefficients().iter().all(|c| c.is_finite()) {
            Ok(t)
        } else {
            Err(non_smooth(m, p, v))
        }
    }
}

/// Tensor-product central differences. Stencil offsets are integers in
/// units of a quarter of the coarse step, so both Richardson levels share
/// one evaluation cache.
fn fd_expand(
    m: &dyn MetricField,
    p: [f64; 2],
    v: [f64; 2],
    shape: &'static Shape,
    s: &FdSettings,
) -> Result<Taylor> {
    let hy = s.fiber_step * v[0].hypot(v[1]);
    let h = [s.base_step, s.base_step, hy, hy];
    let mut cache: HashMap<[i8; 4], f64> = HashMap::new();
    let mut eval = |o: [i8; 4]| -> Result<f64> {
        if let Some(&f) = cache.get(&o) {
            return Ok(f);
        }
        let d = |i: usize| o[i] as f64 * h[i] / 4.0;
        let q = [p[0] + d(0), p[1] + d(1)];
        let w = [v[0] + d(2), v[1] + d(3)];
        let f = m.eval(q, w);
        if !f.is_finite() {
            return Err(non_smooth(m, q, w));
        }
        cache.insert(o, f);
        Ok(f)
    };
    let mut coeffs = Vec::with_capacity(shape.len());
    for exps in shape.monomials() {
        let coarse = stencil(exps, 2, &h, 1.0, &mut eval)?;
        let d = if s.richardson && exps.iter().any(|&k| k > 0) {
            let fine = stencil(exps, 1, &h, 0.5, &mut eval)?;
            (4.0 * fine - coarse) / 3.0
        } else {
            coarse
        };
        let fact: f64 = exps.iter().map(|&k| factorial(k as usize)).product();
        coeffs.push(d / fact);
    }
    Ok(Taylor::from_coefficients(shape, coeffs))
}

/// `∂^exps F` by the product of one-dimensional central differences with
/// step `scale·h`. `unit` is the number of quarter-steps per half-step.
fn stencil(
    exps: &[u8; 4],
    unit: i8,
    h: &[f64; 4],
    scale: f64,
    eval: &mut impl FnMut([i8; 4]) -> Result<f64>,
) -> Result<f64> {
    let k = exps.map(|e| e as usize);
    let mut total = 0.0;
    let mut idx = [0usize; 4];
    loop {
        let mut w = 1.0;
        let mut o = [0i8; 4];
        for i in 0..4 {
            let j = idx[i];
            w *= binomial(k[i], j) * if j % 2 == 0 { 1.0 } else { -1.0 };
            // offset (k/2 − j)·step, in quarter units of the coarse step
            o[i] = (k[i] as i8 - 2 * j as i8) * unit;
        }
        total += w * eval(o)?;
        // odometer over the product stencil
        let mut i = 0;
        loop {
            if i == 4 {
                let denom: f64 = (0..4).map(|i| (scale * h[i]).powi(k[i] as i32)).product();
                return Ok(total / denom);
            }
            idx[i] += 1;
            if idx[i] <= k[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}
