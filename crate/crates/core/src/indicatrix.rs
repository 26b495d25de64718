//! Indicatrix curves as integral curves of `V0` (central affine
//! parametrization), the data sampled along them and the averaged metric.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{FslError, Result};
use crate::jets::{fiber_data, fundamental_tensor, unit_tangent, FiberData};
use crate::linalg::{det2, norm2, sym_eigenvalues, Mat2};
use crate::metric::MetricField;
use crate::ode::rk4_step;
use crate::par::try_par_map;
use crate::quad::{simpson_weights, PeriodicSeries};
use crate::roots::bracketed_root;

/// `direction / F(p, direction)`.
pub fn seed_point(m: &dyn MetricField, p: [f64; 2], direction: [f64; 2]) -> Result<[f64; 2]> {
    if !(norm2(direction) >= 1e-12) {
        return Err(FslError::DegenerateFiber(direction[0], direction[1]));
    }
    let f = m.eval(p, direction);
    if !(f > 0.0) {
        return Err(FslError::SingularMetric { det: f });
    }
    Ok([direction[0] / f, direction[1] / f])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    /// Number of uniform samples over one period (even).
    pub samples: usize,
    /// Maximal Runge–Kutta step in θ.
    pub step: f64,
    pub theta_max: f64,
    /// Allowed return distance to the seed.
    pub closure_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            samples: 256,
            step: 1e-3,
            theta_max: 50.0,
            closure_tol: 1e-6,
        }
    }
}

/// One closed indicatrix curve, sampled at `θ_k = k·period/N`, `k < N`.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatrixTrace {
    pub base_point: [f64; 2],
    pub period: f64,
    pub theta: Vec<f64>,
    /// Full fiber data at every sample point.
    pub data: Vec<FiberData>,
    /// Quadrature weights of the induced measure.
    pub mu: Vec<f64>,
    /// `|c(period) − c(0)|` after re-integration.
    pub closure_error: f64,
}

impl IndicatrixTrace {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.data.iter().map(|d| d.y).collect()
    }

    pub fn lam(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.lam).collect()
    }

    pub fn w(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.w).collect()
    }

    /// `max_k |F(p, c_k) − 1|`.
    pub fn f_conservation(&self) -> f64 {
        self.data.iter().fold(0.0, |a, d| a.max((d.f - 1.0).abs()))
    }

    /// `max λ − min λ` over the samples.
    pub fn lam_range(&self) -> f64 {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d.lam), hi.max(d.lam)));
        hi - lo
    }

    pub fn total_mass(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Columns `theta, y1, y2, lambda, w, alpha1, alpha2, omega1, omega2, mu`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,y1,y2,lambda,w,alpha1,alpha2,omega1,omega2,mu\n");
        for (k, d) in self.data.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.theta[k],
                d.y[0],
                d.y[1],
                d.lam,
                d.w,
                d.alpha[0],
                d.alpha[1],
                d.omega[0],
                d.omega[1],
                self.mu[k]
            );
        }
        s
    }
}

/// Integrate `c' = V0∘c` from `seed` until the curve closes, then resample
/// one period uniformly and evaluate the fiber data at every sample.
pub fn trace_indicatrix(
    m: &dyn MetricField,
    p: [f64; 2],
    seed: [f64; 2],
    engine: &Engine,
    opts: &TraceOptions,
) -> Result<IndicatrixTrace> {
    if opts.samples < 4 || !opts.samples.is_multiple_of(2) {
        return Err(FslError::InvalidArgument(format!(
            "trace samples must be even and at least 4, got {}",
            opts.samples
        )));
    }
    let f0 = m.eval(p, seed);
    if !((f0 - 1.0).abs() < 1e-6) {
        return Err(FslError::InvalidArgument(format!(
            "seed ({}, {}) is not on the indicatrix (F = {f0})",
            seed[0], seed[1]
        )));
    }
    let mut rhs = |_t: f64, y: &[f64; 2]| unit_tangent(m, p, *y, engine);
    let n0 = rhs(0.0, &seed)?;
    let gap = |y: &[f64; 2]| (y[0] - seed[0]) * n0[0] + (y[1] - seed[1]) * n0[1];

    let h = opts.step;
    let mut theta = 0.0;
    let mut y = seed;
    let period = loop {
        if theta > opts.theta_max {
            return Err(FslError::NoClosure {
                theta_max: opts.theta_max,
            });
        }
        let next = rk4_step(&mut rhs, theta, &y, h)?;
        if theta + h > 1.0 && gap(&y) < 0.0 && gap(&next) >= 0.0 {
            let y_here = y;
            let mut inner = |tau: f64| match rk4_step(&mut rhs, theta, &y_here, tau) {
                Ok(z) => gap(&z),
                Err(_) => f64::NAN,
            };
            let tau = bracketed_root(&mut inner, 0.0, h, 1e-15)?;
            let end = rk4_step(&mut rhs, theta, &y_here, tau)?;
            if norm2([end[0] - seed[0], end[1] - seed[1]]) <= opts.closure_tol {
                break theta + tau;
            }
        }
        theta += h;
        y = next;
    };

    let n = opts.samples;
    let dt = period / n as f64;
    let sub = (dt / h).ceil().max(1.0) as usize;
    let hs = dt / sub as f64;
    let mut points = Vec::with_capacity(n);
    let mut y = seed;
    for k in 0..n {
        points.push(y);
        for j in 0..sub {
            y = rk4_step(&mut rhs, k as f64 * dt + j as f64 * hs, &y, hs)?;
        }
    }
    let closure_error = norm2([y[0] - seed[0], y[1] - seed[1]]);
    if closure_error > opts.closure_tol {
        return Err(FslError::NoClosure {
            theta_max: opts.theta_max,
        });
    }

    let data = try_par_map(&points, |y| fiber_data(m, p, *y, engine))?;
    let mut weights = simpson_weights(n, dt);
    // periodic wrap: the two end weights of the open rule meet at θ = 0
    let last = weights.pop().expect("nonempty");
    weights[0] += last;
    let mu = data
        .iter()
        .zip(&weights)
        .map(|(d, wk)| {
            // induced volume form sqrt(det g) (y¹dy² − y²dy¹)/F on c' = V0
            let density = d.w * (d.y[0] * d.v0[1] - d.y[1] * d.v0[0]) / d.f;
            wk * density
        })
        .collect();
    Ok(IndicatrixTrace {
        base_point: p,
        period,
        theta: (0..n).map(|k| k as f64 * dt).collect(),
        data,
        mu,
        closure_error,
    })
}

/// Trace started at the standard seed `seed_point(p, (1, 0))`.
pub fn standard_trace(
    m: &dyn MetricField,
    p: [f64; 2],
    engine: &Engine,
    opts: &TraceOptions,
) -> Result<IndicatrixTrace> {
    let seed = seed_point(m, p, [1.0, 0.0])?;
    trace_indicatrix(m, p, seed, engine, opts)
}

/// Averaged Riemannian metric `γ_ij = ∫ g_ij μ` at one base point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AveragedMetric {
    pub gamma: Mat2,
}

fn checked_spd(gamma: Mat2, p: [f64; 2]) -> Result<Mat2> {
    let ev = sym_eigenvalues(&gamma);
    if !(ev[0] > 0.0) || !gamma.iter().flatten().all(|x| x.is_finite()) {
        return Err(FslError::SingularAveragedMetric(p[0], p[1]));
    }
    Ok(gamma)
}

pub fn averaged_metric(trace: &IndicatrixTrace) -> Result<AveragedMetric> {
    if trace.is_empty() {
        return Err(FslError::NoClosure { theta_max: 0.0 });
    }
    let mut gamma = [[0.0; 2]; 2];
    for (d, mu) in trace.data.iter().zip(&trace.mu) {
        for i in 0..2 {
            for j in 0..2 {
                gamma[i][j] += d.g[i][j] * mu;
            }
        }
    }
    Ok(AveragedMetric {
        gamma: checked_spd(gamma, trace.base_point)?,
    })
}

/// The same average computed in polar coordinates of the fiber:
/// `γ_ij = ∫_0^{2π} g_ij(u_φ) sqrt(det g(u_φ)) / F(u_φ)² dφ`, trapezoid rule
/// with `n` nodes. Also returns the total mass `∫ μ`.
pub fn averaged_metric_polar(
    m: &dyn MetricField,
    p: [f64; 2],
    n: usize,
    engine: &Engine,
) -> Result<(Mat2, f64)> {
    let mut gamma = [[0.0; 2]; 2];
    let mut mass = 0.0;
    let dphi = 2.0 * PI / n as f64;
    for k in 0..n {
        let a = k as f64 * dphi;
        let (g, f) = fundamental_tensor(m, p, [a.cos(), a.sin()], engine)?;
        let wgt = det2(&g).sqrt() / (f * f) * dphi;
        mass += wgt;
        for i in 0..2 {
            for j in 0..2 {
                gamma[i][j] += g[i][j] * wgt;
            }
        }
    }
    Ok((checked_spd(gamma, p)?, mass))
}

/// Spectral interpolants of the trace data; cumulative integrals
/// `β_i(t) = ∫_0^t α_i` and `γ_i(t) = ∫_0^t ω_i` are exact for the
/// interpolants.
#[derive(Debug, Clone)]
pub struct SourceIntegrals {
    pub period: f64,
    pub lam: PeriodicSeries,
    /// `(λ∘c)' = V0(λ)∘c`.
    pub lam_prime: PeriodicSeries,
    pub w: PeriodicSeries,
    pub alpha: [PeriodicSeries; 2],
    pub omega: [PeriodicSeries; 2],
    pub curve: [PeriodicSeries; 2],
}

impl SourceIntegrals {
    pub fn beta(&self, i: usize, t: f64) -> f64 {
        self.alpha[i].integral(t)
    }

    pub fn gamma_int(&self, i: usize, t: f64) -> f64 {
        self.omega[i].integral(t)
    }

    /// Interpolated curve point `c(t)`.
    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.curve[0].value(t), self.curve[1].value(t)]
    }

    /// Parameter `t ∈ [0, period)` at which `c(t)` points along `v`.
    pub fn locate(&self, v: [f64; 2], samples: &[[f64; 2]]) -> Result<f64> {
        let n = samples.len();
        let cross = |c: [f64; 2]| c[0] * v[1] - c[1] * v[0];
        let dot = |c: [f64; 2]| c[0] * v[0] + c[1] * v[1];
        let dt = self.period / n as f64;
        for k in 0..n {
            let (a, b) = (samples[k], samples[(k + 1) % n]);
            // the curve turns counterclockwise, so cross(c, v) falls through 0
            if cross(a) >= 0.0 && cross(b) < 0.0 && dot(a) + dot(b) > 0.0 {
                let t0 = k as f64 * dt;
                return bracketed_root(|t| cross(self.point(t)), t0, t0 + dt, 1e-15);
            }
        }
        Err(FslError::RootBracketFailure(v[0], v[1]))
    }
}

pub fn source_integrals(trace: &IndicatrixTrace) -> SourceIntegrals {
    let l = trace.period;
    let series = |f: &dyn Fn(&FiberData) -> f64| {
        let s: Vec<f64> = trace.data.iter().map(f).collect();
        PeriodicSeries::from_samples(&s, l)
    };
    SourceIntegrals {
        period: l,
        lam: series(&|d| d.lam),
        lam_prime: series(&|d| d.v0_lam),
        w: series(&|d| d.w),
        alpha: [series(&|d| d.alpha[0]), series(&|d| d.alpha[1])],
        omega: [series(&|d| d.omega[0]), series(&|d| d.omega[1])],
        curve: [series(&|d| d.y[0]), series(&|d| d.y[1])],
    }
}

/// Least-squares fit of a centered conic `yᵀAy = 1` to the trace points;
/// returns `(A, max residual)`. A quadratic indicatrix fits exactly.
pub fn conic_fit(trace: &IndicatrixTrace) -> (Mat2, f64) {
    let rows: Vec<[f64; 3]> = trace
        .data
        .iter()
        .map(|d| [d.y[0] * d.y[0], 2.0 * d.y[0] * d.y[1], d.y[1] * d.y[1]])
        .collect();
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for r in &rows {
        for i in 0..3 {
            atb[i] += r[i];
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let x = solve3(ata, atb).unwrap_or([f64::NAN; 3]);
    let res = rows
        .iter()
        .map(|r| (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] - 1.0).abs())
        .fold(0.0, f64::max);
    ([[x[0], x[1]], [x[1], x[2]]], res)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c] == 0.0 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
