//! Linear connections on the base: compatibility with a Finsler metric, the
//! reconstruction of the compatible connection from indicatrix data, torsion
//! and the comparison with the averaged metric's Levi-Civita connection.

use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::Engine;
use crate::error::{FslError, Result};
use crate::fields::{GammaField, MetricFieldJet};
use crate::indicatrix::{source_integrals, IndicatrixTrace, SourceIntegrals};
use crate::linalg::{max_abs3, max_abs_diff3, Mat2, Tensor3};
use crate::metric::MetricField;
use crate::plane::OneFormField;
use crate::taylor::{xv, yv, Shape};

/// A coefficient field `Γ^k_ij(p)`, stored `[k][i][j]`, with
/// `∇_{∂i} ∂j = Γ^k_ij ∂k`.
pub trait LinearConnection: Send + Sync {
    fn coefficients(&self, p: [f64; 2]) -> Result<Tensor3>;

    fn name(&self) -> String {
        "connection".into()
    }
}

impl<F> LinearConnection for F
where
    F: Fn([f64; 2]) -> Result<Tensor3> + Send + Sync,
{
    fn coefficients(&self, p: [f64; 2]) -> Result<Tensor3> {
        self(p)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroConnection;

impl LinearConnection for ZeroConnection {
    fn coefficients(&self, _p: [f64; 2]) -> Result<Tensor3> {
        Ok([[[0.0; 2]; 2]; 2])
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantConnection(pub Tensor3);

impl LinearConnection for ConstantConnection {
    fn coefficients(&self, _p: [f64; 2]) -> Result<Tensor3> {
        Ok(self.0)
    }
    fn name(&self) -> String {
        "constant".into()
    }
}

/// `Γ^k_ij = −ρ_j δ^k_i + δ_ij ρ^k` with indices raised by the Euclidean
/// metric: the metrical connection of the Euclidean plane with torsion
/// `T(X, Y) = ρ(X)Y − ρ(Y)X`.
#[derive(Debug, Clone)]
pub struct SemiSymmetric {
    pub rho: OneFormField,
}

pub fn semi_symmetric_coefficients(rho: [f64; 2]) -> Tensor3 {
    let mut g = [[[0.0; 2]; 2]; 2];
    for (k, gk) in g.iter_mut().enumerate() {
        for (i, gki) in gk.iter_mut().enumerate() {
            for (j, c) in gki.iter_mut().enumerate() {
                let dki = if k == i { 1.0 } else { 0.0 };
                let dij = if i == j { 1.0 } else { 0.0 };
                *c = -rho[j] * dki + dij * rho[k];
            }
        }
    }
    g
}

impl LinearConnection for SemiSymmetric {
    fn coefficients(&self, p: [f64; 2]) -> Result<Tensor3> {
        Ok(semi_symmetric_coefficients(self.rho.eval(p)))
    }
    fn name(&self) -> String {
        let [a, b] = self.rho.sources();
        format!("semi-symmetric({a}, {b})")
    }
}

/// `max_{samples, i} |∂F/∂x^i − y^j Γ^k_ij ∂F/∂y^k|`.
pub fn compatibility_residual(
    m: &dyn MetricField,
    conn: &dyn LinearConnection,
    samples: &[([f64; 2], [f64; 2])],
    engine: &Engine,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(p, v) in samples {
        let t = engine.expand(m, p, v, Shape::full(1))?;
        let g = conn.coefficients(p)?;
        for i in 0..2 {
            let mut r = t.d1(xv(i));
            for j in 0..2 {
                for k in 0..2 {
                    r -= v[j] * g[k][i][j] * t.d1(yv(k));
                }
            }
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Integration constants and the functions `f_i` along one trace.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionSolve {
    pub base_point: [f64; 2],
    /// `λ∘c` is constant within the threshold.
    pub riemannian: bool,
    pub lam_range: f64,
    pub k: [f64; 2],
    /// Sample index of the parameter `s` used for `k`.
    pub s_index: usize,
    /// Cross-validation estimates `(index, k)`.
    pub estimates: Vec<(usize, [f64; 2])>,
    /// `max |k_estimate − k|`.
    pub spread: f64,
    /// `f_i∘c` at the trace samples.
    pub f_on_trace: Vec<[f64; 2]>,
    /// `(f_i∘c)'` at the trace samples.
    pub df_on_trace: Vec<[f64; 2]>,
}

impl ConnectionSolve {
    /// `f_i∘c(t) = (β_i(t) + k_i) / w(t)` between samples.
    pub fn f_at(&self, src: &SourceIntegrals, t: f64) -> [f64; 2] {
        if self.riemannian {
            return [0.0; 2];
        }
        let w = src.w.value(t);
        std::array::from_fn(|i| (src.beta(i, t) + self.k[i]) / w)
    }
}

/// Below this range of `λ∘c` the trace is classified as Riemannian.
pub const RIEMANNIAN_THRESHOLD: f64 = 1e-6;

/// Default tolerance for the spread of the integration constants and the
/// fiber dependence of the constructed coefficients.
pub const CONSTANT_TOL: f64 = 1e-4;

fn k_estimate(trace: &IndicatrixTrace, src: &SourceIntegrals, s: usize) -> [f64; 2] {
    let d0 = &trace.data[0];
    let ds = &trace.data[s];
    let t = trace.theta[s];
    let den = ds.lam - d0.lam;
    std::array::from_fn(|i| {
        (src.gamma_int(i, t) - src.beta(i, t) * ds.lam + ds.alpha[i] - d0.alpha[i]) / den
    })
}

/// Compute the integration constants without failing on inconsistency.
pub fn analyze_constants(trace: &IndicatrixTrace, src: &SourceIntegrals) -> ConnectionSolve {
    let n = trace.len();
    let lam0 = trace.data[0].lam;
    let lam_range = trace.lam_range();
    let zero = vec![[0.0; 2]; n];
    if lam_range < RIEMANNIAN_THRESHOLD {
        return ConnectionSolve {
            base_point: trace.base_point,
            riemannian: true,
            lam_range,
            k: [0.0; 2],
            s_index: 0,
            estimates: Vec::new(),
            spread: 0.0,
            f_on_trace: zero.clone(),
            df_on_trace: zero,
        };
    }
    let dev: Vec<f64> = trace.data.iter().map(|d| (d.lam - lam0).abs()).collect();
    let (s_index, &best) = dev
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty trace");
    let k = k_estimate(trace, src, s_index);
    let admissible: Vec<usize> = (0..n).filter(|&s| s != s_index && dev[s] >= 0.5 * best).collect();
    let mut picks: Vec<usize> = (0..8)
        .filter_map(|j| admissible.get(j * admissible.len() / 8).copied())
        .collect();
    picks.dedup();
    let estimates: Vec<(usize, [f64; 2])> = picks.iter().map(|&s| (s, k_estimate(trace, src, s))).collect();
    let spread = estimates
        .iter()
        .map(|(_, e)| (e[0] - k[0]).abs().max((e[1] - k[1]).abs()))
        .fold(0.0, f64::max);
    let mut f_on_trace = Vec::with_capacity(n);
    let mut df_on_trace = Vec::with_capacity(n);
    for (idx, d) in trace.data.iter().enumerate() {
        let t = trace.theta[idx];
        let bk: [f64; 2] = std::array::from_fn(|i| src.beta(i, t) + k[i]);
        f_on_trace.push(std::array::from_fn(|i| bk[i] / d.w));
        df_on_trace.push(std::array::from_fn(|i| (d.alpha[i] - d.lam * bk[i]) / d.w));
    }
    ConnectionSolve {
        base_point: trace.base_point,
        riemannian: false,
        lam_range,
        k,
        s_index,
        estimates,
        spread,
        f_on_trace,
        df_on_trace,
    }
}

/// Integration constants; fails with `RiemannianCase` or
/// `InconsistentConstants` (spread above `tol`).
pub fn solve_constants(trace: &IndicatrixTrace, src: &SourceIntegrals, tol: f64) -> Result<ConnectionSolve> {
    let s = analyze_constants(trace, src);
    if s.riemannian {
        return Err(FslError::RiemannianCase);
    }
    if !(s.spread <= tol) {
        return Err(FslError::InconsistentConstants { spread: s.spread, tol });
    }
    Ok(s)
}

/// `Γ^l_ij = G^l_ij + ∂f_i/∂y^j V^l + f_i ∂V^l/∂y^j` at trace sample `idx`,
/// with `∇f_i` from `y(f_i) = f_i` (1-homogeneity) and `V0(f_i) = f_i'`.
pub fn coefficients_at_fiber(trace: &IndicatrixTrace, solve: &ConnectionSolve, idx: usize) -> Tensor3 {
    let d = &trace.data[idx];
    let (y, v0) = (d.y, d.v0);
    let det = y[0] * v0[1] - y[1] * v0[0];
    let vv = [-d.fy[1], d.fy[0]];
    let mut g = d.gij;
    for i in 0..2 {
        let (f, df) = (solve.f_on_trace[idx][i], solve.df_on_trace[idx][i]);
        let grad = [(f * v0[1] - df * y[1]) / det, (df * y[0] - f * v0[0]) / det];
        for j in 0..2 {
            let dv = [-d.fyy[1][j], d.fyy[0][j]];
            for l in 0..2 {
                g[l][i][j] += grad[j] * vv[l] + f * dv[l];
            }
        }
    }
    g
}

/// Number of reference fibers checked for fiber independence.
pub const FIBER_CHECKS: usize = 8;

/// Coefficients at every checked fiber and their spread.
#[derive(Debug, Clone, Serialize)]
pub struct BuiltConnection {
    pub base_point: [f64; 2],
    pub reference_index: usize,
    /// Coefficients at the reference fiber.
    pub gamma: Tensor3,
    pub per_fiber: Vec<(usize, Tensor3)>,
    /// `max |Γ(fiber) − Γ(reference)|`.
    pub spread: f64,
}

pub fn build_connection_report(
    trace: &IndicatrixTrace,
    solve: &ConnectionSolve,
    reference_index: usize,
) -> BuiltConnection {
    let n = trace.len();
    let gamma = coefficients_at_fiber(trace, solve, reference_index % n);
    let per_fiber: Vec<(usize, Tensor3)> = (0..FIBER_CHECKS)
        .map(|k| {
            let idx = (reference_index + k * n / FIBER_CHECKS) % n;
            (idx, coefficients_at_fiber(trace, solve, idx))
        })
        .collect();
    let spread = per_fiber
        .iter()
        .map(|(_, g)| max_abs_diff3(g, &gamma))
        .fold(0.0, f64::max);
    BuiltConnection {
        base_point: trace.base_point,
        reference_index: reference_index % n,
        gamma,
        per_fiber,
        spread,
    }
}

/// The compatible connection at the trace's base point.
pub fn build_connection(
    trace: &IndicatrixTrace,
    solve: &ConnectionSolve,
    reference_index: usize,
    tol: f64,
) -> Result<BuiltConnection> {
    if solve.riemannian {
        return Err(FslError::RiemannianCase);
    }
    let b = build_connection_report(trace, solve, reference_index);
    if !(b.spread <= tol) {
        return Err(FslError::FiberDependence { spread: b.spread, tol });
    }
    Ok(b)
}

/// Trace, solve and build in one go, at the standard seed.
pub fn connection_at(
    m: &dyn MetricField,
    p: [f64; 2],
    engine: &Engine,
    opts: &crate::indicatrix::TraceOptions,
    tol: f64,
) -> Result<BuiltConnection> {
    let trace = crate::indicatrix::standard_trace(m, p, engine, opts)?;
    let src = source_integrals(&trace);
    let solve = solve_constants(&trace, &src, tol)?;
    build_connection(&trace, &solve, 0, tol)
}

/// Torsion `T^k_ij = Γ^k_ij − Γ^k_ji` and its one-form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TorsionDecomposition {
    pub torsion: Tensor3,
    /// `ρ1 = T²₁₂`, `ρ2 = −T¹₁₂`.
    pub rho: [f64; 2],
    /// `max |T^k_ij − (ρ_i δ^k_j − ρ_j δ^k_i)|`.
    pub residual: f64,
}

pub fn torsion_decompose(gamma: &Tensor3) -> TorsionDecomposition {
    let mut t = [[[0.0; 2]; 2]; 2];
    for (k, tk) in t.iter_mut().enumerate() {
        for (i, tki) in tk.iter_mut().enumerate() {
            for (j, c) in tki.iter_mut().enumerate() {
                *c = gamma[k][i][j] - gamma[k][j][i];
            }
        }
    }
    let rho = [t[1][0][1], -t[0][0][1]];
    let mut residual = 0.0f64;
    for (k, tk) in t.iter().enumerate() {
        for (i, tki) in tk.iter().enumerate() {
            for (j, c) in tki.iter().enumerate() {
                let dkj = if k == j { 1.0 } else { 0.0 };
                let dki = if k == i { 1.0 } else { 0.0 };
                residual = residual.max((c - (rho[i] * dkj - rho[j] * dki)).abs());
            }
        }
    }
    TorsionDecomposition { torsion: t, rho, residual }
}

/// Result of comparing a connection with the Levi-Civita connection of the
/// averaged metric.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub point: [f64; 2],
    pub gamma_metric: Mat2,
    pub christoffel: Tensor3,
    pub rho: [f64; 2],
    pub rho_sharp: [f64; 2],
    /// `max |Γ^k_ij − (Γ*^k_ij − ρ_j δ^k_i + γ_ij ρ♯^k)|`.
    pub identity_residual: f64,
    /// `max |∇γ| / max |γ|`.
    pub metricity_residual: f64,
}

/// Check `∇_X Y = ∇*_X Y − ρ(Y)X + γ(X,Y)ρ♯` and `∇γ = 0` at `p`.
pub fn levi_civita_compare(
    conn: &dyn LinearConnection,
    gamma: &dyn GammaField,
    p: [f64; 2],
    step: f64,
    tol: f64,
) -> Result<ComparisonReport> {
    let jet = MetricFieldJet::new(gamma, p, step, false)?;
    let g = conn.coefficients(p)?;
    let rho = torsion_decompose(&g).rho;
    let inv = jet.inv;
    let rho_sharp = [
        inv[0][0] * rho[0] + inv[0][1] * rho[1],
        inv[1][0] * rho[0] + inv[1][1] * rho[1],
    ];
    let cs = jet.christoffel();
    let mut identity = 0.0f64;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let dki = if k == i { 1.0 } else { 0.0 };
                let expect = cs[k][i][j] - rho[j] * dki + jet.gamma[i][j] * rho_sharp[k];
                identity = identity.max((g[k][i][j] - expect).abs());
            }
        }
    }
    let mut metricity = 0.0f64;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut r = jet.d[k][i][j];
                for l in 0..2 {
                    r -= g[l][k][i] * jet.gamma[l][j] + g[l][k][j] * jet.gamma[i][l];
                }
                metricity = metricity.max(r.abs());
            }
        }
    }
    let scale = jet.gamma.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let metricity = metricity / scale;
    if !(metricity <= tol) {
        return Err(FslError::NotMetrical { residual: metricity });
    }
    Ok(ComparisonReport {
        point: p,
        gamma_metric: jet.gamma,
        christoffel: cs,
        rho,
        rho_sharp,
        identity_residual: identity,
        metricity_residual: metricity,
    })
}

/// Connection coefficients sampled on a regular grid, interpolated by
/// Catmull–Rom bicubics.
#[derive(Debug, Clone, Serialize)]
pub struct GridConnection {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub shape: [usize; 2],
    pub points: Vec<[f64; 2]>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<Tensor3>,
}

impl GridConnection {
    /// `nx × ny` points starting at `origin`; `points` are row-major with
    /// `u1` varying fastest.
    pub fn from_values(origin: [f64; 2], spacing: [f64; 2], shape: [usize; 2], gamma: Vec<Tensor3>) -> Result<GridConnection> {
        if shape[0] < 2 || shape[1] < 2 || gamma.len() != shape[0] * shape[1] {
            return Err(FslError::InvalidArgument("grid connection needs at least 2×2 values".into()));
        }
        let points = (0..shape[1])
            .flat_map(|j| (0..shape[0]).map(move |i| (i, j)))
            .map(|(i, j)| [origin[0] + i as f64 * spacing[0], origin[1] + j as f64 * spacing[1]])
            .collect();
        Ok(GridConnection {
            origin,
            spacing,
            shape,
            points,
            gamma,
        })
    }

    /// Evaluate `conn` on the grid (in parallel when enabled).
    pub fn sample(conn: &dyn LinearConnection, origin: [f64; 2], spacing: [f64; 2], shape: [usize; 2]) -> Result<GridConnection> {
        let pts: Vec<[f64; 2]> = (0..shape[1])
            .flat_map(|j| (0..shape[0]).map(move |i| (i, j)))
            .map(|(i, j)| [origin[0] + i as f64 * spacing[0], origin[1] + j as f64 * spacing[1]])
            .collect();
        let gamma = crate::par::try_par_map(&pts, |p| conn.coefficients(*p))?;
        GridConnection::from_values(origin, spacing, shape, gamma)
    }

    fn at(&self, i: isize, j: isize) -> &Tensor3 {
        let i = i.clamp(0, self.shape[0] as isize - 1) as usize;
        let j = j.clamp(0, self.shape[1] as isize - 1) as usize;
        &self.gamma[j * self.shape[0] + i]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let [a, b, c, d] = p;
    0.5 * (2.0 * b + (c - a) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t * t + (3.0 * (b - c) + d - a) * t * t * t)
}

impl LinearConnection for GridConnection {
    fn coefficients(&self, p: [f64; 2]) -> Result<Tensor3> {
        let x = (p[0] - self.origin[0]) / self.spacing[0];
        let y = (p[1] - self.origin[1]) / self.spacing[1];
        let inside = |v: f64, n: usize| v >= -1e-9 && v <= (n - 1) as f64 + 1e-9;
        if !inside(x, self.shape[0]) || !inside(y, self.shape[1]) {
            return Err(FslError::InvalidArgument(format!(
                "point ({}, {}) outside the connection grid",
                p[0], p[1]
            )));
        }
        let i0 = (x.floor() as isize).min(self.shape[0] as isize - 2);
        let j0 = (y.floor() as isize).min(self.shape[1] as isize - 2);
        let (tx, ty) = (x - i0 as f64, y - j0 as f64);
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let col: [f64; 4] = std::array::from_fn(|b| {
                        let row: [f64; 4] =
                            std::array::from_fn(|a| self.at(i0 - 1 + a as isize, j0 - 1 + b as isize)[k][i][j]);
                        catmull_rom(row, tx)
                    });
                    out[k][i][j] = catmull_rom(col, ty);
                }
            }
        }
        Ok(out)
    }

    fn name(&self) -> String {
        "grid".into()
    }
}

/// Outcome of the Wagner criterion on a set of base points.
#[derive(Debug, Clone, Serialize)]
pub struct WagnerReport {
    pub base_points: Vec<[f64; 2]>,
    /// Single-valuedness defect of `dA/dθ` as a function of `A`.
    pub scatter_residual: f64,
    /// Max of `|V0(λ) X_i^h(V0λ) − V0(V0λ) X_i^h(λ)|` over sampled fibers.
    pub pde_residual: f64,
    pub branches: usize,
    /// Pooled `(A, dA/dθ)` samples.
    #[serde(skip)]
    pub scatter: Vec<[f64; 2]>,
}

impl WagnerReport {
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("A,dA\n");
        for [a, b] in &self.scatter {
            let _ = writeln!(s, "{a},{b}");
        }
        s
    }

    /// Both sub-tests within `tol`.
    pub fn consistent(&self, tol: f64) -> bool {
        self.scatter_residual <= tol && self.pde_residual <= tol
    }
}

/// Fibers per base point used by the direct check of Wagner's equations.
pub const WAGNER_FIBERS: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Branch {
    point: usize,
    sign: f64,
    t0: f64,
    t1: f64,
    lo: f64,
    hi: f64,
}

fn monotone_branches(src: &SourceIntegrals, point: usize, n: usize) -> Vec<Branch> {
    let l = src.period;
    let m = 8 * n;
    let dt = l / m as f64;
    let mut zeros = Vec::new();
    let mut prev = src.lam_prime.value(0.0);
    for k in 1..=m {
        let t = k as f64 * dt;
        let cur = src.lam_prime.value(t);
        if prev != 0.0 && (prev < 0.0) != (cur < 0.0) {
            if let Ok(z) = crate::roots::bracketed_root(|s| src.lam_prime.value(s), t - dt, t, 1e-14) {
                zeros.push(z);
            }
        }
        prev = cur;
    }
    if zeros.len() < 2 {
        return Vec::new();
    }
    (0..zeros.len())
        .map(|b| {
            let t0 = zeros[b];
            let t1 = if b + 1 < zeros.len() { zeros[b + 1] } else { zeros[0] + l };
            let (a0, a1) = (src.lam.value(t0), src.lam.value(t1));
            Branch {
                point,
                sign: src.lam_prime.value(0.5 * (t0 + t1)).signum(),
                t0,
                t1,
                lo: a0.min(a1),
                hi: a0.max(a1),
            }
        })
        .collect()
}

fn branch_slope(src: &SourceIntegrals, b: &Branch, a: f64) -> f64 {
    let t = crate::roots::bracketed_root(|t| src.lam.value(t) - a, b.t0, b.t1, 1e-15)
        .unwrap_or(if (src.lam.value(b.t0) - a).abs() < (src.lam.value(b.t1) - a).abs() {
            b.t0
        } else {
            b.t1
        });
    src.lam_prime.value(t)
}

/// Compare every monotone branch with the same-direction branches of every
/// profile; the residual is the worst best-match deviation of `dA` on the
/// common range of `A`. A branch with no partner at another base point
/// counts with its full slope magnitude.
fn scatter_residual(srcs: &[SourceIntegrals], branches: &[Branch]) -> f64 {
    const SAMPLES: usize = 32;
    let points = srcs.len();
    let mut worst = 0.0f64;
    for q in branches {
        let range_q = q.hi - q.lo;
        for p in 0..points {
            let mut best = f64::INFINITY;
            for b in branches.iter().filter(|b| b.point == p && b.sign == q.sign) {
                if std::ptr::eq(b, q) {
                    continue;
                }
                let lo = q.lo.max(b.lo);
                let hi = q.hi.min(b.hi);
                if hi - lo < 0.5 * range_q.min(b.hi - b.lo) {
                    continue;
                }
                let trim = 0.01 * (hi - lo);
                let (lo, hi) = (lo + trim, hi - trim);
                let dev = (0..SAMPLES)
                    .map(|s| {
                        let a = lo + (hi - lo) * s as f64 / (SAMPLES - 1) as f64;
                        (branch_slope(&srcs[p], b, a) - branch_slope(&srcs[q.point], q, a)).abs()
                    })
                    .fold(0.0, f64::max);
                best = best.min(dev);
            }
            if best.is_infinite() {
                if p == q.point {
                    continue;
                }
                best = (0..SAMPLES)
                    .map(|s| {
                        let t = q.t0 + (q.t1 - q.t0) * s as f64 / (SAMPLES - 1) as f64;
                        srcs[q.point].lam_prime.value(t).abs()
                    })
                    .fold(0.0, f64::max);
            }
            worst = worst.max(best);
        }
    }
    worst
}

/// Wagner's criterion: pooled scatter collapse plus the pointwise check of
/// Wagner's equations.
pub fn wagner_test(
    m: &dyn MetricField,
    base_points: &[[f64; 2]],
    engine: &Engine,
    opts: &crate::indicatrix::TraceOptions,
) -> Result<WagnerReport> {
    let traces = crate::par::try_par_map(base_points, |p| crate::indicatrix::standard_trace(m, *p, engine, opts))?;
    if traces.iter().all(|t| t.lam_range() < RIEMANNIAN_THRESHOLD) {
        return Err(FslError::RiemannianCase);
    }
    let srcs: Vec<SourceIntegrals> = traces.iter().map(source_integrals).collect();
    let branches: Vec<Branch> = srcs
        .iter()
        .enumerate()
        .filter(|(i, _)| traces[*i].lam_range() >= RIEMANNIAN_THRESHOLD)
        .flat_map(|(i, s)| monotone_branches(s, i, traces[i].len()))
        .collect();
    let scatter_residual = scatter_residual(&srcs, &branches);
    let jobs: Vec<([f64; 2], [f64; 2])> = traces
        .iter()
        .flat_map(|t| {
            let n = t.len();
            (0..WAGNER_FIBERS).map(move |k| (t.base_point, t.data[k * n / WAGNER_FIBERS].y))
        })
        .collect();
    let pts = crate::par::try_par_map(&jobs, |(p, v)| crate::jets::wagner_point(m, *p, *v, engine))?;
    let pde_residual = pts
        .iter()
        .map(|w| w.residual[0].abs().max(w.residual[1].abs()))
        .fold(0.0, f64::max);
    let scatter = traces
        .iter()
        .flat_map(|t| t.data.iter().map(|d| [d.lam, d.v0_lam]))
        .collect();
    Ok(WagnerReport {
        base_points: base_points.to_vec(),
        scatter_residual,
        pde_residual,
        branches: branches.len(),
        scatter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NotLandsberg,
    BerwaldConfirmed,
    Violation,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandsbergReport {
    pub verdict: Verdict,
    pub max_alpha: f64,
    pub riemannian: bool,
    /// `max |f_i|` along the trace (0 when not computed).
    pub max_f: f64,
    /// `max |Γ − G^l_ij|` over the checked fibers.
    pub canonical_deviation: f64,
    pub wagner: Option<(f64, f64)>,
}

/// Landsberg surfaces that are generalized Berwald must be Berwald, with the
/// canonical connection as the compatible one.
pub fn landsberg_berwald_check(
    m: &dyn MetricField,
    p: [f64; 2],
    engine: &Engine,
    opts: &crate::indicatrix::TraceOptions,
    tol: f64,
) -> Result<LandsbergReport> {
    let trace = crate::indicatrix::standard_trace(m, p, engine, opts)?;
    let max_alpha = trace
        .data
        .iter()
        .map(|d| d.alpha[0].abs().max(d.alpha[1].abs()))
        .fold(0.0, f64::max);
    let riemannian = trace.lam_range() < RIEMANNIAN_THRESHOLD;
    let mut report = LandsbergReport {
        verdict: Verdict::NotLandsberg,
        max_alpha,
        riemannian,
        max_f: 0.0,
        canonical_deviation: 0.0,
        wagner: None,
    };
    if max_alpha > tol {
        return Ok(report);
    }
    if riemannian {
        report.verdict = Verdict::BerwaldConfirmed;
        return Ok(report);
    }
    let pts = [p, [p[0] + 0.25, p[1]], [p[0], p[1] + 0.25]];
    let w = wagner_test(m, &pts, engine, opts)?;
    report.wagner = Some((w.scatter_residual, w.pde_residual));
    let src = source_integrals(&trace);
    let solve = analyze_constants(&trace, &src);
    report.max_f = solve
        .f_on_trace
        .iter()
        .map(|f| f[0].abs().max(f[1].abs()))
        .fold(0.0, f64::max);
    let built = build_connection_report(&trace, &solve, 0);
    report.canonical_deviation = built
        .per_fiber
        .iter()
        .map(|(idx, g)| max_abs_diff3(g, &trace.data[*idx].gij))
        .fold(0.0, f64::max);
    report.verdict = if w.consistent(1e-3) && report.max_f <= tol && report.canonical_deviation <= tol {
        Verdict::BerwaldConfirmed
    } else {
        Verdict::Violation
    };
    Ok(report)
}

/// `max |Γ|` helper for reports.
pub fn coefficient_norm(g: &Tensor3) -> f64 {
    max_abs3(g)
}
