//! Gauss curvature of the averaged metric, divergence of `ρ♯`, curvature of
//! a linear connection and the divergence representation `κ* = −div* ρ♯`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::connection::{torsion_decompose, LinearConnection};
use crate::error::Result;
use crate::fields::{fd_jet, riemann_tensor, GammaField, MetricFieldJet, OneForm};
use crate::linalg::{Mat2, Tensor3, Tensor4};

/// Default finite-difference step in chart units (Richardson-combined with
/// its half).
pub const FD_STEP: f64 = 1e-2;

fn gauss_from_jet(jet: &MetricFieldJet) -> f64 {
    let r = riemann_tensor(&jet.christoffel(), &jet.christoffel_derivative());
    let det = jet.gamma[0][0] * jet.gamma[1][1] - jet.gamma[0][1] * jet.gamma[1][0];
    (0..2).map(|l| jet.gamma[0][l] * r[l][1][0][1]).sum::<f64>() / det
}

/// Gauss curvature `κ* = γ(R(∂1, ∂2)∂2, ∂1) / det γ`.
pub fn gauss_curvature(gamma: &dyn GammaField, p: [f64; 2], step: f64) -> Result<f64> {
    Ok(gauss_from_jet(&MetricFieldJet::new(gamma, p, step, true)?))
}

/// Divergence of `ρ♯` in two `γ`-orthonormal frames.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Divergence {
    /// Gram–Schmidt frame built from `(∂1, ∂2)`.
    pub value: f64,
    /// Same frame rotated by a fixed angle.
    pub rotated: f64,
}

impl Divergence {
    pub fn frame_discrepancy(&self) -> f64 {
        (self.value - self.rotated).abs()
    }
}

/// Gram–Schmidt on the coordinate frame, first vector normalized first.
pub fn orthonormal_frame(g: &Mat2) -> [[f64; 2]; 2] {
    let e1 = [1.0 / g[0][0].sqrt(), 0.0];
    let proj = g[0][1] * e1[0];
    let u = [-proj * e1[0], 1.0];
    let n = (g[0][0] * u[0] * u[0] + 2.0 * g[0][1] * u[0] * u[1] + g[1][1] * u[1] * u[1]).sqrt();
    [e1, [u[0] / n, u[1] / n]]
}

const ROTATED_FRAME_ANGLE: f64 = 0.7;

fn divergence_from_jets(jet: &MetricFieldJet, rho: &[f64], drho: &[Vec<f64>; 2]) -> Divergence {
    let inv = jet.inv;
    let sharp = [
        inv[0][0] * rho[0] + inv[0][1] * rho[1],
        inv[1][0] * rho[0] + inv[1][1] * rho[1],
    ];
    let cs = jet.christoffel();
    // nabla[a][k] = ∇*_a ρ♯^k
    let mut nabla = [[0.0; 2]; 2];
    for (a, na) in nabla.iter_mut().enumerate() {
        let dinv = jet.d_inv(a);
        for (k, c) in na.iter_mut().enumerate() {
            let mut s = 0.0;
            for m in 0..2 {
                s += dinv[k][m] * rho[m] + inv[k][m] * drho[a][m] + cs[k][a][m] * sharp[m];
            }
            *c = s;
        }
    }
    let g = &jet.gamma;
    let term = |e: [f64; 2]| -> f64 {
        let v = [
            e[0] * nabla[0][0] + e[1] * nabla[1][0],
            e[0] * nabla[0][1] + e[1] * nabla[1][1],
        ];
        (0..2).map(|i| (0..2).map(|j| g[i][j] * v[i] * e[j]).sum::<f64>()).sum()
    };
    let [e1, e2] = orthonormal_frame(g);
    let (c, s) = (ROTATED_FRAME_ANGLE.cos(), ROTATED_FRAME_ANGLE.sin());
    let f1 = [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1]];
    let f2 = [-s * e1[0] + c * e2[0], -s * e1[1] + c * e2[1]];
    Divergence {
        value: term(e1) + term(e2),
        rotated: term(f1) + term(f2),
    }
}

fn rho_jet(rho: &dyn OneForm, p: [f64; 2], step: f64) -> Result<(Vec<f64>, [Vec<f64>; 2])> {
    let j = fd_jet(&|q| Ok(rho.rho(q)?.to_vec()), p, step, false)?;
    Ok((j.v, j.d))
}

/// `div* ρ♯ = Σ_E γ(∇*_E ρ♯, E)` over a `γ`-orthonormal frame, with `∇*`
/// the Levi-Civita connection of `γ`.
pub fn divergence(gamma: &dyn GammaField, rho: &dyn OneForm, p: [f64; 2], step: f64) -> Result<Divergence> {
    let jet = MetricFieldJet::new(gamma, p, step, false)?;
    let (r, dr) = rho_jet(rho, p, step)?;
    Ok(divergence_from_jets(&jet, &r, &dr))
}

fn flatten(g: &Tensor3) -> Vec<f64> {
    g.iter().flatten().flatten().copied().collect()
}

fn unflatten(v: &[f64]) -> Tensor3 {
    std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| v[4 * k + 2 * i + j])))
}

/// `R^l_kij` of a connection field by finite differences, stored
/// `[l][k][i][j]`.
pub fn connection_curvature(conn: &dyn LinearConnection, p: [f64; 2], step: f64) -> Result<Tensor4> {
    let j = fd_jet(&|q| Ok(flatten(&conn.coefficients(q)?)), p, step, false)?;
    Ok(riemann_tensor(&unflatten(&j.v), &[unflatten(&j.d[0]), unflatten(&j.d[1])]))
}

pub fn tensor4_norm(r: &Tensor4) -> f64 {
    r.iter().flatten().flatten().flatten().fold(0.0, |a, b| a.max(b.abs()))
}

/// Per-point outcome of the divergence representation check.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub p: [f64; 2],
    pub kappa_star: f64,
    pub div_rho_sharp: f64,
    pub sum_residual: f64,
    pub conn_curvature_norm: f64,
    pub frame_discrepancy: f64,
}

/// The torsion one-form of a connection, as a field.
pub struct TorsionForm<'a>(pub &'a dyn LinearConnection);

impl OneForm for TorsionForm<'_> {
    fn rho(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok(torsion_decompose(&self.0.coefficients(p)?).rho)
    }
}

/// One report per grid point; points are processed concurrently.
pub fn divergence_representation_check(
    gamma: &dyn GammaField,
    conn: &dyn LinearConnection,
    points: &[[f64; 2]],
    step: f64,
) -> Result<Vec<CurvatureReport>> {
    let rho = TorsionForm(conn);
    crate::par::try_par_map(points, |&p| {
        let jet = MetricFieldJet::new(gamma, p, step, true)?;
        let kappa = gauss_from_jet(&jet);
        let (r, dr) = rho_jet(&rho, p, step)?;
        let div = divergence_from_jets(&jet, &r, &dr);
        let rn = tensor4_norm(&connection_curvature(conn, p, step)?);
        Ok(CurvatureReport {
            p,
            kappa_star: kappa,
            div_rho_sharp: div.value,
            sum_residual: (kappa + div.value).abs(),
            conn_curvature_norm: rn,
            frame_discrepancy: div.frame_discrepancy(),
        })
    })
}

pub fn reports_csv(reports: &[CurvatureReport]) -> String {
    let mut s = String::from("u1,u2,kappaStar,divRho,sumResidual,Rnorm\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.p[0], r.p[1], r.kappa_star, r.div_rho_sharp, r.sum_residual, r.conn_curvature_norm
        );
    }
    s
}

/// `n × n` grid on `[c − h, c + h]²`, `u1` fastest.
pub fn square_grid(center: [f64; 2], half_width: f64, n: usize) -> Vec<[f64; 2]> {
    let at = |k: usize| if n == 1 { 0.0 } else { -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64 };
    (0..n)
        .flat_map(|j| (0..n).map(move |i| [center[0] + at(i), center[1] + at(j)]))
        .collect()
}

/// `dρ = (∂1ρ2 − ∂2ρ1) du¹∧du²` sampled over points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Closedness {
    pub max_d_rho: f64,
    pub closed: bool,
}

pub fn closedness(rho: &dyn OneForm, points: &[[f64; 2]], step: f64, tol: f64) -> Result<Closedness> {
    let mut worst = 0.0f64;
    for &p in points {
        let (_, d) = rho_jet(rho, p, step)?;
        worst = worst.max((d[0][1] - d[1][0]).abs());
    }
    Ok(Closedness {
        max_d_rho: worst,
        closed: worst <= tol,
    })
}
