//! Pointwise tensor apparatus of a Finsler surface at `(p, v)`.
//!
//! Everything is derived from one Taylor expansion of `F` by polynomial
//! arithmetic, so the towers `G^l → G^l_i → G^l_ij → G^l_ijk` are exact
//! derivatives of each other. An expansion of order `K` yields `g` to order
//! `K−2`, the spray `G^l` to order `K−2` and `G^l_ijk` as a value when
//! `K = 5`.

use serde::Serialize;

use crate::engine::Engine;
use crate::error::{FslError, Result};
use crate::linalg::{Mat2, Tensor3, Tensor4};
use crate::metric::MetricField;
use crate::taylor::{xv, yv, Shape, Taylor};

/// Truncation order needed for the full spray tower.
pub const SPRAY_ORDER: usize = 5;

type T2 = [Taylor; 2];
type T22 = [[Taylor; 2]; 2];

/// Polynomial objects at one point; each field notes its valid order.
pub(crate) struct Expansion {
    pub v: [f64; 2],
    pub shape: &'static Shape,
    /// `F`, order K.
    pub f: Taylor,
    /// `∂F/∂y^i`, order K−1.
    pub fy: T2,
    /// `∂²F/∂y^i∂y^j`, order K−2.
    pub fyy: T22,
    /// `E = F²/2`, order K.
    pub e: Taylor,
    /// `g_ij`, order K−2.
    pub g: T22,
    pub det: Taylor,
    pub ginv: T22,
    /// `V = (−∂F/∂y², ∂F/∂y¹)`, order K−1.
    pub vv: T2,
    pub gvv: Taylor,
    /// `V0 = V/sqrt(g(V,V))`, order K−2.
    pub v0: T2,
    /// Main scalar, order K−3 (absent for K < 3).
    pub lam: Option<Taylor>,
    /// Fiber coordinates as polynomials.
    pub y: T2,
}

fn poly2<F: Fn(usize) -> Taylor>(f: F) -> T2 {
    [f(0), f(1)]
}

fn poly22<F: Fn(usize, usize) -> Taylor>(f: F) -> T22 {
    [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]]
}

impl Expansion {
    pub fn new(
        m: &dyn MetricField,
        p: [f64; 2],
        v: [f64; 2],
        engine: &Engine,
        shape: &'static Shape,
    ) -> Result<Expansion> {
        let f = engine.expand(m, p, v, shape)?;
        let e = &f * &f * 0.5;
        let fy = poly2(|i| f.deriv(yv(i)));
        let fyy = poly22(|i, j| fy[i].deriv(yv(j)));
        let ey = poly2(|i| e.deriv(yv(i)));
        let g = poly22(|i, j| ey[i].deriv(yv(j)));
        let det = &g[0][0] * &g[1][1] - &g[0][1] * &g[1][0];
        if !(det.value() > 0.0) {
            return Err(FslError::SingularMetric { det: det.value() });
        }
        let idet = det.recip();
        let ginv = [
            [&g[1][1] * &idet, -(&g[0][1] * &idet)],
            [-(&g[1][0] * &idet), &g[0][0] * &idet],
        ];
        let vv = [-fy[1].clone(), fy[0].clone()];
        let gvv = quad(&g, &vv, &vv);
        let norm = gvv.sqrt();
        let inorm = norm.recip();
        let v0 = poly2(|i| &vv[i] * &inorm);
        let lam = if shape.order() >= 3 {
            let mut acc = Taylor::constant(shape, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    let dg = g[i][j].deriv(yv(0)) * &v0[0] + g[i][j].deriv(yv(1)) * &v0[1];
                    acc = acc + dg * &v0[i] * &v0[j] * 0.5;
                }
            }
            Some(acc)
        } else {
            None
        };
        let y = poly2(|i| Taylor::variable(shape, yv(i), v[i]));
        Ok(Expansion {
            v,
            shape,
            f,
            fy,
            fyy,
            e,
            g,
            det,
            ginv,
            vv,
            gvv,
            v0,
            lam,
            y,
        })
    }

    pub fn lam(&self) -> &Taylor {
        self.lam.as_ref().expect("expansion order too low for the main scalar")
    }

    /// Directional derivative `V0(φ)` (vertical).
    pub fn along_v0(&self, phi: &Taylor) -> Taylor {
        phi.deriv(yv(0)) * &self.v0[0] + phi.deriv(yv(1)) * &self.v0[1]
    }

    pub fn g_value(&self) -> Mat2 {
        [
            [self.g[0][0].value(), self.g[0][1].value()],
            [self.g[1][0].value(), self.g[1][1].value()],
        ]
    }

    pub fn ginv_value(&self) -> Mat2 {
        [
            [self.ginv[0][0].value(), self.ginv[0][1].value()],
            [self.ginv[1][0].value(), self.ginv[1][1].value()],
        ]
    }

    pub fn cartan_value(&self) -> Tensor3 {
        let mut c = [[[0.0; 2]; 2]; 2];
        for (i, ci) in c.iter_mut().enumerate() {
            for (j, cij) in ci.iter_mut().enumerate() {
                for (k, cijk) in cij.iter_mut().enumerate() {
                    *cijk = 0.5 * self.g[i][j].d1(yv(k));
                }
            }
        }
        c
    }

    pub fn v0_value(&self) -> [f64; 2] {
        [self.v0[0].value(), self.v0[1].value()]
    }
}

fn quad(g: &T22, a: &T2, b: &T2) -> Taylor {
    let mut acc = &g[0][0] * &a[0] * &b[0];
    acc = acc + &g[0][1] * &a[0] * &b[1];
    acc = acc + &g[1][0] * &a[1] * &b[0];
    acc + &g[1][1] * &a[1] * &b[1]
}

/// Spray tower built on a full-shape expansion.
pub(crate) struct Spray {
    /// `G^l`, order K−2.
    pub g: T2,
    /// `G^l_i`, order K−3.
    pub gi: T22,
    /// `G^l_ij` as `[l][i][j]`, order K−4.
    pub gij: [T22; 2],
    /// `G^l_ijk` as `[l][i][j][k]` values (needs K = 5).
    pub gijk: Tensor4,
}

impl Spray {
    pub fn new(x: &Expansion) -> Spray {
        let e = &x.e;
        let mut rhs: Vec<Taylor> = Vec::with_capacity(2);
        for m in 0..2 {
            let eym = e.deriv(yv(m));
            let mut r = -e.deriv(xv(m));
            for k in 0..2 {
                r = r + eym.deriv(xv(k)) * &x.y[k];
            }
            rhs.push(r);
        }
        let g = poly2(|l| (&x.ginv[l][0] * &rhs[0] + &x.ginv[l][1] * &rhs[1]) * 0.5);
        let gi = poly22(|l, i| g[l].deriv(yv(i)));
        let gij = [
            poly22(|i, j| gi[0][i].deriv(yv(j))),
            poly22(|i, j| gi[1][i].deriv(yv(j))),
        ];
        let mut gijk = [[[[0.0; 2]; 2]; 2]; 2];
        for (l, a) in gijk.iter_mut().enumerate() {
            for (i, b) in a.iter_mut().enumerate() {
                for (j, c) in b.iter_mut().enumerate() {
                    for (k, d) in c.iter_mut().enumerate() {
                        *d = gij[l][i][j].d1(yv(k));
                    }
                }
            }
        }
        Spray { g, gi, gij, gijk }
    }

    /// Horizontal lift `X_i^h φ = ∂φ/∂x^i − G^l_i ∂φ/∂y^l`.
    pub fn horizontal(&self, i: usize, phi: &Taylor) -> Taylor {
        phi.deriv(xv(i)) - &self.gi[0][i] * phi.deriv(yv(0)) - &self.gi[1][i] * phi.deriv(yv(1))
    }

    pub fn gij_value(&self) -> Tensor3 {
        let mut t = [[[0.0; 2]; 2]; 2];
        for (l, a) in t.iter_mut().enumerate() {
            for (i, b) in a.iter_mut().enumerate() {
                for (j, c) in b.iter_mut().enumerate() {
                    *c = self.gij[l][i][j].value();
                }
            }
        }
        t
    }
}

/// All pointwise metric data at `(p, v)`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricJet {
    #[serde(rename = "E")]
    pub e: f64,
    pub f: f64,
    pub g: Mat2,
    pub g_inv: Mat2,
    pub det_g: f64,
    pub cartan: Tensor3,
    pub cartan_trace: [f64; 2],
    pub l: [f64; 2],
    #[serde(rename = "V")]
    pub v: [f64; 2],
    #[serde(rename = "V0")]
    pub v0: [f64; 2],
    #[serde(rename = "C0")]
    pub c0: [f64; 2],
    pub main_scalar: f64,
}

impl MetricJet {
    fn from_expansion(x: &Expansion) -> MetricJet {
        let g = x.g_value();
        let g_inv = x.ginv_value();
        let cartan = x.cartan_value();
        let mut trace = [0.0; 2];
        for (i, t) in trace.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *t += g_inv[j][k] * cartan[i][j][k];
                }
            }
        }
        let f = x.f.value();
        MetricJet {
            e: x.e.value(),
            f,
            g,
            g_inv,
            det_g: x.det.value(),
            cartan,
            cartan_trace: trace,
            l: [x.fy[0].value(), x.fy[1].value()],
            v: [x.vv[0].value(), x.vv[1].value()],
            v0: x.v0_value(),
            c0: [x.v[0] / f, x.v[1] / f],
            main_scalar: x.lam().value(),
        }
    }
}

pub fn metric_jet(m: &dyn MetricField, p: [f64; 2], v: [f64; 2], engine: &Engine) -> Result<MetricJet> {
    let x = Expansion::new(m, p, v, engine, Shape::fiber(3))?;
    Ok(MetricJet::from_expansion(&x))
}

/// The unit tangent `V0` of the indicatrix through `v`.
pub fn unit_tangent(m: &dyn MetricField, p: [f64; 2], v: [f64; 2], engine: &Engine) -> Result<[f64; 2]> {
    let x = Expansion::new(m, p, v, engine, Shape::fiber(2))?;
    Ok(x.v0_value())
}

/// `g_ij` and `F` at one fiber point.
pub fn fundamental_tensor(
    m: &dyn MetricField,
    p: [f64; 2],
    v: [f64; 2],
    engine: &Engine,
) -> Result<(Mat2, f64)> {
    let x = Expansion::new(m, p, v, engine, Shape::fiber(2))?;
    Ok((x.g_value(), x.f.value()))
}

/// Spray coefficients, their fiber derivatives, horizontal lifts and the
/// Landsberg tensor at `(p, v)`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SprayJets {
    #[serde(rename = "G")]
    pub g: [f64; 2],
    /// `Gi[l][i] = G^l_i`.
    pub gi: Mat2,
    /// `Gij[l][i][j] = G^l_ij`.
    pub gij: Tensor3,
    /// `Gijk[l][i][j][k] = G^l_ijk`.
    pub gijk: Tensor4,
    /// Lowered Landsberg tensor `P_ijk = g_kl P^l_ij`.
    pub landsberg: Tensor3,
    /// `P^l_ij` as `[l][i][j]`, from the horizontal derivative of `g`.
    pub landsberg_mixed: Tensor3,
    /// Row `i` holds the coefficients of `X_i^h` on `(∂x1, ∂x2, ∂y1, ∂y2)`.
    pub horizontal_basis: [[f64; 4]; 2],
}

fn landsberg_mixed(x: &Expansion, s: &Spray) -> Tensor3 {
    let gv = x.g_value();
    let gi = x.ginv_value();
    let gij = s.gij_value();
    let mut inner = [[[0.0; 2]; 2]; 2]; // [i][j][m]
    for (i, a) in inner.iter_mut().enumerate() {
        for (j, b) in a.iter_mut().enumerate() {
            for (mm, c) in b.iter_mut().enumerate() {
                let mut val = s.horizontal(i, &x.g[j][mm]).value();
                for k in 0..2 {
                    val -= gij[k][i][j] * gv[k][mm] + gij[k][i][mm] * gv[j][k];
                }
                *c = val;
            }
        }
    }
    let mut out = [[[0.0; 2]; 2]; 2];
    for (l, a) in out.iter_mut().enumerate() {
        for (i, b) in a.iter_mut().enumerate() {
            for (j, c) in b.iter_mut().enumerate() {
                *c = 0.5 * (0..2).map(|mm| gi[l][mm] * inner[i][j][mm]).sum::<f64>();
            }
        }
    }
    out
}

fn spray_jets_from(x: &Expansion, s: &Spray) -> SprayJets {
    let mixed = landsberg_mixed(x, s);
    let gv = x.g_value();
    let mut lowered = [[[0.0; 2]; 2]; 2];
    for (i, a) in lowered.iter_mut().enumerate() {
        for (j, b) in a.iter_mut().enumerate() {
            for (k, c) in b.iter_mut().enumerate() {
                *c = (0..2).map(|l| gv[k][l] * mixed[l][i][j]).sum();
            }
        }
    }
    let gi = [
        [s.gi[0][0].value(), s.gi[0][1].value()],
        [s.gi[1][0].value(), s.gi[1][1].value()],
    ];
    let mut basis = [[0.0; 4]; 2];
    for (i, row) in basis.iter_mut().enumerate() {
        row[i] = 1.0;
        row[2] = -gi[0][i];
        row[3] = -gi[1][i];
    }
    SprayJets {
        g: [s.g[0].value(), s.g[1].value()],
        gi,
        gij: s.gij_value(),
        gijk: s.gijk,
        landsberg: lowered,
        landsberg_mixed: mixed,
        horizontal_basis: basis,
    }
}

pub fn spray_jets(m: &dyn MetricField, p: [f64; 2], v: [f64; 2], engine: &Engine) -> Result<SprayJets> {
    let x = Expansion::new(m, p, v, engine, Shape::full(SPRAY_ORDER))?;
    let s = Spray::new(&x);
    Ok(spray_jets_from(&x, &s))
}

/// Everything the indicatrix and connection modules sample along a trace.
#[derive(Debug, Clone, Serialize)]
pub struct FiberData {
    pub y: [f64; 2],
    pub f: f64,
    pub v0: [f64; 2],
    pub g: Mat2,
    /// `sqrt(det g)`.
    pub w: f64,
    pub lam: f64,
    /// `V0(λ)`.
    pub v0_lam: f64,
    pub alpha: [f64; 2],
    pub omega: [f64; 2],
    /// `G^l_ij` as `[l][i][j]`.
    pub gij: Tensor3,
    /// `∂²F/∂y^i∂y^j`.
    pub fyy: Mat2,
    /// `∂F/∂y^i`.
    pub fy: [f64; 2],
    /// `∂F/∂x^i`.
    pub fx: [f64; 2],
}

/// `α_i = ½ F V0^j V0^k G^l_ijk ∂F/∂y^l` and
/// `ω_i = V0^j V0^k G^l_ijk g(V0, ∂/∂y^l)`.
fn source_terms(f: f64, fy: [f64; 2], g: &Mat2, v0: [f64; 2], gijk: &Tensor4) -> ([f64; 2], [f64; 2]) {
    let mut alpha = [0.0; 2];
    let mut omega = [0.0; 2];
    let gv0 = [
        g[0][0] * v0[0] + g[0][1] * v0[1],
        g[1][0] * v0[0] + g[1][1] * v0[1],
    ];
    for i in 0..2 {
        for l in 0..2 {
            let mut c = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    c += gijk[l][i][j][k] * v0[j] * v0[k];
                }
            }
            alpha[i] += 0.5 * f * c * fy[l];
            omega[i] += c * gv0[l];
        }
    }
    (alpha, omega)
}

pub fn fiber_data(m: &dyn MetricField, p: [f64; 2], v: [f64; 2], engine: &Engine) -> Result<FiberData> {
    let x = Expansion::new(m, p, v, engine, Shape::full(SPRAY_ORDER))?;
    let s = Spray::new(&x);
    let g = x.g_value();
    let f = x.f.value();
    let fy = [x.fy[0].value(), x.fy[1].value()];
    let v0 = x.v0_value();
    let (alpha, omega) = source_terms(f, fy, &g, v0, &s.gijk);
    let lam = x.lam();
    Ok(FiberData {
        y: v,
        f,
        v0,
        g,
        w: x.det.value().sqrt(),
        lam: lam.value(),
        v0_lam: x.along_v0(lam).value(),
        alpha,
        omega,
        gij: s.gij_value(),
        fyy: [
            [x.fyy[0][0].value(), x.fyy[0][1].value()],
            [x.fyy[1][0].value(), x.fyy[1][1].value()],
        ],
        fy,
        fx: [x.f.d1(xv(0)), x.f.d1(xv(1))],
    })
}

/// Residuals of the pointwise identities at one sample.
#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct IdentityReport {
    /// `|y^i ∂F/∂y^i − F|`.
    pub euler_f: f64,
    /// `|C(E) − 2E|`.
    pub euler_e: f64,
    /// `max |y^k C_ijk| / max(‖C‖, ‖g‖/F)`.
    pub cartan_contraction: f64,
    /// `|det g − g(V,V)| / det g`.
    pub det_vs_gvv: f64,
    /// `max_i |C_i − ∂ ln sqrt(det g) / ∂y^i|`.
    pub trace_log_det: f64,
    /// `|V0V0V0 C − V0(ln sqrt(det g))|` with the right side by a central
    /// difference along `V0`.
    pub main_scalar: f64,
    /// Max deviation between `P^l_ij` from `X_i^h g` and `−(F/2) l_m g^{kl} P^m_ijk`.
    pub landsberg_identity: f64,
    /// `|y^i α_i|`.
    pub liouville_alpha: f64,
    /// `max_i |V0(V0^i) + λ V0^i + y^i/F²|`.
    pub tangent_derivative: f64,
}

impl IdentityReport {
    pub fn max_with(&self, o: &IdentityReport) -> IdentityReport {
        IdentityReport {
            euler_f: self.euler_f.max(o.euler_f),
            euler_e: self.euler_e.max(o.euler_e),
            cartan_contraction: self.cartan_contraction.max(o.cartan_contraction),
            det_vs_gvv: self.det_vs_gvv.max(o.det_vs_gvv),
            trace_log_det: self.trace_log_det.max(o.trace_log_det),
            main_scalar: self.main_scalar.max(o.main_scalar),
            landsberg_identity: self.landsberg_identity.max(o.landsberg_identity),
            liouville_alpha: self.liouville_alpha.max(o.liouville_alpha),
            tangent_derivative: self.tangent_derivative.max(o.tangent_derivative),
        }
    }

    /// Names of the identities whose residual exceeds `tol`.
    pub fn failures(&self, tol: &IdentityTolerances) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks = [
            ("euler_f", self.euler_f, tol.euler),
            ("euler_e", self.euler_e, tol.euler),
            ("cartan_contraction", self.cartan_contraction, tol.cartan_contraction),
            ("det_vs_gvv", self.det_vs_gvv, tol.det_vs_gvv),
            ("trace_log_det", self.trace_log_det, tol.trace_log_det),
            ("main_scalar", self.main_scalar, tol.main_scalar),
            ("landsberg_identity", self.landsberg_identity, tol.landsberg_identity),
            ("liouville_alpha", self.liouville_alpha, tol.liouville_alpha),
            ("tangent_derivative", self.tangent_derivative, tol.tangent_derivative),
        ];
        for (name, val, t) in checks {
            if !(val <= t) {
                out.push(name);
            }
        }
        out
    }
}

/// Acceptance thresholds for [`IdentityReport`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityTolerances {
    pub euler: f64,
    pub cartan_contraction: f64,
    pub det_vs_gvv: f64,
    pub trace_log_det: f64,
    pub main_scalar: f64,
    pub landsberg_identity: f64,
    pub liouville_alpha: f64,
    pub tangent_derivative: f64,
}

impl IdentityTolerances {
    pub fn for_engine(engine: &Engine) -> IdentityTolerances {
        match engine {
            Engine::Dual => IdentityTolerances {
                euler: 1e-8,
                cartan_contraction: 1e-7,
                det_vs_gvv: 1e-6,
                trace_log_det: 1e-8,
                main_scalar: 1e-5,
                landsberg_identity: 1e-4,
                liouville_alpha: 1e-6,
                tangent_derivative: 1e-4,
            },
            Engine::Fd(_) => IdentityTolerances {
                euler: 1e-5,
                cartan_contraction: 1e-5,
                det_vs_gvv: 1e-6,
                trace_log_det: 1e-5,
                main_scalar: 1e-5,
                landsberg_identity: 1e-4,
                // α carries G^l_ijk, whose FD noise floor is about 1e-4
                liouville_alpha: 1e-4,
                tangent_derivative: 1e-4,
            },
        }
    }

    pub fn scaled(mut self, s: f64) -> IdentityTolerances {
        self.euler *= s;
        self.cartan_contraction *= s;
        self.det_vs_gvv *= s;
        self.trace_log_det *= s;
        self.main_scalar *= s;
        self.landsberg_identity *= s;
        self.liouville_alpha *= s;
        self.tangent_derivative *= s;
        self
    }
}

pub fn identity_residuals(
    m: &dyn MetricField,
    p: [f64; 2],
    v: [f64; 2],
    engine: &Engine,
) -> Result<IdentityReport> {
    let x = Expansion::new(m, p, v, engine, Shape::full(SPRAY_ORDER))?;
    let s = Spray::new(&x);
    let f = x.f.value();
    let fy = [x.fy[0].value(), x.fy[1].value()];
    let e = x.e.value();
    let euler_f = (v[0] * fy[0] + v[1] * fy[1] - f).abs();
    let euler_e = (v[0] * x.e.d1(yv(0)) + v[1] * x.e.d1(yv(1)) - 2.0 * e).abs();

    let c = x.cartan_value();
    let cnorm = c.iter().flatten().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut contraction = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            contraction = contraction.max((v[0] * c[i][j][0] + v[1] * c[i][j][1]).abs());
        }
    }
    // relative to ‖C‖, floored at ‖g‖/F (C has the scale of g/F) so that
    // Riemannian fibers, where C is pure noise, are not divided by ~0
    let gnorm = x.g_value().iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    contraction /= cnorm.max(gnorm / x.f.value());

    let det = x.det.value();
    let det_vs_gvv = (det - x.gvv.value()).abs() / det;

    let jet = MetricJet::from_expansion(&x);
    let logdet = x.det.ln() * 0.5;
    let trace_log_det = (0..2)
        .map(|i| (jet.cartan_trace[i] - logdet.d1(yv(i))).abs())
        .fold(0.0, f64::max);

    let half_log_det = |w: [f64; 2]| -> Result<f64> {
        let (g, _) = fundamental_tensor(m, p, w, engine)?;
        Ok(0.5 * crate::linalg::det2(&g).ln())
    };
    let eps = 1e-4 * v[0].hypot(v[1]);
    let v0 = jet.v0;
    let plus = half_log_det([v[0] + eps * v0[0], v[1] + eps * v0[1]])?;
    let minus = half_log_det([v[0] - eps * v0[0], v[1] - eps * v0[1]])?;
    let main_scalar = (jet.main_scalar - (plus - minus) / (2.0 * eps)).abs();

    let mixed = landsberg_mixed(&x, &s);
    let gi = x.ginv_value();
    let mut landsberg = 0.0f64;
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut rhs = 0.0;
                for mm in 0..2 {
                    for k in 0..2 {
                        // P^m_ijk = −G^m_ijk
                        rhs += -0.5 * f * fy[mm] * gi[k][l] * (-s.gijk[mm][i][j][k]);
                    }
                }
                landsberg = landsberg.max((mixed[l][i][j] - rhs).abs());
            }
        }
    }

    let (alpha, _) = source_terms(f, fy, &x.g_value(), v0, &s.gijk);
    let liouville_alpha = (v[0] * alpha[0] + v[1] * alpha[1]).abs();

    let lam = jet.main_scalar;
    let tangent_derivative = (0..2)
        .map(|i| (x.along_v0(&x.v0[i]).value() + lam * v0[i] + v[i] / (f * f)).abs())
        .fold(0.0, f64::max);

    Ok(IdentityReport {
        euler_f,
        euler_e,
        cartan_contraction: contraction,
        det_vs_gvv,
        trace_log_det,
        main_scalar,
        landsberg_identity: landsberg,
        liouville_alpha,
        tangent_derivative,
    })
}

/// Residuals of Cartan's permutation formulas for the Berwald frame.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CartanPermutationReport {
    /// Max over the coordinate functions `x^i, y^i` of
    /// `|[S0, V0] + (1/F) V0^h|`.
    pub s0_v0: f64,
    /// `|⟨[V0, V0^h] + (1/F)S0 + λV0^h + S(λ)V0, dF⟩|`.
    pub contracted: f64,
    /// `|V0 F|`.
    pub v0_f: f64,
}

/// A vector field on the tangent manifold by its four component polynomials.
struct Field([Taylor; 4]);

impl Field {
    fn apply(&self, phi: &Taylor) -> Taylor {
        let mut acc = Taylor::constant(phi.shape(), 0.0);
        for a in 0..4 {
            acc = acc + &self.0[a] * phi.deriv(a);
        }
        acc
    }

    fn bracket_value(&self, other: &Field) -> [f64; 4] {
        std::array::from_fn(|a| self.apply(&other.0[a]).value() - other.apply(&self.0[a]).value())
    }
}

pub fn bracket_check(
    m: &dyn MetricField,
    p: [f64; 2],
    v: [f64; 2],
    engine: &Engine,
) -> Result<CartanPermutationReport> {
    let x = Expansion::new(m, p, v, engine, Shape::full(SPRAY_ORDER))?;
    let s = Spray::new(&x);
    let sh = x.shape;
    let zero = || Taylor::constant(sh, 0.0);
    let inv_f = x.f.recip();
    let v0 = Field([zero(), zero(), x.v0[0].clone(), x.v0[1].clone()]);
    let lift = |a: &T2| -> Field {
        let h = |l: usize| -(&s.gi[l][0] * &a[0] + &s.gi[l][1] * &a[1]);
        Field([a[0].clone(), a[1].clone(), h(0), h(1)])
    };
    let v0h = lift(&x.v0);
    let sf = lift(&x.y);
    let s0 = Field(std::array::from_fn(|a| &sf.0[a] * &inv_f));

    let b = s0.bracket_value(&v0);
    let fv = x.f.value();
    let s0_v0 = (0..4)
        .map(|a| (b[a] + v0h.0[a].value() / fv).abs())
        .fold(0.0, f64::max);

    let lam = x.lam();
    let s_lam = sf.apply(lam).value();
    let c = v0.bracket_value(&v0h);
    let df: [f64; 4] = std::array::from_fn(|a| x.f.d1(a));
    let mut contracted = 0.0;
    for a in 0..4 {
        let comp = c[a] + s0.0[a].value() / fv + lam.value() * v0h.0[a].value() + s_lam * v0.0[a].value();
        contracted += comp * df[a];
    }
    Ok(CartanPermutationReport {
        s0_v0,
        contracted: contracted.abs(),
        v0_f: v0.apply(&x.f).value().abs(),
    })
}

/// The quantities entering Wagner's equations at one fiber point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WagnerPoint {
    pub lam: f64,
    pub v0_lam: f64,
    pub v0_v0_lam: f64,
    /// `V0(λ) X_i^h(V0 λ) − V0(V0 λ) X_i^h(λ)`.
    pub residual: [f64; 2],
}

pub fn wagner_point(m: &dyn MetricField, p: [f64; 2], v: [f64; 2], engine: &Engine) -> Result<WagnerPoint> {
    let x = Expansion::new(m, p, v, engine, Shape::full(SPRAY_ORDER))?;
    let s = Spray::new(&x);
    let lam = x.lam();
    let a1 = x.along_v0(lam);
    let a2 = x.along_v0(&a1);
    let residual = std::array::from_fn(|i| {
        a1.value() * s.horizontal(i, &a1).value() - a2.value() * s.horizontal(i, lam).value()
    });
    Ok(WagnerPoint {
        lam: lam.value(),
        v0_lam: a1.value(),
        v0_v0_lam: a2.value(),
        residual,
    })
}
