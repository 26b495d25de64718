//! Flat metrical connections on the Euclidean plane and the Finsler metrics
//! they carry.
//!
//! A divergence-free one-form `ρ` has a potential `f` with `ρ2 = ∂f/∂u1`,
//! `ρ1 = −∂f/∂u2`. Parallel transport along `c` then rotates vectors by
//! `−(f∘c(t) − f∘c(0))`, so holonomy is trivial and any convex seed curve at
//! the origin spreads to an indicatrix field `K_p = R(−Δf(p)) K_0`.

use serde::Serialize;

use crate::error::{FslError, Result};
use crate::expr::Expr;
use crate::linalg::{norm2, rotate};
use crate::metric::MetricField;
use crate::ode::rk4_integrate;
use crate::quad::UnitGauss;
use crate::roots::bracketed_root;
use crate::taylor::{Real, Shape, Taylor, Y1, Y2};

const POTENTIAL_NODES: usize = 16;

/// A one-form `ρ = ρ1 du1 + ρ2 du2` given by two expressions in `u1, u2`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    rho: [Expr; 2],
}

impl OneFormField {
    pub fn parse(rho1: &str, rho2: &str) -> Result<OneFormField> {
        let rho = [Expr::parse(rho1)?, Expr::parse(rho2)?];
        for e in &rho {
            if e.uses_var(2) || e.uses_var(3) {
                return Err(FslError::Expression(format!(
                    "one-form component `{}` may only use u1, u2",
                    e.source()
                )));
            }
        }
        Ok(OneFormField { rho })
    }

    /// `ρ = u2 du1 − u1 du2`.
    pub fn rotational() -> OneFormField {
        OneFormField::parse("u2", "-u1").expect("valid")
    }

    pub fn zero() -> OneFormField {
        OneFormField::parse("0", "0").expect("valid")
    }

    pub fn sources(&self) -> [&str; 2] {
        [self.rho[0].source(), self.rho[1].source()]
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        self.eval_generic(&p)
    }

    pub fn eval_generic<R: Real>(&self, u: &[R; 2]) -> [R; 2] {
        let z = u[0].lift(0.0);
        let vars = [u[0].clone(), u[1].clone(), z.clone(), z];
        [self.rho[0].eval(&vars), self.rho[1].eval(&vars)]
    }

    fn first_partials(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let s = Shape::base(1);
        let u = [Taylor::variable(s, 0, p[0]), Taylor::variable(s, 1, p[1])];
        let r = self.eval_generic(&u);
        [[r[0].d1(0), r[0].d1(1)], [r[1].d1(0), r[1].d1(1)]]
    }

    /// Euclidean divergence of `ρ♯`: `∂ρ1/∂u1 + ∂ρ2/∂u2`.
    pub fn divergence(&self, p: [f64; 2]) -> f64 {
        let d = self.first_partials(p);
        d[0][0] + d[1][1]
    }

    /// `dρ = (∂ρ2/∂u1 − ∂ρ1/∂u2) du1∧du2`.
    pub fn exterior_derivative(&self, p: [f64; 2]) -> f64 {
        let d = self.first_partials(p);
        d[1][0] - d[0][1]
    }
}

/// Potential `f` of a divergence-free one-form, normalized by `f(origin) = 0`.
#[derive(Debug, Clone)]
pub struct Potential {
    rho: OneFormField,
    origin: [f64; 2],
    rule: UnitGauss,
}

impl Potential {
    pub fn rho(&self) -> &OneFormField {
        &self.rho
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        self.value_generic(&p)
    }

    /// Line integral along `origin → (u1, o2) → (u1, u2)`.
    pub fn value_generic<R: Real>(&self, u: &[R; 2]) -> R {
        let o = self.origin;
        let d1 = u[0].clone() - o[0];
        let d2 = u[1].clone() - o[1];
        self.rule.integrate(&u[0], |s| {
            let a = self.rho.eval_generic(&[d1.clone() * s + o[0], u[0].lift(o[1])]);
            let b = self.rho.eval_generic(&[u[0].clone(), d2.clone() * s + o[1]]);
            d1.clone() * a[1].clone() - d2.clone() * b[0].clone()
        })
    }

    /// Line integral along `origin → (o1, u2) → (u1, u2)`.
    pub fn value_second_path(&self, p: [f64; 2]) -> f64 {
        let o = self.origin;
        let (d1, d2) = (p[0] - o[0], p[1] - o[1]);
        self.rule.integrate(&0.0, |s| {
            let a = self.rho.eval([o[0], o[1] + s * d2]);
            let b = self.rho.eval([o[0] + s * d1, p[1]]);
            -d2 * a[0] + d1 * b[1]
        })
    }
}

/// Build the potential of `rho`, checking path independence on a probe grid
/// of half-width 2 around `origin`.
pub fn potential(rho: &OneFormField, origin: [f64; 2]) -> Result<Potential> {
    let pot = Potential {
        rho: rho.clone(),
        origin,
        rule: UnitGauss::new(POTENTIAL_NODES),
    };
    let mut worst = 0.0f64;
    for i in 0..9 {
        for j in 0..9 {
            let p = [origin[0] - 2.0 + 0.5 * i as f64, origin[1] - 2.0 + 0.5 * j as f64];
            let d = (pot.value(p) - pot.value_second_path(p)).abs();
            if !d.is_finite() {
                return Err(FslError::InvalidArgument(format!(
                    "one-form is not finite near ({}, {})",
                    p[0], p[1]
                )));
            }
            worst = worst.max(d);
        }
    }
    if worst > 1e-6 {
        return Err(FslError::NotDivergenceFree { discrepancy: worst });
    }
    Ok(pot)
}

/// Smooth planar curves used for transport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Curve {
    /// `start + t·velocity`.
    Line { start: [f64; 2], velocity: [f64; 2] },
    /// `center + radius·(cos(t + phase), sin(t + phase))`.
    Circle { center: [f64; 2], radius: f64, phase: f64 },
}

impl Curve {
    /// `c(t) = (t, t)`.
    pub fn radial() -> Curve {
        Curve::Line {
            start: [0.0, 0.0],
            velocity: [1.0, 1.0],
        }
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Curve {
        Curve::Circle {
            center,
            radius,
            phase: 0.0,
        }
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { start, velocity } => [start[0] + t * velocity[0], start[1] + t * velocity[1]],
            Curve::Circle { center, radius, phase } => {
                let (s, c) = (t + phase).sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
        }
    }

    pub fn velocity(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { velocity, .. } => velocity,
            Curve::Circle { radius, phase, .. } => {
                let (s, c) = (t + phase).sin_cos();
                [-radius * s, radius * c]
            }
        }
    }
}

/// A curve restricted to the parameter interval `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub curve: Curve,
    pub t0: f64,
    pub t1: f64,
}

impl Segment {
    pub fn line(from: [f64; 2], to: [f64; 2]) -> Segment {
        Segment {
            curve: Curve::Line {
                start: from,
                velocity: [to[0] - from[0], to[1] - from[1]],
            },
            t0: 0.0,
            t1: 1.0,
        }
    }
}

/// `from → (to1, from2) → to`.
pub fn axis_path(from: [f64; 2], to: [f64; 2]) -> Vec<Segment> {
    let corner = [to[0], from[1]];
    vec![Segment::line(from, corner), Segment::line(corner, to)]
}

/// One sample of a transported vector, numerically and in closed form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransportedVector {
    pub t: f64,
    pub point: [f64; 2],
    /// Runge–Kutta solution.
    pub x: [f64; 2],
    /// `r0 (cos(φ + φ0), −sin(φ + φ0))`.
    pub closed: [f64; 2],
    /// `φ = f∘c(t)`.
    pub phi: f64,
    pub r0: f64,
    pub phi0: f64,
}

fn transport_rhs<'a>(field: &'a Potential, curve: &Curve) -> impl FnMut(f64, &[f64; 2]) -> Result<[f64; 2]> + 'a {
    let curve = *curve;
    move |t, x| {
        let c = curve.point(t);
        let dc = curve.velocity(t);
        let r = field.rho.eval(c);
        let dphi = dc[0] * r[1] - dc[1] * r[0];
        if !dphi.is_finite() {
            return Err(FslError::InvalidArgument(format!(
                "one-form is not finite at ({}, {})",
                c[0], c[1]
            )));
        }
        Ok([x[1] * dphi, -x[0] * dphi])
    }
}

/// Parallel transport of `x0` from `c(t_grid[0])` along `curve`, sampled at
/// `t_grid`, with Runge–Kutta steps no longer than `step`.
pub fn transport(
    field: &Potential,
    curve: &Curve,
    x0: [f64; 2],
    t_grid: &[f64],
    step: f64,
) -> Result<Vec<TransportedVector>> {
    let Some(&t_start) = t_grid.first() else {
        return Ok(Vec::new());
    };
    let r0 = norm2(x0);
    let phi_start = field.value(curve.point(t_start));
    let phi0 = (-x0[1]).atan2(x0[0]) - phi_start;
    let mut rhs = transport_rhs(field, curve);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut x = x0;
    let mut t_prev = t_start;
    for &t in t_grid {
        let steps = ((t - t_prev).abs() / step).ceil() as usize;
        if steps > 0 {
            x = rk4_integrate(&mut rhs, t_prev, x, t, steps)?;
        }
        t_prev = t;
        let point = curve.point(t);
        let phi = field.value(point);
        let a = phi + phi0;
        out.push(TransportedVector {
            t,
            point,
            x,
            closed: [r0 * a.cos(), -r0 * a.sin()],
            phi,
            r0,
            phi0,
        });
    }
    Ok(out)
}

/// Transport `x0` along consecutive segments and return the final vector.
pub fn transport_along(field: &Potential, path: &[Segment], x0: [f64; 2], step: f64) -> Result<[f64; 2]> {
    let mut x = x0;
    for s in path {
        let steps = ((s.t1 - s.t0).abs() / step).ceil().max(1.0) as usize;
        x = rk4_integrate(&mut transport_rhs(field, &s.curve), s.t0, x, s.t1, steps)?;
    }
    Ok(x)
}

/// `|X(end) − X(start)|` after transport around a closed loop.
pub fn holonomy_check(field: &Potential, lp: &[Segment], x0: [f64; 2], step: f64) -> Result<f64> {
    let (Some(first), Some(last)) = (lp.first(), lp.last()) else {
        return Err(FslError::InvalidArgument("empty loop".into()));
    };
    let a = first.curve.point(first.t0);
    let b = last.curve.point(last.t1);
    if norm2([a[0] - b[0], a[1] - b[1]]) > 1e-9 {
        return Err(FslError::InvalidArgument("loop is not closed".into()));
    }
    let x = transport_along(field, lp, x0, step)?;
    Ok(norm2([x[0] - x0[0], x[1] - x0[1]]))
}

/// Implicit seed curves `Φ(w) = 0` around the origin.
#[derive(Debug, Clone)]
pub enum Seed {
    /// Sum of distances to `(−1, 0)`, `0`, `(1, 0)` equal to 4.
    Trifocal,
    Circle { radius: f64 },
    /// An expression; `u1, u2` and `y1, y2` both name the two coordinates.
    Expr(Expr),
}

impl Seed {
    pub fn phi<R: Real>(&self, w: &[R; 2]) -> R {
        match self {
            Seed::Trifocal => {
                let sq = |a: R, b: R| (a.clone() * a + b.clone() * b).sqrt();
                sq(w[0].clone() + 1.0, w[1].clone())
                    + sq(w[0].clone(), w[1].clone())
                    + sq(w[0].clone() - 1.0, w[1].clone())
                    - 4.0
            }
            Seed::Circle { radius } => {
                (w[0].clone() * w[0].clone() + w[1].clone() * w[1].clone()).sqrt() - *radius
            }
            Seed::Expr(e) => e.eval(&[w[0].clone(), w[1].clone(), w[0].clone(), w[1].clone()]),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Seed::Trifocal => "trifocal".into(),
            Seed::Circle { radius } => format!("circle:{radius}"),
            Seed::Expr(e) => format!("expr:{}", e.source()),
        }
    }
}

/// A seed curve together with its sampled convexity certificate.
#[derive(Debug, Clone)]
pub struct SeedIndicatrix {
    seed: Seed,
    inradius: f64,
    circumradius: f64,
    min_turn: f64,
}

/// Number of boundary points used by the convexity certificate.
pub const CERTIFICATE_POINTS: usize = 720;

impl SeedIndicatrix {
    /// Sample the seed on `CERTIFICATE_POINTS` rays and certify that it is a
    /// strictly convex curve around the origin.
    pub fn new(seed: Seed) -> Result<SeedIndicatrix> {
        let f0 = seed.phi(&[0.0, 0.0]);
        if !(f0 < 0.0) {
            return Err(FslError::InvalidArgument(format!(
                "seed `{}` does not enclose the origin",
                seed.name()
            )));
        }
        let n = CERTIFICATE_POINTS;
        let mut pts = Vec::with_capacity(n);
        let (mut rin, mut rout) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let u = [a.cos(), a.sin()];
            let mut hi = 1.0;
            let mut grow = 0;
            while !(seed.phi(&[hi * u[0], hi * u[1]]) > 0.0) {
                hi *= 2.0;
                grow += 1;
                if grow > 60 {
                    return Err(FslError::RootBracketFailure(u[0], u[1]));
                }
            }
            let r = bracketed_root(|r| seed.phi(&[r * u[0], r * u[1]]), 0.0, hi, 1e-15)?;
            rin = rin.min(r);
            rout = rout.max(r);
            pts.push([r * u[0], r * u[1]]);
        }
        let mut min_turn = f64::INFINITY;
        for k in 0..n {
            let (a, b, c) = (pts[k], pts[(k + 1) % n], pts[(k + 2) % n]);
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            let turn = (e1[0] * e2[1] - e1[1] * e2[0]) / (norm2(e1) * norm2(e2));
            min_turn = min_turn.min(turn);
        }
        if !(min_turn > 0.0) {
            return Err(FslError::InvalidArgument(format!(
                "seed `{}` failed the convexity certificate (min turn {min_turn:e})",
                seed.name()
            )));
        }
        Ok(SeedIndicatrix {
            seed,
            inradius: rin,
            circumradius: rout,
            min_turn,
        })
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn phi(&self, w: [f64; 2]) -> f64 {
        self.seed.phi(&w)
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Smallest normalized turning cross product over the certificate.
    pub fn min_turn(&self) -> f64 {
        self.min_turn
    }

    /// Distance from the origin to the curve in the unit direction `u`.
    pub fn radius(&self, u: [f64; 2]) -> Result<f64> {
        let lo = 0.5 * self.inradius;
        let hi = 2.0 * self.circumradius;
        bracketed_root(|r| self.seed.phi(&[r * u[0], r * u[1]]), lo, hi, 1e-15)
            .map_err(|_| FslError::RootBracketFailure(u[0], u[1]))
    }

    /// `n` boundary points at equally spaced polar angles.
    pub fn boundary(&self, n: usize) -> Result<Vec<[f64; 2]>> {
        (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let u = [a.cos(), a.sin()];
                let r = self.radius(u)?;
                Ok([r * u[0], r * u[1]])
            })
            .collect()
    }
}

/// The trifocal ellipse with foci `(−1, 0)`, `0`, `(1, 0)` and distance sum 4.
pub fn trifocal_seed() -> SeedIndicatrix {
    SeedIndicatrix::new(Seed::Trifocal).expect("the trifocal ellipse is convex")
}

/// The seed curve carried to `p` by parallel transport.
#[derive(Debug, Clone, Serialize)]
pub struct TranslatedIndicatrix {
    pub base_point: [f64; 2],
    /// `−(f(p) − f(origin))`: the translate is the seed rotated by this angle.
    pub rotation: f64,
    /// Image of the focal vector `(1, 0)` (the foci of a trifocal seed are
    /// `−X, 0, X`).
    pub focal_vector: [f64; 2],
    #[serde(skip)]
    seed: SeedIndicatrix,
}

impl TranslatedIndicatrix {
    /// `Φ_p(v) = Φ(R(−rotation) v)`.
    pub fn phi(&self, v: [f64; 2]) -> f64 {
        self.seed.phi(rotate(v, -self.rotation))
    }

    pub fn boundary(&self, n: usize) -> Result<Vec<[f64; 2]>> {
        Ok(self
            .seed
            .boundary(n)?
            .into_iter()
            .map(|q| rotate(q, self.rotation))
            .collect())
    }
}

pub fn translated_indicatrix(seed: &SeedIndicatrix, field: &Potential, p: [f64; 2]) -> TranslatedIndicatrix {
    let rotation = -(field.value(p) - field.value(field.origin()));
    TranslatedIndicatrix {
        base_point: p,
        rotation,
        focal_vector: rotate([1.0, 0.0], rotation),
        seed: seed.clone(),
    }
}

/// The Finsler metric whose indicatrix at `p` is the transported seed.
///
/// `F(p, v)` is the gauge of the seed at `R(f(p) − f(0)) v`. The Taylor
/// evaluator solves `Φ(w/s) = 0` by a chord iteration on truncated
/// polynomials: each pass fixes one more order, so `order + 1` passes give
/// the exact expansion of the implicit function.
#[derive(Debug, Clone)]
pub struct PlaneMetric {
    id: String,
    seed: SeedIndicatrix,
    field: Potential,
}

impl PlaneMetric {
    pub fn new(id: &str, seed: SeedIndicatrix, rho: &OneFormField) -> Result<PlaneMetric> {
        Ok(PlaneMetric {
            id: id.to_string(),
            seed,
            field: potential(rho, [0.0, 0.0])?,
        })
    }

    pub fn seed(&self) -> &SeedIndicatrix {
        &self.seed
    }

    pub fn field(&self) -> &Potential {
        &self.field
    }

    /// Angle by which the seed is rotated to give the indicatrix at `p`.
    pub fn rotation(&self, p: [f64; 2]) -> f64 {
        -self.field.value(p)
    }

    pub fn translated(&self, p: [f64; 2]) -> TranslatedIndicatrix {
        translated_indicatrix(&self.seed, &self.field, p)
    }
}

/// Same as [`PlaneMetric::new`]: the metric carried by the seed and `rho`.
pub fn metric_from_field(id: &str, seed: SeedIndicatrix, rho: &OneFormField) -> Result<PlaneMetric> {
    PlaneMetric::new(id, seed, rho)
}

impl MetricField for PlaneMetric {
    fn name(&self) -> String {
        format!("plane:{}", self.id)
    }

    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64 {
        let w = rotate(v, -self.rotation(p));
        let n = norm2(w);
        if n == 0.0 {
            return 0.0;
        }
        match self.seed.radius([w[0] / n, w[1] / n]) {
            Ok(r) => n / r,
            Err(_) => f64::NAN,
        }
    }

    fn eval_taylor(&self, vars: &[Taylor; 4]) -> Option<Taylor> {
        let shape = vars[0].shape();
        let p = [vars[0].value(), vars[1].value()];
        let v = [vars[2].value(), vars[3].value()];
        let s0 = self.eval(p, v);
        if !s0.is_finite() || s0 <= 0.0 {
            return Some(Taylor::constant(shape, f64::NAN));
        }
        // w = R(Δ) v with Δ = f(p)
        let delta = self.field.value_generic(&[vars[0].clone(), vars[1].clone()]);
        let (sn, cs) = (delta.sin(), delta.cos());
        let w = [
            &cs * &vars[2] - &sn * &vars[3],
            &sn * &vars[2] + &cs * &vars[3],
        ];
        // d/ds Φ(w0/s) at s0, by first-order Taylor arithmetic in the fiber
        let w0 = [w[0].value(), w[1].value()];
        let q = [w0[0] / s0, w0[1] / s0];
        let s1 = Shape::fiber(1);
        let grad = self
            .seed
            .seed()
            .phi(&[Taylor::variable(s1, Y1, q[0]), Taylor::variable(s1, Y2, q[1])]);
        let slope = -(grad.d1(Y1) * q[0] + grad.d1(Y2) * q[1]) / s0;
        if !(slope.abs() > 0.0) {
            return Some(Taylor::constant(shape, f64::NAN));
        }
        let mut s = Taylor::constant(shape, s0);
        for _ in 0..=shape.order() {
            let inv = s.recip();
            let r = self.seed.seed().phi(&[&w[0] * &inv, &w[1] * &inv]);
            s = s - r * (1.0 / slope);
        }
        Some(s)
    }
}

/// Named plane constructions: `trifocal-rot` (trifocal seed with
/// `ρ = u2 du1 − u1 du2`), `trifocal-flat` (trifocal seed, `ρ = 0`, a
/// Minkowski plane) and `circle-rot` (unit circle seed, Euclidean).
pub fn construction(id: &str) -> Result<PlaneMetric> {
    match id {
        "trifocal-rot" => PlaneMetric::new(id, trifocal_seed(), &OneFormField::rotational()),
        "trifocal-flat" => PlaneMetric::new(id, trifocal_seed(), &OneFormField::zero()),
        "circle-rot" => PlaneMetric::new(
            id,
            SeedIndicatrix::new(Seed::Circle { radius: 1.0 })?,
            &OneFormField::rotational(),
        ),
        _ => Err(FslError::InvalidArgument(format!("unknown plane construction `{id}`"))),
    }
}
