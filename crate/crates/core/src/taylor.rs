//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] value is the Taylor polynomial of a smooth function around a
//! fixed expansion point, truncated at a total degree. The variables are the
//! four induced coordinates of the tangent manifold of a surface, in the
//! order `x1, x2, y1, y2`; a [`Shape`] selects which of them are active and
//! the truncation order. Arithmetic on these polynomials is forward-mode
//! automatic differentiation of arbitrary order: nested dual numbers with
//! the symmetric mixed partials merged into one coefficient.
//!
//! Coefficients are stored as Taylor coefficients `c_a`, so that
//! `f(p + d) = sum_a c_a d^a` and `∂^a f(p) = a! c_a`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

/// Index of the base coordinate `x1`.
pub const X1: usize = 0;
/// Index of the base coordinate `x2`.
pub const X2: usize = 1;
/// Index of the fiber coordinate `y1`.
pub const Y1: usize = 2;
/// Index of the fiber coordinate `y2`.
pub const Y2: usize = 3;

/// Index of the base coordinate `x^i` (`i` in `0..2`).
#[inline]
pub const fn xv(i: usize) -> usize {
    i
}

/// Index of the fiber coordinate `y^i` (`i` in `0..2`).
#[inline]
pub const fn yv(i: usize) -> usize {
    2 + i
}

/// Monomial layout and multiplication tables for one (active set, order) pair.
pub struct Shape {
    order: usize,
    active: [bool; 4],
    exps: Vec<[u8; 4]>,
    degree: Vec<u8>,
    lookup: HashMap<[u8; 4], usize>,
    triplets: Vec<(u16, u16, u16)>,
    // (source monomial, target monomial, factor) for d/dvar
    deriv: [Vec<(u16, u16, f64)>; 4],
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Shape")
            .field("order", &self.order)
            .field("active", &self.active)
            .field("len", &self.exps.len())
            .finish()
    }
}

impl Shape {
    fn build(active: [bool; 4], order: usize) -> Shape {
        let mut exps: Vec<[u8; 4]> = Vec::new();
        for d in 0..=order {
            let mut cur = [0u8; 4];
            collect_degree(&active, d, 0, &mut cur, &mut exps);
        }
        let degree: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let lookup: HashMap<[u8; 4], usize> =
            exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut triplets = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if (degree[i] + degree[j]) as usize > order {
                    continue;
                }
                let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
                triplets.push((i as u16, j as u16, lookup[&s] as u16));
            }
        }
        let deriv = std::array::from_fn(|var| {
            let mut table = Vec::new();
            if active[var] {
                for (i, e) in exps.iter().enumerate() {
                    if e[var] == 0 {
                        continue;
                    }
                    let mut t = *e;
                    t[var] -= 1;
                    table.push((i as u16, lookup[&t] as u16, e[var] as f64));
                }
            }
            table
        });
        Shape {
            order,
            active,
            exps,
            degree,
            lookup,
            triplets,
            deriv,
        }
    }

    /// Cached shape for the given active variables and truncation order.
    pub fn get(active: [bool; 4], order: usize) -> &'static Shape {
        static REGISTRY: OnceLock<Mutex<Vec<&'static Shape>>> = OnceLock::new();
        let reg = REGISTRY.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = reg.lock().expect("shape registry poisoned");
        if let Some(s) = guard
            .iter()
            .find(|s| s.active == active && s.order == order)
        {
            return s;
        }
        let s: &'static Shape = Box::leak(Box::new(Shape::build(active, order)));
        guard.push(s);
        s
    }

    /// All four variables active.
    pub fn full(order: usize) -> &'static Shape {
        Shape::get([true; 4], order)
    }

    /// Only the fiber variables `y1, y2` active.
    pub fn fiber(order: usize) -> &'static Shape {
        Shape::get([false, false, true, true], order)
    }

    /// Only the base variables `x1, x2` active.
    pub fn base(order: usize) -> &'static Shape {
        Shape::get([true, true, false, false], order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_active(&self, var: usize) -> bool {
        self.active[var]
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Exponent vectors of all monomials, graded by total degree.
    pub fn monomials(&self) -> &[[u8; 4]] {
        &self.exps
    }

    pub fn index_of(&self, exps: [u8; 4]) -> Option<usize> {
        self.lookup.get(&exps).copied()
    }
}

fn collect_degree(active: &[bool; 4], left: usize, var: usize, cur: &mut [u8; 4], out: &mut Vec<[u8; 4]>) {
    if var == 4 {
        if left == 0 {
            out.push(*cur);
        }
        return;
    }
    if !active[var] {
        cur[var] = 0;
        collect_degree(active, left, var + 1, cur, out);
        return;
    }
    for k in (0..=left).rev() {
        cur[var] = k as u8;
        collect_degree(active, left - k, var + 1, cur, out);
    }
    cur[var] = 0;
}

/// A truncated Taylor polynomial on a fixed [`Shape`].
#[derive(Clone)]
pub struct Taylor {
    shape: &'static Shape,
    c: Vec<f64>,
}

impl fmt::Debug for Taylor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Taylor({:?}, {:?})", self.shape, self.c)
    }
}

impl Taylor {
    pub fn constant(shape: &'static Shape, value: f64) -> Taylor {
        let mut c = vec![0.0; shape.len()];
        c[0] = value;
        Taylor { shape, c }
    }

    /// The coordinate function `var` expanded at `value`.
    pub fn variable(shape: &'static Shape, var: usize, value: f64) -> Taylor {
        let mut t = Taylor::constant(shape, value);
        if shape.active[var] && shape.order >= 1 {
            let mut e = [0u8; 4];
            e[var] = 1;
            let idx = shape.lookup[&e];
            t.c[idx] = 1.0;
        }
        t
    }

    /// Build from raw Taylor coefficients in the shape's monomial order.
    pub fn from_coefficients(shape: &'static Shape, c: Vec<f64>) -> Taylor {
        assert_eq!(c.len(), shape.len(), "coefficient count does not match shape");
        Taylor { shape, c }
    }

    pub fn shape(&self) -> &'static Shape {
        self.shape
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of the monomial with exponents `exps` (zero if absent).
    pub fn coef(&self, exps: [u8; 4]) -> f64 {
        self.shape.index_of(exps).map_or(0.0, |i| self.c[i])
    }

    /// Mixed partial derivative `∂^exps f` at the expansion point.
    pub fn partial(&self, exps: [u8; 4]) -> f64 {
        let fact: f64 = exps.iter().map(|&k| factorial(k as usize)).product();
        self.coef(exps) * fact
    }

    /// First partial derivative at the expansion point.
    pub fn d1(&self, var: usize) -> f64 {
        let mut e = [0u8; 4];
        e[var] = 1;
        self.coef(e)
    }

    /// Second partial derivative at the expansion point.
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        let mut e = [0u8; 4];
        e[a] += 1;
        e[b] += 1;
        self.partial(e)
    }

    /// The derivative polynomial `∂f/∂var`; its top-degree coefficients vanish.
    pub fn deriv(&self, var: usize) -> Taylor {
        let mut out = vec![0.0; self.c.len()];
        for &(src, dst, k) in &self.shape.deriv[var] {
            out[dst as usize] += k * self.c[src as usize];
        }
        Taylor {
            shape: self.shape,
            c: out,
        }
    }

    /// Multiply the homogeneous part of each degree `d` by `scale(d)`.
    pub fn scale_by_degree(&self, scale: impl Fn(usize) -> f64) -> Taylor {
        let c = self
            .c
            .iter()
            .zip(&self.shape.degree)
            .map(|(v, &d)| v * scale(d as usize))
            .collect();
        Taylor {
            shape: self.shape,
            c,
        }
    }

    fn same_shape(&self, other: &Taylor) {
        debug_assert!(
            std::ptr::eq(self.shape, other.shape),
            "Taylor operands live on different shapes"
        );
    }

    fn mul_ref(&self, other: &Taylor) -> Taylor {
        self.same_shape(other);
        let mut out = vec![0.0; self.c.len()];
        let a = &self.c;
        let b = &other.c;
        for &(i, j, k) in &self.shape.triplets {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
        Taylor {
            shape: self.shape,
            c: out,
        }
    }

    /// Evaluate `sum_k coeffs[k] * (self - self.value())^k`, i.e. compose a
    /// univariate function given by its Taylor coefficients at `self.value()`.
    pub fn compose(&self, coeffs: &[f64]) -> Taylor {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let n = coeffs.len().min(self.shape.order + 1);
        let mut acc = Taylor::constant(self.shape, coeffs[n - 1]);
        for k in (0..n - 1).rev() {
            acc = acc.mul_ref(&h);
            acc.c[0] += coeffs[k];
        }
        acc
    }

    pub fn recip(&self) -> Taylor {
        let a = self.value();
        let n = self.shape.order + 1;
        let mut d = Vec::with_capacity(n);
        let mut p = 1.0 / a;
        for k in 0..n {
            d.push(if k % 2 == 0 { p } else { -p });
            p /= a;
        }
        self.compose(&d)
    }

    pub fn powf(&self, r: f64) -> Taylor {
        let a = self.value();
        let n = self.shape.order + 1;
        let mut d = Vec::with_capacity(n);
        let mut binom = 1.0;
        for k in 0..n {
            d.push(binom * a.powf(r - k as f64));
            binom *= (r - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Taylor {
        self.powf(0.5)
    }

    pub fn powi(&self, n: i32) -> Taylor {
        if n >= 0 {
            let mut acc = Taylor::constant(self.shape, 1.0);
            for _ in 0..n {
                acc = acc.mul_ref(self);
            }
            acc
        } else {
            self.powi(-n).recip()
        }
    }

    pub fn exp(&self) -> Taylor {
        let a = self.value().exp();
        let n = self.shape.order + 1;
        let d: Vec<f64> = (0..n).map(|k| a / factorial(k)).collect();
        self.compose(&d)
    }

    pub fn ln(&self) -> Taylor {
        let a = self.value();
        let n = self.shape.order + 1;
        let mut d = vec![a.ln()];
        for k in 1..n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Taylor {
        self.trig(0)
    }

    pub fn cos(&self) -> Taylor {
        self.trig(1)
    }

    fn trig(&self, phase: usize) -> Taylor {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let cycle = [s, c, -s, -c];
        let n = self.shape.order + 1;
        let d: Vec<f64> = (0..n).map(|k| cycle[(k + phase) % 4] / factorial(k)).collect();
        self.compose(&d)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Taylor> for &Taylor {
            type Output = Taylor;
            fn $m(self, rhs: &Taylor) -> Taylor {
                let f: fn(&Taylor, &Taylor) -> Taylor = $body;
                f(self, rhs)
            }
        }
        impl $tr<Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: &Taylor) -> Taylor {
                (&self).$m(rhs)
            }
        }
        impl $tr<Taylor> for &Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    a.same_shape(b);
    Taylor {
        shape: a.shape,
        c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect(),
    }
});
binop!(Sub, sub, |a, b| {
    a.same_shape(b);
    Taylor {
        shape: a.shape,
        c: a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect(),
    }
});
binop!(Mul, mul, |a, b| a.mul_ref(b));
binop!(Div, div, |a, b| a.mul_ref(&b.recip()));

macro_rules! scalar_op {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<f64> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: f64) -> Taylor {
                let f: fn(Taylor, f64) -> Taylor = $body;
                f(self, rhs)
            }
        }
        impl $tr<f64> for &Taylor {
            type Output = Taylor;
            fn $m(self, rhs: f64) -> Taylor {
                self.clone().$m(rhs)
            }
        }
    };
}

scalar_op!(Add, add, |mut a, s| {
    a.c[0] += s;
    a
});
scalar_op!(Sub, sub, |mut a, s| {
    a.c[0] -= s;
    a
});
scalar_op!(Mul, mul, |mut a, s| {
    a.c.iter_mut().for_each(|v| *v *= s);
    a
});
scalar_op!(Div, div, |mut a, s| {
    a.c.iter_mut().for_each(|v| *v /= s);
    a
});

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(mut self) -> Taylor {
        self.c.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        -self.clone()
    }
}

/// Scalar abstraction shared by plain `f64` evaluation and Taylor arithmetic.
///
/// Metric evaluators, seed curves and one-forms are written once against this
/// trait and then run either on numbers or on truncated Taylor polynomials.
pub trait Real:
    Clone
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant living in the same space as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, r: f64) -> Self;
}

impl Real for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn powi(&self, n: i32) -> f64 {
        f64::powi(*self, n)
    }
    fn powf(&self, r: f64) -> f64 {
        f64::powf(*self, r)
    }
}

impl Real for Taylor {
    fn lift(&self, c: f64) -> Taylor {
        Taylor::constant(self.shape, c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sqrt(&self) -> Taylor {
        Taylor::sqrt(self)
    }
    fn sin(&self) -> Taylor {
        Taylor::sin(self)
    }
    fn cos(&self) -> Taylor {
        Taylor::cos(self)
    }
    fn exp(&self) -> Taylor {
        Taylor::exp(self)
    }
    fn ln(&self) -> Taylor {
        Taylor::ln(self)
    }
    fn powi(&self, n: i32) -> Taylor {
        Taylor::powi(self, n)
    }
    fn powf(&self, r: f64) -> Taylor {
        Taylor::powf(self, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(order: usize, at: [f64; 4]) -> [Taylor; 4] {
        let s = Shape::full(order);
        std::array::from_fn(|i| Taylor::variable(s, i, at[i]))
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(Shape::full(5).len(), 126);
        assert_eq!(Shape::fiber(3).len(), 10);
        assert_eq!(Shape::base(2).len(), 6);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x1^2 y1^3 + 3 x2 y2 - y1 y2^4
        let [x1, x2, y1, y2] = vars(5, [0.3, -0.7, 1.1, 0.4]);
        let f = &x1 * &x1 * y1.powi(3) + &x2 * &y2 * 3.0 - &y1 * y2.powi(4);
        let (a, b, c, d) = (0.3f64, -0.7f64, 1.1f64, 0.4f64);
        assert!((f.value() - (a * a * c.powi(3) + 3.0 * b * d - c * d.powi(4))).abs() < 1e-14);
        assert!((f.partial([2, 0, 3, 0]) - 12.0).abs() < 1e-12);
        assert!((f.partial([0, 0, 1, 4]) + 24.0).abs() < 1e-12);
        assert!((f.partial([1, 0, 2, 0]) - 2.0 * a * 6.0 * c).abs() < 1e-12);
        assert!((f.d1(Y2) - (3.0 * b - 4.0 * c * d.powi(3))).abs() < 1e-12);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let s = Shape::full(4);
        let t = Taylor::variable(s, Y1, 0.8);
        // d^k/dt^k sqrt(t) at 0.8
        let r = t.sqrt();
        let a: f64 = 0.8;
        assert!((r.partial([0, 0, 1, 0]) - 0.5 * a.powf(-0.5)).abs() < 1e-13);
        assert!((r.partial([0, 0, 3, 0]) - 0.375 * a.powf(-2.5)).abs() < 1e-12);
        let e = t.exp();
        assert!((e.partial([0, 0, 4, 0]) - a.exp()).abs() < 1e-12);
        let sn = t.sin();
        assert!((sn.partial([0, 0, 3, 0]) + a.cos()).abs() < 1e-12);
        let l = t.ln();
        assert!((l.partial([0, 0, 2, 0]) + 1.0 / (a * a)).abs() < 1e-12);
        let q = (&t * &t + 1.0).recip();
        assert!((q.d1(Y1) + 2.0 * a / (a * a + 1.0).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn derivative_shifts_coefficients() {
        let [x1, _, y1, _] = vars(3, [0.0, 0.0, 2.0, 0.0]);
        let f = &x1 * &y1 * &y1;
        let dy = f.deriv(Y1);
        assert!((dy.value() - 0.0).abs() < 1e-15);
        assert!((dy.d1(X1) - 4.0).abs() < 1e-14);
        let dx = f.deriv(X1);
        assert!((dx.value() - 4.0).abs() < 1e-14);
        assert!((dx.d1(Y1) - 4.0).abs() < 1e-14);
    }
}
