//! Quadrature rules and spectral tools for periodic samples.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::taylor::Real;

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitGauss {
    pairs: Vec<(f64, f64)>,
}

impl UnitGauss {
    pub fn new(points: usize) -> UnitGauss {
        let n = NonZeroUsize::new(points.max(1)).expect("nonzero");
        let rule = GaussLegendre::new(n);
        let pairs = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        UnitGauss { pairs }
    }

    /// `∫_0^1 f(s) ds` for any scalar type.
    pub fn integrate<R: Real>(&self, zero: &R, mut f: impl FnMut(f64) -> R) -> R {
        let mut acc = zero.lift(0.0);
        for &(s, w) in &self.pairs {
            acc = acc + f(s) * w;
        }
        acc
    }
}

/// Composite Simpson weights for `n` uniform intervals of width `h`
/// (`n` even, `n + 1` nodes).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson's rule needs an even interval count");
    (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Trigonometric interpolant of uniformly sampled periodic data.
///
/// `y(t) = mean + Σ_m a_m cos(mωt) + b_m sin(mωt)` with `ω = 2π / period`.
/// Derivatives and the running integral `∫_0^t y` are exact for the
/// interpolant, which converges spectrally for smooth periodic data.
#[derive(Debug, Clone)]
pub struct PeriodicSeries {
    period: f64,
    mean: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PeriodicSeries {
    /// `samples[k] = y(k · period / n)` for `k` in `0..n`.
    pub fn from_samples(samples: &[f64], period: f64) -> PeriodicSeries {
        let n = samples.len();
        assert!(n >= 2, "need at least two samples");
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&y| Complex::new(y, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let nf = n as f64;
        let top = n / 2;
        let mut a = Vec::with_capacity(top);
        let mut b = Vec::with_capacity(top);
        for (m, c) in buf.iter().enumerate().take(top + 1).skip(1) {
            if n.is_multiple_of(2) && m == top {
                a.push(c.re / nf);
                b.push(0.0);
            } else {
                a.push(2.0 * c.re / nf);
                b.push(-2.0 * c.im / nf);
            }
        }
        PeriodicSeries {
            period,
            mean: buf[0].re / nf,
            a,
            b,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Runs `f(m, cos mωt, sin mωt)` for the harmonics `m = 1, 2, …`.
    fn harmonics(&self, t: f64, mut f: impl FnMut(usize, f64, f64)) {
        let (s1, c1) = (self.omega() * t).sin_cos();
        let (mut c, mut s) = (c1, s1);
        for m in 1..=self.a.len() {
            f(m, c, s);
            // refresh from libm every 32 steps to bound recurrence drift
            if m % 32 == 31 {
                let (sn, cn) = (self.omega() * t * (m + 1) as f64).sin_cos();
                c = cn;
                s = sn;
            } else {
                let cn = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = cn;
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut acc = self.mean;
        self.harmonics(t, |m, c, s| acc += self.a[m - 1] * c + self.b[m - 1] * s);
        acc
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let w = self.omega();
        let mut acc = 0.0;
        self.harmonics(t, |m, c, s| {
            let k = w * m as f64;
            acc += k * (self.b[m - 1] * c - self.a[m - 1] * s);
        });
        acc
    }

    /// `∫_0^t y(θ) dθ`.
    pub fn integral(&self, t: f64) -> f64 {
        let w = self.omega();
        let mut acc = self.mean * t;
        self.harmonics(t, |m, c, s| {
            let k = w * m as f64;
            acc += (self.a[m - 1] * s + self.b[m - 1] * (1.0 - c)) / k;
        });
        acc
    }

    /// Shift the origin: the returned series satisfies `y'(t) = y(t + shift)`.
    pub fn shifted(&self, shift: f64) -> PeriodicSeries {
        let mut out = self.clone();
        let w = self.omega();
        for m in 1..=self.a.len() {
            let (s, c) = (w * m as f64 * shift).sin_cos();
            let (a, b) = (self.a[m - 1], self.b[m - 1]);
            out.a[m - 1] = a * c + b * s;
            out.b[m - 1] = b * c - a * s;
        }
        out
    }
}
