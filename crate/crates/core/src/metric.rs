//! Finsler fundamental functions on a planar chart, presets and the axiom
//! validator.

use std::sync::Arc;

use serde::Serialize;

use crate::engine::Engine;
use crate::error::{FslError, Result};
use crate::expr::Expr;
use crate::linalg::sym_eigenvalues;
use crate::taylor::{Real, Shape, Taylor};

/// A fundamental function `F(p, v)` on `U × R²`.
///
/// `eval` is the plain evaluator. Metrics that can be written in closed form
/// (or solved by an iteration that is itself differentiable) also provide
/// `eval_taylor`, which receives the four coordinate polynomials
/// `[u1, u2, y1, y2]` and returns the Taylor expansion of `F`. Metrics that
/// return `None` are differentiated by finite differences.
pub trait MetricField: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64;

    fn eval_taylor(&self, _vars: &[Taylor; 4]) -> Option<Taylor> {
        None
    }

    /// True when `F` does not depend on the position (locally Minkowski).
    fn is_x_independent(&self) -> bool {
        false
    }
}

/// `F = sqrt(y1² + y2²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Euclidean {
    fn generic<R: Real>(&self, x: &[R; 4]) -> R {
        (x[2].clone() * x[2].clone() + x[3].clone() * x[3].clone()).sqrt()
    }
}

impl MetricField for Euclidean {
    fn name(&self) -> String {
        "euclidean".into()
    }
    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64 {
        self.generic(&[p[0], p[1], v[0], v[1]])
    }
    fn eval_taylor(&self, vars: &[Taylor; 4]) -> Option<Taylor> {
        Some(self.generic(vars))
    }
    fn is_x_independent(&self) -> bool {
        true
    }
}

/// The drift one-form of a Randers metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftForm {
    Constant([f64; 2]),
    /// `b = (k·u2, 0)`.
    Shear(f64),
}

/// Randers metric `F = |y| + b_i(u) y^i` over the Euclidean plane.
#[derive(Debug, Clone, Copy)]
pub struct Randers {
    pub drift: DriftForm,
}

impl Randers {
    pub fn constant(b1: f64, b2: f64) -> Randers {
        Randers {
            drift: DriftForm::Constant([b1, b2]),
        }
    }

    pub fn shear(k: f64) -> Randers {
        Randers {
            drift: DriftForm::Shear(k),
        }
    }

    fn generic<R: Real>(&self, x: &[R; 4]) -> R {
        let norm = (x[2].clone() * x[2].clone() + x[3].clone() * x[3].clone()).sqrt();
        match self.drift {
            DriftForm::Constant([b1, b2]) => norm + x[2].clone() * b1 + x[3].clone() * b2,
            DriftForm::Shear(k) => norm + x[1].clone() * x[2].clone() * k,
        }
    }
}

impl MetricField for Randers {
    fn name(&self) -> String {
        match self.drift {
            DriftForm::Constant([b1, b2]) => format!("randers:{b1},{b2}"),
            DriftForm::Shear(k) => format!("randers-shear:{k}"),
        }
    }
    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64 {
        self.generic(&[p[0], p[1], v[0], v[1]])
    }
    fn eval_taylor(&self, vars: &[Taylor; 4]) -> Option<Taylor> {
        Some(self.generic(vars))
    }
    fn is_x_independent(&self) -> bool {
        matches!(self.drift, DriftForm::Constant(_))
    }
}

/// A metric given by an expression in `u1, u2, y1, y2`.
#[derive(Debug, Clone)]
pub struct ExprMetric {
    expr: Expr,
}

impl ExprMetric {
    pub fn new(expr: Expr) -> ExprMetric {
        ExprMetric { expr }
    }

    pub fn parse(src: &str) -> Result<ExprMetric> {
        Ok(ExprMetric::new(Expr::parse(src)?))
    }
}

impl MetricField for ExprMetric {
    fn name(&self) -> String {
        format!("expr:{}", self.expr.source())
    }
    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64 {
        self.expr.eval(&[p[0], p[1], v[0], v[1]])
    }
    fn eval_taylor(&self, vars: &[Taylor; 4]) -> Option<Taylor> {
        Some(self.expr.eval(vars))
    }
    fn is_x_independent(&self) -> bool {
        !self.expr.uses_var(0) && !self.expr.uses_var(1)
    }
}

/// Wraps another metric and hides its Taylor evaluator, forcing finite
/// differences. Handy for cross-checking the two engines.
pub struct BlackBox(pub Arc<dyn MetricField>);

impl MetricField for BlackBox {
    fn name(&self) -> String {
        format!("blackbox({})", self.0.name())
    }
    fn eval(&self, p: [f64; 2], v: [f64; 2]) -> f64 {
        self.0.eval(p, v)
    }
    fn is_x_independent(&self) -> bool {
        self.0.is_x_independent()
    }
}

/// Resolve a preset name such as `euclidean`, `randers:0.3,0`,
/// `randers-shear:0.3`, `plane:trifocal-rot` or `expr:<F>`.
pub fn preset(spec: &str) -> Result<Arc<dyn MetricField>> {
    let spec = spec.trim();
    let (head, args) = match spec.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (spec, None),
    };
    let nums = |a: Option<&str>, n: usize| -> Result<Vec<f64>> {
        let a = a.ok_or_else(|| FslError::InvalidArgument(format!("`{spec}` needs parameters")))?;
        let v: std::result::Result<Vec<f64>, _> = a.split(',').map(|s| s.trim().parse()).collect();
        let v = v.map_err(|_| FslError::InvalidArgument(format!("bad parameters in `{spec}`")))?;
        if v.len() != n {
            return Err(FslError::InvalidArgument(format!(
                "`{spec}` expects {n} parameter(s), got {}",
                v.len()
            )));
        }
        Ok(v)
    };
    match head {
        "euclidean" if args.is_none() => Ok(Arc::new(Euclidean)),
        "randers" => {
            let b = nums(args, 2)?;
            if b[0].hypot(b[1]) >= 1.0 {
                return Err(FslError::InvalidArgument(
                    "Randers drift must satisfy |b| < 1".into(),
                ));
            }
            Ok(Arc::new(Randers::constant(b[0], b[1])))
        }
        "randers-shear" => {
            let k = nums(args, 1)?;
            Ok(Arc::new(Randers::shear(k[0])))
        }
        "plane" => {
            let id = args.unwrap_or("");
            Ok(Arc::new(crate::plane::construction(id)?))
        }
        "expr" => Ok(Arc::new(ExprMetric::parse(args.unwrap_or(""))?)),
        _ => Err(FslError::InvalidArgument(format!("unknown metric preset `{spec}`"))),
    }
}

/// Worst-case violations of the Finsler axioms over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    /// max |F(p, t v) − t F(p, v)| for t in {0.5, 2}.
    pub homogeneity_residual: f64,
    pub min_value: f64,
    /// Smallest eigenvalue of the fiber Hessian of `E = F²/2`, normalized by
    /// the largest one at the same sample.
    pub min_hessian_eigenvalue: f64,
    pub f2_violations: usize,
    pub positivity_violations: usize,
    pub f3_violations: usize,
    pub passes: bool,
}

/// Check homogeneity, positivity and strong convexity on the samples.
pub fn validate_metric(
    m: &dyn MetricField,
    samples: &[([f64; 2], [f64; 2])],
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(FslError::InvalidArgument("no samples to validate".into()));
    }
    let engine = Engine::Dual;
    let mut hom = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let (mut f2, mut pos, mut f3) = (0, 0, 0);
    for &(p, v) in samples {
        if v[0].hypot(v[1]) < 1e-12 {
            return Err(FslError::DegenerateFiber(v[0], v[1]));
        }
        let f = m.eval(p, v);
        let check = |x: f64| -> Result<f64> {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(non_smooth(m, p, v))
            }
        };
        let f = check(f)?;
        let mut local = 0.0f64;
        for t in [0.5, 2.0] {
            let ft = check(m.eval(p, [t * v[0], t * v[1]]))?;
            local = local.max((ft - t * f).abs());
        }
        if local > 1e-9 * (1.0 + f.abs()) {
            f2 += 1;
        }
        hom = hom.max(local);
        min_value = min_value.min(f);
        if f <= 0.0 {
            pos += 1;
        }
        let ft = engine.expand(m, p, v, Shape::fiber(2))?;
        let e = &ft * &ft * 0.5;
        let g = [
            [e.d2(2, 2), e.d2(2, 3)],
            [e.d2(3, 2), e.d2(3, 3)],
        ];
        let ev = sym_eigenvalues(&g);
        let rel = ev[0] / ev[1].abs().max(f64::MIN_POSITIVE);
        if !(rel > 1e-9) {
            f3 += 1;
        }
        min_eig = min_eig.min(rel);
    }
    Ok(ValidationReport {
        samples: samples.len(),
        homogeneity_residual: hom,
        min_value,
        min_hessian_eigenvalue: min_eig,
        f2_violations: f2,
        positivity_violations: pos,
        f3_violations: f3,
        passes: f2 == 0 && pos == 0 && f3 == 0,
    })
}

pub(crate) fn non_smooth(m: &dyn MetricField, p: [f64; 2], v: [f64; 2]) -> FslError {
    FslError::NonSmoothEvaluation {
        metric: m.name(),
        u1: p[0],
        u2: p[1],
        y1: v[0],
        y2: v[1],
    }
}

/// Deterministic sample set: a small grid of base points times a ring of
/// fiber directions with varying lengths.
pub fn standard_samples(center: [f64; 2], radius: f64, count: usize) -> Vec<([f64; 2], [f64; 2])> {
    (0..count)
        .map(|k| {
            let a = k as f64 * 2.399_963_229_728_653; // golden angle
            let r = radius * ((k as f64 + 0.5) / count as f64).sqrt();
            let p = [center[0] + r * a.cos(), center[1] + r * a.sin()];
            let b = 0.37 + 1.7 * k as f64;
            let len = 0.5 + 1.5 * ((k * 7 % 11) as f64 / 10.0);
            (p, [len * b.cos(), len * b.sin()])
        })
        .collect()
}
