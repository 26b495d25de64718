//! Base-point fields (Riemannian metrics, one-forms) and their
//! finite-difference jets.

use std::sync::Arc;

use crate::engine::Engine;
use crate::error::{FslError, Result};
use crate::indicatrix::averaged_metric_polar;
use crate::linalg::{inv2, Mat2, Tensor3};
use crate::metric::MetricField;
use crate::plane::OneFormField;

/// A Riemannian metric on the chart.
pub trait GammaField: Send + Sync {
    fn gamma(&self, p: [f64; 2]) -> Result<Mat2>;
}

impl<F> GammaField for F
where
    F: Fn([f64; 2]) -> Result<Mat2> + Send + Sync,
{
    fn gamma(&self, p: [f64; 2]) -> Result<Mat2> {
        self(p)
    }
}

/// A one-form on the chart.
pub trait OneForm: Send + Sync {
    fn rho(&self, p: [f64; 2]) -> Result<[f64; 2]>;
}

impl<F> OneForm for F
where
    F: Fn([f64; 2]) -> Result<[f64; 2]> + Send + Sync,
{
    fn rho(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        self(p)
    }
}

impl OneForm for OneFormField {
    fn rho(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.eval(p))
    }
}

/// The averaged metric of a Finsler metric, computed pointwise by polar
/// quadrature over the fiber.
#[derive(Clone)]
pub struct AveragedGamma {
    pub metric: Arc<dyn MetricField>,
    pub engine: Engine,
    pub nodes: usize,
}

impl AveragedGamma {
    pub fn new(metric: Arc<dyn MetricField>, engine: Engine) -> AveragedGamma {
        AveragedGamma {
            metric,
            engine,
            nodes: 256,
        }
    }
}

impl GammaField for AveragedGamma {
    fn gamma(&self, p: [f64; 2]) -> Result<Mat2> {
        Ok(averaged_metric_polar(self.metric.as_ref(), p, self.nodes, &self.engine)?.0)
    }
}

/// Value, gradient and Hessian of a vector-valued field at one point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub v: Vec<f64>,
    pub d: [Vec<f64>; 2],
    pub dd: [[Vec<f64>; 2]; 2],
}

/// Central differences with step `h`, Richardson-combined with `h/2`.
/// `second` also fills the Hessian (17 evaluations instead of 9).
pub fn fd_jet(
    f: &dyn Fn([f64; 2]) -> Result<Vec<f64>>,
    p: [f64; 2],
    h: f64,
    second: bool,
) -> Result<Jet> {
    let at = |a: f64, b: f64| f([p[0] + a, p[1] + b]);
    let v = f(p)?;
    let n = v.len();
    let comb = |coarse: Vec<f64>, fine: Vec<f64>| -> Vec<f64> {
        coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    };
    let lin = |terms: &[(f64, &Vec<f64>)], scale: f64| -> Vec<f64> {
        (0..n)
            .map(|k| terms.iter().map(|(c, x)| c * x[k]).sum::<f64>() * scale)
            .collect()
    };
    let mut d = [vec![0.0; n], vec![0.0; n]];
    let mut dd = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
    for a in 0..2 {
        let e = |s: f64| if a == 0 { (s, 0.0) } else { (0.0, s) };
        let (x1, y1) = e(h);
        let (x2, y2) = e(h / 2.0);
        let p1 = at(x1, y1)?;
        let m1 = at(-x1, -y1)?;
        let p2 = at(x2, y2)?;
        let m2 = at(-x2, -y2)?;
        d[a] = comb(
            lin(&[(1.0, &p1), (-1.0, &m1)], 0.5 / h),
            lin(&[(1.0, &p2), (-1.0, &m2)], 1.0 / h),
        );
        if second {
            dd[a][a] = comb(
                lin(&[(1.0, &p1), (-2.0, &v), (1.0, &m1)], 1.0 / (h * h)),
                lin(&[(1.0, &p2), (-2.0, &v), (1.0, &m2)], 4.0 / (h * h)),
            );
        }
    }
    if second {
        let mixed = |s: f64| -> Result<Vec<f64>> {
            let pp = at(s, s)?;
            let pm = at(s, -s)?;
            let mp = at(-s, s)?;
            let mm = at(-s, -s)?;
            Ok(lin(&[(1.0, &pp), (-1.0, &pm), (-1.0, &mp), (1.0, &mm)], 0.25 / (s * s)))
        };
        let m12 = comb(mixed(h)?, mixed(h / 2.0)?);
        dd[0][1] = m12.clone();
        dd[1][0] = m12;
    }
    Ok(Jet { v, d, dd })
}

fn flat(m: &Mat2) -> Vec<f64> {
    vec![m[0][0], m[0][1], m[1][0], m[1][1]]
}

fn unflat(v: &[f64]) -> Mat2 {
    [[v[0], 0.5 * (v[1] + v[2])], [0.5 * (v[1] + v[2]), v[3]]]
}

/// Second-order jet of a Riemannian metric and everything derived from it.
#[derive(Debug, Clone)]
pub struct MetricFieldJet {
    pub gamma: Mat2,
    pub inv: Mat2,
    /// `d[a] = ∂_a γ`.
    pub d: [Mat2; 2],
    /// `dd[a][b] = ∂_a ∂_b γ`.
    pub dd: [[Mat2; 2]; 2],
}

impl MetricFieldJet {
    pub fn new(field: &dyn GammaField, p: [f64; 2], h: f64, second: bool) -> Result<MetricFieldJet> {
        let j = fd_jet(&|q| Ok(flat(&field.gamma(q)?)), p, h, second)?;
        let gamma = unflat(&j.v);
        let inv = inv2(&gamma)
            .filter(|_| gamma[0][0] > 0.0 && gamma[0][0] * gamma[1][1] > gamma[0][1] * gamma[0][1])
            .ok_or(FslError::SingularAveragedMetric(p[0], p[1]))?;
        Ok(MetricFieldJet {
            gamma,
            inv,
            d: [unflat(&j.d[0]), unflat(&j.d[1])],
            dd: [
                [unflat(&j.dd[0][0]), unflat(&j.dd[0][1])],
                [unflat(&j.dd[1][0]), unflat(&j.dd[1][1])],
            ],
        })
    }

    /// `∂_a γ^{kl} = −γ^{km} ∂_a γ_mn γ^{nl}`.
    pub fn d_inv(&self, a: usize) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                let mut s = 0.0;
                for m in 0..2 {
                    for n in 0..2 {
                        s -= self.inv[k][m] * self.d[a][m][n] * self.inv[n][l];
                    }
                }
                out[k][l] = s;
            }
        }
        out
    }

    /// Christoffel symbols `Γ*^k_ij` as `[k][i][j]`.
    pub fn christoffel(&self) -> Tensor3 {
        let mut c = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    c[k][i][j] = 0.5
                        * (0..2)
                            .map(|l| {
                                self.inv[k][l] * (self.d[i][j][l] + self.d[j][i][l] - self.d[l][i][j])
                            })
                            .sum::<f64>();
                }
            }
        }
        c
    }

    /// `∂_m Γ*^k_ij` as `[m][k][i][j]`.
    pub fn christoffel_derivative(&self) -> [Tensor3; 2] {
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for (m, om) in out.iter_mut().enumerate() {
            let dinv = self.d_inv(m);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut s = 0.0;
                        for l in 0..2 {
                            let first = self.d[i][j][l] + self.d[j][i][l] - self.d[l][i][j];
                            let second = self.dd[m][i][j][l] + self.dd[m][j][i][l] - self.dd[m][l][i][j];
                            s += dinv[k][l] * first + self.inv[k][l] * second;
                        }
                        om[k][i][j] = 0.5 * s;
                    }
                }
            }
        }
        out
    }
}

/// `R^l_kij = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_imΓ^m_jk − Γ^l_jmΓ^m_ik`, stored as
/// `[l][k][i][j]`, for coefficients `Γ[l][i][j]` and their derivatives
/// `dg[a][l][i][j] = ∂_a Γ^l_ij`.
pub fn riemann_tensor(g: &Tensor3, dg: &[Tensor3; 2]) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut r = [[[[0.0; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = dg[i][l][j][k] - dg[j][l][i][k];
                    for m in 0..2 {
                        s += g[l][i][m] * g[m][j][k] - g[l][j][m] * g[m][i][k];
                    }
                    r[l][k][i][j] = s;
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_of_a_polynomial() {
        let f = |p: [f64; 2]| Ok(vec![p[0] * p[0] * p[1] + 3.0 * p[1].powi(3)]);
        let j = fd_jet(&f, [0.5, -1.0], 1e-2, true).unwrap();
        assert!((j.d[0][0] - 2.0 * 0.5 * -1.0).abs() < 1e-10);
        assert!((j.d[1][0] - (0.25 + 9.0)).abs() < 1e-10);
        assert!((j.dd[0][1][0] - 1.0).abs() < 1e-9);
        assert!((j.dd[1][1][0] - 18.0 * -1.0).abs() < 1e-9);
    }

    #[test]
    fn polar_christoffel_symbols() {
        // γ = diag(1, r²) in coordinates (r, φ): Γ^r_φφ = −r, Γ^φ_rφ = 1/r
        let g = |p: [f64; 2]| Ok([[1.0, 0.0], [0.0, p[0] * p[0]]]);
        let j = MetricFieldJet::new(&g, [2.0, 0.3], 1e-2, true).unwrap();
        let c = j.christoffel();
        assert!((c[0][1][1] + 2.0).abs() < 1e-10);
        assert!((c[1][0][1] - 0.5).abs() < 1e-10 && (c[1][1][0] - 0.5).abs() < 1e-10);
        // flat: the Riemann tensor vanishes
        let r = riemann_tensor(&c, &j.christoffel_derivative());
        assert!(r.iter().flatten().flatten().flatten().all(|x| x.abs() < 1e-8));
    }
}
