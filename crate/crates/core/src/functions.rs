//! `C^{1,2}` functions `f(a, x)` with analytic derivatives, a small built-in
//! library addressable from configs, and finite-difference validation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `f: R^m x R^d -> R`, once differentiable in `a` and twice in `x`.
///
/// Implementations must be re-entrant; `eval` and friends are called from
/// several threads.
pub trait C12Function: Send + Sync + fmt::Debug {
    /// Dimension `m` of the finite-variation argument.
    fn fv_dim(&self) -> usize;
    /// Dimension `d` of the quadratic-variation argument.
    fn qv_dim(&self) -> usize;
    fn eval(&self, a: &[f64], x: &[f64]) -> f64;
    fn grad_a(&self, a: &[f64], x: &[f64]) -> Vec<f64>;
    fn grad_x(&self, a: &[f64], x: &[f64]) -> Vec<f64>;
    /// Row-major `d x d` Hessian in `x`.
    fn hess_x(&self, a: &[f64], x: &[f64]) -> Vec<f64>;
    fn in_domain(&self, _a: &[f64], _x: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `sum_k coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `exp(<c, x> + <b, a>)`.
    ExpAffine {
        c: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
    },
    /// `log x` on `x > 0`.
    Log,
    /// `x1 x2`.
    Product,
    /// `a x` with scalar `a` and `x`.
    MixedProduct,
    /// `x^p` on `x > 0`.
    Power { p: f64 },
    /// `outer(inner(a, x))`; `outer` must be a scalar function of `x` only.
    Compose {
        outer: Box<FunctionSpec>,
        inner: Box<FunctionSpec>,
    },
}

impl FunctionSpec {
    pub fn x_squared() -> Self {
        FunctionSpec::Polynomial {
            coeffs: vec![0.0, 0.0, 1.0],
        }
    }

    pub fn exp() -> Self {
        FunctionSpec::ExpAffine {
            c: vec![1.0],
            b: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter("polynomial coefficients".into()));
                }
            }
            FunctionSpec::ExpAffine { c, b } => {
                if c.is_empty() || c.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("exp-affine needs finite, nonempty c".into()));
                }
            }
            FunctionSpec::Power { p } => {
                if !p.is_finite() {
                    return Err(Error::InvalidParameter(format!("power exponent {p}")));
                }
            }
            FunctionSpec::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                if outer.fv_dim() != 0 || outer.qv_dim() != 1 {
                    return Err(Error::InvalidParameter(
                        "outer function of a composition must be scalar in x".into(),
                    ));
                }
            }
            FunctionSpec::Log | FunctionSpec::Product | FunctionSpec::MixedProduct => {}
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn C12Function>> {
        self.validate()?;
        Ok(Arc::new(self.clone()))
    }

    /// Value and first two derivatives of a scalar function of `x` alone.
    fn scalar_jet(&self, x: f64) -> (f64, f64, f64) {
        match self {
            FunctionSpec::Polynomial { coeffs } => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    d2 = d2 * x + 2.0 * d1;
                    d1 = d1 * x + v;
                    v = v * x + c;
                }
                (v, d1, d2)
            }
            FunctionSpec::ExpAffine { c, .. } => {
                let e = (c[0] * x).exp();
                (e, c[0] * e, c[0] * c[0] * e)
            }
            FunctionSpec::Log => (x.ln(), 1.0 / x, -1.0 / (x * x)),
            FunctionSpec::Power { p } => {
                let v = x.powf(*p);
                (v, p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
            }
            FunctionSpec::Compose { outer, inner } => {
                let (g, g1, g2) = inner.scalar_jet(x);
                let (f, f1, f2) = outer.scalar_jet(g);
                (f, f1 * g1, f2 * g1 * g1 + f1 * g2)
            }
            FunctionSpec::Product | FunctionSpec::MixedProduct => {
                unreachable!("not a scalar function of x")
            }
        }
    }

    fn is_scalar_x(&self) -> bool {
        self.fv_dim() == 0 && self.qv_dim() == 1
    }
}

impl C12Function for FunctionSpec {
    fn fv_dim(&self) -> usize {
        match self {
            FunctionSpec::ExpAffine { b, .. } => b.len(),
            FunctionSpec::MixedProduct => 1,
            FunctionSpec::Compose { inner, .. } => inner.fv_dim(),
            _ => 0,
        }
    }

    fn qv_dim(&self) -> usize {
        match self {
            FunctionSpec::ExpAffine { c, .. } => c.len(),
            FunctionSpec::Product => 2,
            FunctionSpec::Compose { inner, .. } => inner.qv_dim(),
            _ => 1,
        }
    }

    fn eval(&self, a: &[f64], x: &[f64]) -> f64 {
        match self {
            FunctionSpec::ExpAffine { c, b } => (dot(c, x) + dot(b, a)).exp(),
            FunctionSpec::Product => x[0] * x[1],
            FunctionSpec::MixedProduct => a[0] * x[0],
            FunctionSpec::Compose { outer, inner } => {
                outer.scalar_jet(inner.eval(a, x)).0
            }
            s => s.scalar_jet(x[0]).0,
        }
    }

    fn grad_a(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            FunctionSpec::ExpAffine { b, .. } => {
                let e = self.eval(a, x);
                b.iter().map(|bk| bk * e).collect()
            }
            FunctionSpec::MixedProduct => vec![x[0]],
            FunctionSpec::Compose { outer, inner } => {
                let (_, f1, _) = outer.scalar_jet(inner.eval(a, x));
                inner.grad_a(a, x).into_iter().map(|g| f1 * g).collect()
            }
            _ => vec![],
        }
    }

    fn grad_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            FunctionSpec::ExpAffine { c, .. } => {
                let e = self.eval(a, x);
                c.iter().map(|ck| ck * e).collect()
            }
            FunctionSpec::Product => vec![x[1], x[0]],
            FunctionSpec::MixedProduct => vec![a[0]],
            FunctionSpec::Compose { outer, inner } if !inner.is_scalar_x() => {
                let (_, f1, _) = outer.scalar_jet(inner.eval(a, x));
                inner.grad_x(a, x).into_iter().map(|g| f1 * g).collect()
            }
            s => vec![s.scalar_jet(x[0]).1],
        }
    }

    fn hess_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            FunctionSpec::ExpAffine { c, .. } => {
                let e = self.eval(a, x);
                let d = c.len();
                let mut h = vec![0.0; d * d];
                for k in 0..d {
                    for l in 0..d {
                        h[k * d + l] = c[k] * c[l] * e;
                    }
                }
                h
            }
            FunctionSpec::Product => vec![0.0, 1.0, 1.0, 0.0],
            FunctionSpec::MixedProduct => vec![0.0],
            FunctionSpec::Compose { outer, inner } if !inner.is_scalar_x() => {
                let (_, f1, f2) = outer.scalar_jet(inner.eval(a, x));
                let g = inner.grad_x(a, x);
                let gh = inner.hess_x(a, x);
                let d = g.len();
                let mut h = vec![0.0; d * d];
                for k in 0..d {
                    for l in 0..d {
                        h[k * d + l] = f2 * g[k] * g[l] + f1 * gh[k * d + l];
                    }
                }
                h
            }
            s => vec![s.scalar_jet(x[0]).2],
        }
    }

    fn in_domain(&self, a: &[f64], x: &[f64]) -> bool {
        match self {
            FunctionSpec::Log | FunctionSpec::Power { .. } => x[0] > 0.0,
            FunctionSpec::Compose { outer, inner } => {
                inner.in_domain(a, x) && {
                    let g = inner.eval(a, x);
                    g.is_finite() && outer.in_domain(&[], &[g])
                }
            }
            _ => true,
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

type Scalar = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type Vector = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type Domain = dyn Fn(&[f64], &[f64]) -> bool + Send + Sync;

/// User-supplied function from five closures.
pub struct CustomFunction {
    pub fv_dim: usize,
    pub qv_dim: usize,
    pub eval: Box<Scalar>,
    pub grad_a: Box<Vector>,
    pub grad_x: Box<Vector>,
    pub hess_x: Box<Vector>,
    pub domain: Box<Domain>,
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFunction")
            .field("fv_dim", &self.fv_dim)
            .field("qv_dim", &self.qv_dim)
            .finish_non_exhaustive()
    }
}

impl C12Function for CustomFunction {
    fn fv_dim(&self) -> usize {
        self.fv_dim
    }
    fn qv_dim(&self) -> usize {
        self.qv_dim
    }
    fn eval(&self, a: &[f64], x: &[f64]) -> f64 {
        (self.eval)(a, x)
    }
    fn grad_a(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        (self.grad_a)(a, x)
    }
    fn grad_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        (self.grad_x)(a, x)
    }
    fn hess_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        (self.hess_x)(a, x)
    }
    fn in_domain(&self, a: &[f64], x: &[f64]) -> bool {
        (self.domain)(a, x)
    }
}

fn step_for(v: f64) -> f64 {
    1e-5 * v.abs().max(1.0)
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-5 * (1.0 + analytic.abs())
}

/// Compares analytic derivatives with central differences at `(a, x)`.
/// Coordinates whose stencil leaves the domain are skipped.
pub fn check_derivatives(f: &dyn C12Function, a: &[f64], x: &[f64]) -> Result<()> {
    let (m, d) = (f.fv_dim(), f.qv_dim());
    if a.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: a.len(),
        });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let ga = f.grad_a(a, x);
    let gx = f.grad_x(a, x);
    let hx = f.hess_x(a, x);
    if ga.len() != m || gx.len() != d || hx.len() != d * d {
        return Err(Error::InvalidParameter("derivative has the wrong length".into()));
    }

    for k in 0..m {
        let h = step_for(a[k]);
        let (mut up, mut dn) = (a.to_vec(), a.to_vec());
        up[k] += h;
        dn[k] -= h;
        if !(f.in_domain(&up, x) && f.in_domain(&dn, x)) {
            continue;
        }
        let num = (f.eval(&up, x) - f.eval(&dn, x)) / (2.0 * h);
        if !close(ga[k], num) {
            return Err(Error::Derivative {
                which: format!("df/da{}", k + 1),
                analytic: ga[k],
                numeric: num,
            });
        }
    }
    for k in 0..d {
        let h = step_for(x[k]);
        let (mut up, mut dn) = (x.to_vec(), x.to_vec());
        up[k] += h;
        dn[k] -= h;
        if !(f.in_domain(a, &up) && f.in_domain(a, &dn)) {
            continue;
        }
        let num = (f.eval(a, &up) - f.eval(a, &dn)) / (2.0 * h);
        if !close(gx[k], num) {
            return Err(Error::Derivative {
                which: format!("df/dx{}", k + 1),
                analytic: gx[k],
                numeric: num,
            });
        }
        let (gu, gd) = (f.grad_x(a, &up), f.grad_x(a, &dn));
        for l in 0..d {
            let num = (gu[l] - gd[l]) / (2.0 * h);
            if !close(hx[k * d + l], num) {
                return Err(Error::Derivative {
                    which: format!("d2f/dx{}dx{}", k + 1, l + 1),
                    analytic: hx[k * d + l],
                    numeric: num,
                });
            }
        }
    }
    for k in 0..d {
        for l in k + 1..d {
            let (u, v) = (hx[k * d + l], hx[l * d + k]);
            if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                return Err(Error::Derivative {
                    which: format!("hessian symmetry ({}, {})", k + 1, l + 1),
                    analytic: u,
                    numeric: v,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_pass_derivative_check() {
        let specs = [
            FunctionSpec::x_squared(),
            FunctionSpec::Polynomial {
                coeffs: vec![1.0, -2.0, 0.5, 0.25],
            },
            FunctionSpec::exp(),
            FunctionSpec::ExpAffine {
                c: vec![0.3, -0.7],
                b: vec![1.1],
            },
            FunctionSpec::Log,
            FunctionSpec::Product,
            FunctionSpec::MixedProduct,
            FunctionSpec::Power { p: 1.5 },
            FunctionSpec::Compose {
                outer: Box::new(FunctionSpec::Log),
                inner: Box::new(FunctionSpec::exp()),
            },
            FunctionSpec::Compose {
                outer: Box::new(FunctionSpec::x_squared()),
                inner: Box::new(FunctionSpec::Product),
            },
        ];
        for s in specs {
            let f = s.build().unwrap();
            let a: Vec<f64> = (0..f.fv_dim()).map(|k| 0.4 + k as f64).collect();
            let x: Vec<f64> = (0..f.qv_dim()).map(|k| 1.3 - 0.2 * k as f64).collect();
            check_derivatives(f.as_ref(), &a, &x).unwrap_or_else(|e| panic!("{s:?}: {e}"));
        }
    }

    #[test]
    fn wrong_derivative_detected() {
        let f = CustomFunction {
            fv_dim: 0,
            qv_dim: 1,
            eval: Box::new(|_, x| x[0] * x[0]),
            grad_a: Box::new(|_, _| vec![]),
            grad_x: Box::new(|_, x| vec![3.0 * x[0]]),
            hess_x: Box::new(|_, _| vec![2.0]),
            domain: Box::new(|_, _| true),
        };
        assert!(matches!(
            check_derivatives(&f, &[], &[1.0]),
            Err(Error::Derivative { .. })
        ));
    }

    #[test]
    fn log_domain() {
        let f = FunctionSpec::Log;
        assert!(f.in_domain(&[], &[0.5]));
        assert!(!f.in_domain(&[], &[0.0]));
    }

    #[test]
    fn compose_outer_must_be_scalar() {
        let bad = FunctionSpec::Compose {
            outer: Box::new(FunctionSpec::Product),
            inner: Box::new(FunctionSpec::Log),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_names() {
        let s: FunctionSpec = serde_json::from_str(r#"{"name":"power","p":2.0}"#).unwrap();
        assert_eq!(s, FunctionSpec::Power { p: 2.0 });
        let s: FunctionSpec = serde_json::from_str(r#"{"name":"mixed-product"}"#).unwrap();
        assert_eq!(s, FunctionSpec::MixedProduct);
    }
}
