//! Second-order forward jets: value, gradient, and Hessian of an expression
//! at a point, propagated exactly through the expression tree.
//!
//! Finite differences never appear here; they exist only as test oracles.

use num_complex::Complex64;
use thiserror::Error;

use super::expr::{Expr, ExprRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of zero")]
    LogOfZero,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("coordinate x{0} out of range for this chart dimension")]
    CoordOutOfRange(usize),
    #[error("path parameter {0} not available in this evaluation context")]
    ParamOutOfRange(usize),
}

/// Evaluation context: how many leading entries of the point are chart
/// coordinates and how many trailing entries are path parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalCtx {
    pub x_dim: usize,
    pub n_params: usize,
}

impl EvalCtx {
    pub fn space(x_dim: usize) -> Self {
        EvalCtx { x_dim, n_params: 0 }
    }

    pub fn with_params(x_dim: usize, n_params: usize) -> Self {
        EvalCtx { x_dim, n_params }
    }

    pub fn ambient(&self) -> usize {
        self.x_dim + self.n_params
    }
}

/// Jet of a smooth function at a point: value, and optionally gradient and
/// Hessian with respect to all ambient variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub dim: usize,
    pub value: Complex64,
    pub grad: Option<Vec<Complex64>>,
    pub hess: Option<Vec<Complex64>>, // dim*dim, row-major, symmetric
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl Jet {
    pub fn order(&self) -> u8 {
        match (&self.grad, &self.hess) {
            (_, Some(_)) => 2,
            (Some(_), None) => 1,
            (None, None) => 0,
        }
    }

    pub fn constant(c: Complex64, dim: usize, order: u8) -> Jet {
        Jet {
            dim,
            value: c,
            grad: (order >= 1).then(|| vec![ZERO; dim]),
            hess: (order >= 2).then(|| vec![ZERO; dim * dim]),
        }
    }

    pub fn variable(value: f64, slot: usize, dim: usize, order: u8) -> Jet {
        let mut j = Jet::constant(Complex64::new(value, 0.0), dim, order);
        if let Some(g) = j.grad.as_mut() {
            g[slot] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn zero(dim: usize, order: u8) -> Jet {
        Jet::constant(ZERO, dim, order)
    }

    pub fn grad_at(&self, k: usize) -> Complex64 {
        self.grad.as_ref().map(|g| g[k]).unwrap_or(ZERO)
    }

    pub fn hess_at(&self, k: usize, l: usize) -> Complex64 {
        self.hess
            .as_ref()
            .map(|h| h[k * self.dim + l])
            .unwrap_or(ZERO)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        binary(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        binary(self, other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet {
            dim: self.dim,
            value: self.value * c,
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|x| x * c).collect()),
            hess: self
                .hess
                .as_ref()
                .map(|h| h.iter().map(|x| x * c).collect()),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let value = self.value * other.value;
        let order = self.order().min(other.order());
        let grad = (order >= 1).then(|| {
            let (ga, gb) = (self.grad.as_ref().unwrap(), other.grad.as_ref().unwrap());
            (0..dim)
                .map(|k| ga[k] * other.value + self.value * gb[k])
                .collect::<Vec<_>>()
        });
        let hess = (order >= 2).then(|| {
            let (ga, gb) = (self.grad.as_ref().unwrap(), other.grad.as_ref().unwrap());
            let (ha, hb) = (self.hess.as_ref().unwrap(), other.hess.as_ref().unwrap());
            let mut h = vec![ZERO; dim * dim];
            for k in 0..dim {
                for l in 0..dim {
                    h[k * dim + l] = ha[k * dim + l] * other.value
                        + self.value * hb[k * dim + l]
                        + ga[k] * gb[l]
                        + ga[l] * gb[k];
                }
            }
            h
        });
        Jet {
            dim,
            value,
            grad,
            hess,
        }
    }

    /// Chain rule for a scalar analytic function with derivatives `d1`, `d2`
    /// at `self.value`.
    fn chain(&self, f: Complex64, d1: Complex64, d2: Complex64) -> Jet {
        let dim = self.dim;
        let grad = self
            .grad
            .as_ref()
            .map(|g| g.iter().map(|x| d1 * x).collect::<Vec<_>>());
        let hess = self.hess.as_ref().map(|h| {
            let g = self.grad.as_ref().unwrap();
            let mut out = vec![ZERO; dim * dim];
            for k in 0..dim {
                for l in 0..dim {
                    out[k * dim + l] = d1 * h[k * dim + l] + d2 * g[k] * g[l];
                }
            }
            out
        });
        Jet {
            dim,
            value: f,
            grad,
            hess,
        }
    }

    pub fn recip(&self) -> Result<Jet, EvalError> {
        if self.value == ZERO {
            return Err(EvalError::DivisionByZero);
        }
        let v = self.value;
        let inv = Complex64::new(1.0, 0.0) / v;
        Ok(self.chain(inv, -inv * inv, 2.0 * inv * inv * inv))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, EvalError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn powi(&self, n: i32) -> Result<Jet, EvalError> {
        if n == 0 {
            return Ok(Jet::constant(
                Complex64::new(1.0, 0.0),
                self.dim,
                self.order(),
            ));
        }
        if self.value == ZERO && n < 0 {
            return Err(EvalError::ZeroToNegativePower);
        }
        let v = self.value;
        let f = v.powi(n);
        let nf = Complex64::new(n as f64, 0.0);
        let d1 = nf * v.powi(n - 1);
        let d2 = nf * Complex64::new((n - 1) as f64, 0.0) * v.powi(n - 2);
        // powi(0) of 0 inside d1/d2 cannot occur for |n| >= 1 with v == 0
        // except n == 1, 2 where the coefficient vanishes first.
        let d1 = if v == ZERO && n >= 2 { ZERO } else { d1 };
        let d2 = if v == ZERO && n >= 3 {
            ZERO
        } else if v == ZERO && n == 2 {
            Complex64::new(2.0, 0.0)
        } else if v == ZERO && n == 1 {
            ZERO
        } else {
            d2
        };
        let d1 = if v == ZERO && n == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            d1
        };
        Ok(self.chain(f, d1, d2))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn log(&self) -> Result<Jet, EvalError> {
        if self.value == ZERO {
            return Err(EvalError::LogOfZero);
        }
        let inv = Complex64::new(1.0, 0.0) / self.value;
        Ok(self.chain(self.value.ln(), inv, -inv * inv))
    }
}

fn binary(a: &Jet, b: &Jet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Jet {
    debug_assert_eq!(a.dim, b.dim);
    let order = a.order().min(b.order());
    Jet {
        dim: a.dim,
        value: f(a.value, b.value),
        grad: (order >= 1).then(|| {
            let (ga, gb) = (a.grad.as_ref().unwrap(), b.grad.as_ref().unwrap());
            ga.iter().zip(gb).map(|(x, y)| f(*x, *y)).collect()
        }),
        hess: (order >= 2).then(|| {
            let (ha, hb) = (a.hess.as_ref().unwrap(), b.hess.as_ref().unwrap());
            ha.iter().zip(hb).map(|(x, y)| f(*x, *y)).collect()
        }),
    }
}

/// Evaluate an expression to a jet of the requested order (0, 1, or 2).
pub fn eval_jet(e: &ExprRef, point: &[f64], ctx: &EvalCtx, order: u8) -> Result<Jet, EvalError> {
    debug_assert_eq!(point.len(), ctx.ambient());
    let dim = point.len();
    match e.as_ref() {
        Expr::Const(c) => Ok(Jet::constant(*c, dim, order)),
        Expr::Pi => Ok(Jet::constant(
            Complex64::new(std::f64::consts::PI, 0.0),
            dim,
            order,
        )),
        Expr::ImUnit => Ok(Jet::constant(Complex64::new(0.0, 1.0), dim, order)),
        Expr::Coord(k) => {
            let k = *k as usize;
            if k >= ctx.x_dim {
                return Err(EvalError::CoordOutOfRange(k + 1));
            }
            Ok(Jet::variable(point[k], k, dim, order))
        }
        Expr::Param(l) => {
            let l = *l as usize;
            if l >= ctx.n_params {
                return Err(EvalError::ParamOutOfRange(l));
            }
            let slot = ctx.x_dim + l;
            Ok(Jet::variable(point[slot], slot, dim, order))
        }
        Expr::Add(a, b) => {
            Ok(eval_jet(a, point, ctx, order)?.add(&eval_jet(b, point, ctx, order)?))
        }
        Expr::Sub(a, b) => {
            Ok(eval_jet(a, point, ctx, order)?.sub(&eval_jet(b, point, ctx, order)?))
        }
        Expr::Mul(a, b) => {
            Ok(eval_jet(a, point, ctx, order)?.mul(&eval_jet(b, point, ctx, order)?))
        }
        Expr::Div(a, b) => eval_jet(a, point, ctx, order)?.div(&eval_jet(b, point, ctx, order)?),
        Expr::Pow(a, n) => eval_jet(a, point, ctx, order)?.powi(*n),
        Expr::Sin(a) => Ok(eval_jet(a, point, ctx, order)?.sin()),
        Expr::Cos(a) => Ok(eval_jet(a, point, ctx, order)?.cos()),
        Expr::Exp(a) => Ok(eval_jet(a, point, ctx, order)?.exp()),
        Expr::Log(a) => eval_jet(a, point, ctx, order)?.log(),
    }
}

/// Value-only evaluation.
pub fn eval_value(e: &ExprRef, point: &[f64], ctx: &EvalCtx) -> Result<Complex64, EvalError> {
    Ok(eval_jet(e, point, ctx, 0)?.value)
}
