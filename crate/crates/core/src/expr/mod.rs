//! Scalar constraint expressions: parsing, evaluation and exact gradients.
//!
//! An [`Expr`] is an immutable tree over variable indices. Values are computed
//! with plain `f64` sweeps, gradients with forward-mode dual numbers, one sweep
//! per variable.

mod dual;
mod parse;

use std::fmt;

use thiserror::Error;

pub use dual::Dual;
pub use parse::{parse, ParseError, ParseErrorKind};

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a real literal exponent.
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Value and gradient of an expression at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("{op} domain violation at `{subexpr}` (argument {arg})")]
    Domain {
        op: &'static str,
        subexpr: String,
        arg: f64,
    },
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, p: f64) -> Self {
        Expr::Pow(Box::new(a), p)
    }

    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    pub fn exp(a: Expr) -> Self {
        Expr::Exp(Box::new(a))
    }

    pub fn log(a: Expr) -> Self {
        Expr::Log(Box::new(a))
    }

    pub fn sqrt(a: Expr) -> Self {
        Expr::Sqrt(Box::new(a))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => {
                a.max_var()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => {
                1 + a.size()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Value at `x`. Domain violations are errors, never NaN.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => coordinate(x, *i)?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(self.domain("division", den));
                }
                a.eval(x)? / den
            }
            Expr::Pow(a, p) => {
                let base = a.eval(x)?;
                check_pow_domain(self, base, *p)?;
                powr(base, *p)
            }
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Log(a) => {
                let u = a.eval(x)?;
                if u <= 0.0 {
                    return Err(self.domain("log", u));
                }
                u.ln()
            }
            Expr::Sqrt(a) => {
                let u = a.eval(x)?;
                if u < 0.0 {
                    return Err(self.domain("sqrt", u));
                }
                u.sqrt()
            }
        })
    }

    /// Value and exact gradient at `x`, by one dual sweep per coordinate.
    pub fn eval_grad(&self, x: &[f64]) -> Result<EvalResult, EvalError> {
        let n = x.len();
        if let Some(m) = self.max_var() {
            if m >= n {
                return Err(EvalError::Dimension {
                    expected: m + 1,
                    got: n,
                });
            }
        }
        let value = self.eval(x)?;
        let mut gradient = vec![0.0; n];
        for (k, g) in gradient.iter_mut().enumerate() {
            *g = self.eval_dual(x, &|i| if i == k { 1.0 } else { 0.0 })?.eps;
        }
        Ok(EvalResult { value, gradient })
    }

    /// Directional derivative of the expression at `x` along `dir`.
    pub fn eval_directional(&self, x: &[f64], dir: &[f64]) -> Result<Dual, EvalError> {
        if x.len() != dir.len() {
            return Err(EvalError::Dimension {
                expected: x.len(),
                got: dir.len(),
            });
        }
        if let Some(m) = self.max_var() {
            if m >= x.len() {
                return Err(EvalError::Dimension {
                    expected: m + 1,
                    got: x.len(),
                });
            }
        }
        self.eval_dual(x, &|i| dir[i])
    }

    fn eval_dual(&self, x: &[f64], seed: &dyn Fn(usize) -> f64) -> Result<Dual, EvalError> {
        Ok(match self {
            Expr::Const(c) => Dual::constant(*c),
            Expr::Var(i) => Dual::new(coordinate(x, *i)?, seed(*i)),
            Expr::Neg(a) => -a.eval_dual(x, seed)?,
            Expr::Add(a, b) => a.eval_dual(x, seed)? + b.eval_dual(x, seed)?,
            Expr::Sub(a, b) => a.eval_dual(x, seed)? - b.eval_dual(x, seed)?,
            Expr::Mul(a, b) => a.eval_dual(x, seed)? * b.eval_dual(x, seed)?,
            Expr::Div(a, b) => {
                let den = b.eval_dual(x, seed)?;
                if den.re == 0.0 {
                    return Err(self.domain("division", den.re));
                }
                a.eval_dual(x, seed)? / den
            }
            Expr::Pow(a, p) => {
                let base = a.eval_dual(x, seed)?;
                check_pow_domain(self, base.re, *p)?;
                if base.re == 0.0 && *p < 1.0 && *p != 0.0 && base.eps != 0.0 {
                    return Err(self.domain("power derivative", base.re));
                }
                base.powr(*p)
            }
            Expr::Exp(a) => a.eval_dual(x, seed)?.exp(),
            Expr::Log(a) => {
                let u = a.eval_dual(x, seed)?;
                if u.re <= 0.0 {
                    return Err(self.domain("log", u.re));
                }
                u.ln()
            }
            Expr::Sqrt(a) => {
                let u = a.eval_dual(x, seed)?;
                if u.re < 0.0 {
                    return Err(self.domain("sqrt", u.re));
                }
                if u.re == 0.0 {
                    if u.eps != 0.0 {
                        return Err(self.domain("sqrt derivative", u.re));
                    }
                    Dual::constant(0.0)
                } else {
                    u.sqrt()
                }
            }
        })
    }

    fn domain(&self, op: &'static str, arg: f64) -> EvalError {
        EvalError::Domain {
            op,
            subexpr: self.to_string(),
            arg,
        }
    }

    /// Render with the given variable names. The output re-parses to an equal tree.
    pub fn render(&self, names: &[impl AsRef<str>]) -> String {
        let mut out = String::new();
        self.write_to(&mut out, &|i| {
            names
                .get(i)
                .map(|s| s.as_ref().to_string())
                .unwrap_or_else(|| format!("x{i}"))
        });
        out
    }

    fn write_to(&self, out: &mut String, name: &dyn Fn(usize) -> String) {
        match self {
            Expr::Const(c) => write_literal(out, *c),
            Expr::Var(i) => out.push_str(&name(*i)),
            Expr::Neg(a) => {
                out.push_str("(-(");
                a.write_to(out, name);
                out.push_str("))");
            }
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                out.push('(');
                a.write_to(out, name);
                out.push_str(op);
                b.write_to(out, name);
                out.push(')');
            }
            Expr::Sub(a, b) => {
                out.push('(');
                a.write_to(out, name);
                out.push_str(" - ");
                // a bare literal after binary minus parses as an added constant
                if matches!(**b, Expr::Const(_)) {
                    out.push('(');
                    b.write_to(out, name);
                    out.push(')');
                } else {
                    b.write_to(out, name);
                }
                out.push(')');
            }
            Expr::Pow(a, p) => {
                out.push('(');
                a.write_to(out, name);
                out.push_str(" ^ ");
                write_literal(out, *p);
                out.push(')');
            }
            Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => {
                out.push_str(match self {
                    Expr::Exp(_) => "exp(",
                    Expr::Log(_) => "log(",
                    _ => "sqrt(",
                });
                a.write_to(out, name);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write_to(&mut out, &|i| format!("x{i}"));
        f.write_str(&out)
    }
}

fn write_literal(out: &mut String, c: f64) {
    if c.is_sign_negative() {
        out.push_str(&format!("(-{:?})", -c));
    } else {
        out.push_str(&format!("{c:?}"));
    }
}

/// `x[i]`, or a dimension error naming the smallest length that would fit.
fn coordinate(x: &[f64], i: usize) -> Result<f64, EvalError> {
    x.get(i).copied().ok_or(EvalError::Dimension {
        expected: i + 1,
        got: x.len(),
    })
}

fn check_pow_domain(node: &Expr, base: f64, p: f64) -> Result<(), EvalError> {
    if base < 0.0 && p.fract() != 0.0 {
        return Err(node.domain("fractional power of negative base", base));
    }
    if base == 0.0 && p < 0.0 {
        return Err(node.domain("negative power of zero", base));
    }
    Ok(())
}

/// `base^p`, exact repeated multiplication for small integer exponents.
pub(crate) fn powr(base: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}
