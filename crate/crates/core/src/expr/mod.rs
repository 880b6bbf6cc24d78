//! Closed-form scalar expressions with exact first and second derivatives.
//!
//! Expressions are parsed once into an immutable AST and evaluated with
//! second-order forward-mode dual numbers, so every evaluation returns the
//! value together with the exact gradient and Hessian of the closed form
//! (up to roundoff). Differential forms are represented by one coefficient
//! expression per strictly increasing multi-index.

mod form;
mod jet;
mod parser;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use form::{det_minor, FormExpression};
pub use jet::{Jet, MAX_VARS};

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("variable x{} out of range for {num_vars} variable(s)", index + 1)]
    VarOutOfRange { index: usize, num_vars: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point has {got} coordinates, expression has {expected} variables")]
    PointDimension { expected: usize, got: usize },
    #[error("form of degree {expected} applied to {got} vector(s)")]
    FormVectors { expected: usize, got: usize },
    #[error("invalid form coefficient: {0}")]
    FormIndex(String),
}

/// Expression tree over variables `x1..xN`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
    Sqrt(Arc<Expr>),
}

/// A parsed closed-form function of `num_vars` real variables.
///
/// Immutable after parse; cheap to clone and safe to evaluate from many
/// threads concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpression {
    ast: Arc<Expr>,
    num_vars: usize,
}

/// Value, gradient and symmetric Hessian of an expression at one point.
#[derive(Debug, Clone)]
pub struct JetValue {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl ScalarExpression {
    /// Parse `text` as an expression of `num_vars` variables.
    ///
    /// The grammar has conventional precedence (`^` > unary `-` > `*` `/` >
    /// `+` `-`), left associativity and insignificant whitespace. Variables
    /// are `x1..xN` with aliases `x,y,z,w` for N ≤ 4; `pi` is predefined;
    /// exponents are restricted to integers.
    pub fn parse(text: &str, num_vars: usize) -> Result<Self, ExprError> {
        assert!(num_vars >= 1, "expression needs at least one variable");
        assert!(
            num_vars <= MAX_VARS,
            "at most {MAX_VARS} variables supported"
        );
        let ast = parser::parse(text, num_vars)?;
        Ok(ScalarExpression {
            ast: Arc::new(ast),
            num_vars,
        })
    }

    pub fn from_ast(ast: Expr, num_vars: usize) -> Result<Self, ExprError> {
        check_vars(&ast, num_vars)?;
        Ok(ScalarExpression {
            ast: Arc::new(ast),
            num_vars,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// The expression `-self`.
    pub fn negated(&self) -> ScalarExpression {
        ScalarExpression {
            ast: Arc::new(Expr::Neg(self.ast.clone())),
            num_vars: self.num_vars,
        }
    }

    /// Plain value evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        if point.len() != self.num_vars {
            return Err(ExprError::PointDimension {
                expected: self.num_vars,
                got: point.len(),
            });
        }
        eval_value(&self.ast, point)
    }

    /// Value, gradient and Hessian at `point` via forward-mode dual numbers.
    pub fn eval_jet(&self, point: &[f64]) -> Result<JetValue, ExprError> {
        Ok(self.eval_jet_raw(point)?.into_jet_value(self.num_vars))
    }

    /// Stack-allocated jet, for hot loops.
    pub fn eval_jet_raw(&self, point: &[f64]) -> Result<Jet, ExprError> {
        if point.len() != self.num_vars {
            return Err(ExprError::PointDimension {
                expected: self.num_vars,
                got: point.len(),
            });
        }
        eval_jet_node(&self.ast, point, self.num_vars)
    }
}

impl fmt::Display for ScalarExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, &self.ast, 0)
    }
}

fn check_vars(e: &Expr, num_vars: usize) -> Result<(), ExprError> {
    match e {
        Expr::Const(_) | Expr::Pi => Ok(()),
        Expr::Var(i) => {
            if *i < num_vars {
                Ok(())
            } else {
                Err(ExprError::VarOutOfRange {
                    index: *i,
                    num_vars,
                })
            }
        }
        Expr::Neg(a)
        | Expr::Sin(a)
        | Expr::Cos(a)
        | Expr::Exp(a)
        | Expr::Log(a)
        | Expr::Sqrt(a)
        | Expr::Pow(a, _) => check_vars(a, num_vars),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            check_vars(a, num_vars)?;
            check_vars(b, num_vars)
        }
    }
}

fn eval_value(e: &Expr, x: &[f64]) -> Result<f64, ExprError> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Pi => std::f64::consts::PI,
        Expr::Var(i) => x[*i],
        Expr::Neg(a) => -eval_value(a, x)?,
        Expr::Add(a, b) => eval_value(a, x)? + eval_value(b, x)?,
        Expr::Sub(a, b) => eval_value(a, x)? - eval_value(b, x)?,
        Expr::Mul(a, b) => eval_value(a, x)? * eval_value(b, x)?,
        Expr::Div(a, b) => {
            let d = eval_value(b, x)?;
            if d == 0.0 {
                return Err(ExprError::Domain("division by zero".into()));
            }
            eval_value(a, x)? / d
        }
        Expr::Pow(a, k) => {
            let v = eval_value(a, x)?;
            if *k < 0 && v == 0.0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()));
            }
            v.powi(*k)
        }
        Expr::Sin(a) => eval_value(a, x)?.sin(),
        Expr::Cos(a) => eval_value(a, x)?.cos(),
        Expr::Exp(a) => eval_value(a, x)?.exp(),
        Expr::Log(a) => {
            let v = eval_value(a, x)?;
            if v <= 0.0 {
                return Err(ExprError::Domain(format!("log of nonpositive value {v}")));
            }
            v.ln()
        }
        Expr::Sqrt(a) => {
            let v = eval_value(a, x)?;
            if v <= 0.0 {
                return Err(ExprError::Domain(format!("sqrt of nonpositive value {v}")));
            }
            v.sqrt()
        }
    })
}

fn eval_jet_node(e: &Expr, x: &[f64], n: usize) -> Result<Jet, ExprError> {
    Ok(match e {
        Expr::Const(c) => Jet::constant(*c, n),
        Expr::Pi => Jet::constant(std::f64::consts::PI, n),
        Expr::Var(i) => Jet::variable(x[*i], *i, n),
        Expr::Neg(a) => eval_jet_node(a, x, n)?.neg(),
        Expr::Add(a, b) => eval_jet_node(a, x, n)?.add(&eval_jet_node(b, x, n)?),
        Expr::Sub(a, b) => eval_jet_node(a, x, n)?.sub(&eval_jet_node(b, x, n)?),
        Expr::Mul(a, b) => eval_jet_node(a, x, n)?.mul(&eval_jet_node(b, x, n)?),
        Expr::Div(a, b) => {
            let d = eval_jet_node(b, x, n)?;
            if d.value() == 0.0 {
                return Err(ExprError::Domain("division by zero".into()));
            }
            eval_jet_node(a, x, n)?.div(&d)
        }
        Expr::Pow(a, k) => {
            let base = eval_jet_node(a, x, n)?;
            if *k < 0 && base.value() == 0.0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()));
            }
            base.powi(*k)
        }
        Expr::Sin(a) => eval_jet_node(a, x, n)?.sin(),
        Expr::Cos(a) => eval_jet_node(a, x, n)?.cos(),
        Expr::Exp(a) => eval_jet_node(a, x, n)?.exp(),
        Expr::Log(a) => {
            let v = eval_jet_node(a, x, n)?;
            if v.value() <= 0.0 {
                return Err(ExprError::Domain(format!(
                    "log of nonpositive value {}",
                    v.value()
                )));
            }
            v.ln()
        }
        Expr::Sqrt(a) => {
            let v = eval_jet_node(a, x, n)?;
            if v.value() <= 0.0 {
                return Err(ExprError::Domain(format!(
                    "sqrt of nonpositive value {}",
                    v.value()
                )));
            }
            v.sqrt()
        }
    })
}

// Precedence levels used for printing: 1 additive, 2 multiplicative,
// 3 unary minus, 4 power, 5 atom.
fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8) -> fmt::Result {
    let prec = match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    };
    let need_parens = prec < parent;
    if need_parens {
        write!(f, "(")?;
    }
    match e {
        Expr::Const(c) => write!(f, "{c}")?,
        Expr::Pi => write!(f, "pi")?,
        Expr::Var(i) => write!(f, "x{}", i + 1)?,
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_expr(f, a, 3)?;
        }
        Expr::Add(a, b) => {
            write_expr(f, a, 1)?;
            write!(f, " + ")?;
            write_expr(f, b, 2)?;
        }
        Expr::Sub(a, b) => {
            write_expr(f, a, 1)?;
            write!(f, " - ")?;
            write_expr(f, b, 2)?;
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, 2)?;
            write!(f, "*")?;
            write_expr(f, b, 3)?;
        }
        Expr::Div(a, b) => {
            write_expr(f, a, 2)?;
            write!(f, "/")?;
            write_expr(f, b, 3)?;
        }
        Expr::Pow(a, k) => {
            write_expr(f, a, 5)?;
            write!(f, "^{k}")?;
        }
        Expr::Sin(a) => write_func(f, "sin", a)?,
        Expr::Cos(a) => write_func(f, "cos", a)?,
        Expr::Exp(a) => write_func(f, "exp", a)?,
        Expr::Log(a) => write_func(f, "log", a)?,
        Expr::Sqrt(a) => write_func(f, "sqrt", a)?,
    }
    if need_parens {
        write!(f, ")")?;
    }
    Ok(())
}

fn write_func(f: &mut fmt::Formatter<'_>, name: &str, arg: &Expr) -> fmt::Result {
    write!(f, "{name}(")?;
    write_expr(f, arg, 0)?;
    write!(f, ")")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_torus_field() {
        let e = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        assert_eq!(e.num_vars(), 2);
        let v = e.eval(&[0.0, 0.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parse_and_eval_polynomial() {
        let e = ScalarExpression::parse("x^2 + y*z", 3).unwrap();
        assert_eq!(e.eval(&[1.0, 2.0, 3.0]).unwrap(), 7.0);
    }

    #[test]
    fn syntax_error_carries_offset() {
        let err = ScalarExpression::parse("x +* y", 2).unwrap_err();
        match err {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let err = ScalarExpression::parse("x + theta", 2).unwrap_err();
        match err {
            ExprError::UnknownIdentifier { name, .. } => assert_eq!(name, "theta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alias_out_of_range_rejected() {
        assert!(ScalarExpression::parse("z", 2).is_err());
        assert!(ScalarExpression::parse("z", 3).is_ok());
    }

    #[test]
    fn jet_of_sum_of_squares() {
        let e = ScalarExpression::parse("x^2 + y^2", 2).unwrap();
        let j = e.eval_jet(&[1.0, 2.0]).unwrap();
        assert_eq!(j.value, 5.0);
        assert_eq!(j.gradient.as_slice(), &[2.0, 4.0]);
        assert_eq!(j.hessian[(0, 0)], 2.0);
        assert_eq!(j.hessian[(1, 1)], 2.0);
        assert_eq!(j.hessian[(0, 1)], 0.0);
    }

    #[test]
    fn jet_of_torus_field_at_origin() {
        let e = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        let j = e.eval_jet(&[0.0, 0.0]).unwrap();
        let w = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((j.value - 2.0).abs() < 1e-15);
        assert!(j.gradient.norm() < 1e-15);
        assert!((j.hessian[(0, 0)] + w).abs() < 1e-12);
        assert!((j.hessian[(1, 1)] + w).abs() < 1e-12);
        assert!(j.hessian[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn print_parse_roundtrip_is_stable() {
        for text in [
            "cos(2*pi*x)+cos(2*pi*y)",
            "x^2 + y*z - z/(1 + x^2)",
            "-x^2*sin(y) + exp(z)/sqrt(1 + x^2)",
            "pow(x, 3) - pi*y",
            "1/(2 - x) - -y",
        ] {
            let e = ScalarExpression::parse(text, 3).unwrap();
            let printed = e.to_string();
            let reparsed = ScalarExpression::parse(&printed, 3).unwrap();
            assert_eq!(printed, reparsed.to_string(), "roundtrip for {text}");
            assert_eq!(e.ast(), reparsed.ast(), "ast roundtrip for {text}");
        }
    }

    #[test]
    fn domain_errors_surface() {
        let e = ScalarExpression::parse("log(x)", 1).unwrap();
        assert!(e.eval(&[-1.0]).is_err());
        assert!(e.eval_jet(&[0.0]).is_err());
        let s = ScalarExpression::parse("sqrt(x)", 1).unwrap();
        assert!(s.eval(&[-0.5]).is_err());
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = ScalarExpression::parse("-x^2", 1).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
    }
}
