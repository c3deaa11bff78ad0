//! Row-level expression language used by filters, maps and flat maps.
//!
//! Expressions are total and deterministic: column references, literals,
//! comparisons, boolean connectives and arithmetic. Integer `+ - *` saturate,
//! `/` always produces a float, division by zero yields `0.0`, and float
//! results are forced finite (overflow saturates to `±f64::MAX`).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabledata::{ColumnType, Row, Schema, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Col(String),
    Lit(Value),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    Lt(Box<Expr>, Box<Expr>),
    Le(Box<Expr>, Box<Expr>),
    Gt(Box<Expr>, Box<Expr>),
    Ge(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

pub fn col(name: impl Into<String>) -> Expr {
    Expr::Col(name.into())
}

pub fn lit(v: impl Into<Value>) -> Expr {
    Expr::Lit(v.into())
}

macro_rules! binary_builders {
    ($($method:ident => $variant:ident),* $(,)?) => {
        impl Expr {
            $(
                pub fn $method(self, rhs: Expr) -> Expr {
                    Expr::$variant(Box::new(self), Box::new(rhs))
                }
            )*
        }
    };
}

binary_builders! {
    eq => Eq, ne => Ne, lt => Lt, le => Le, gt => Gt, ge => Ge,
    and => And, or => Or, add => Add, sub => Sub, mul => Mul, div => Div,
}

impl std::ops::Not for Expr {
    type Output = Expr;
    fn not(self) -> Expr {
        Expr::Not(Box::new(self))
    }
}

/// Static type of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExprType {
    Column(ColumnType),
    Bool,
}

impl ExprType {
    fn is_numeric(self) -> bool {
        matches!(
            self,
            ExprType::Column(ColumnType::Int64) | ExprType::Column(ColumnType::Float64)
        )
    }
}

/// Result of evaluating an expression on one row.
#[derive(Clone, Debug, PartialEq)]
pub enum Evaluated {
    Value(Value),
    Bool(bool),
}

impl Expr {
    /// Type-checks against `schema`.
    pub fn type_of(&self, schema: &Schema) -> Result<ExprType> {
        use Expr::*;
        match self {
            Col(name) => Ok(ExprType::Column(schema.column(name)?.ty)),
            Lit(v) => {
                if let Value::Float(x) = v {
                    if !x.is_finite() {
                        return Err(Error::TypeError("non-finite literal".into()));
                    }
                }
                Ok(ExprType::Column(v.column_type()))
            }
            Eq(a, b) | Ne(a, b) => {
                let (ta, tb) = (a.type_of(schema)?, b.type_of(schema)?);
                if ta == tb || (ta.is_numeric() && tb.is_numeric()) {
                    Ok(ExprType::Bool)
                } else {
                    Err(mismatch("compare", ta, tb))
                }
            }
            Lt(a, b) | Le(a, b) | Gt(a, b) | Ge(a, b) => {
                let (ta, tb) = (a.type_of(schema)?, b.type_of(schema)?);
                let comparable = (ta.is_numeric() && tb.is_numeric())
                    || (ta == ExprType::Column(ColumnType::Text) && ta == tb);
                if comparable {
                    Ok(ExprType::Bool)
                } else {
                    Err(mismatch("order", ta, tb))
                }
            }
            And(a, b) | Or(a, b) => {
                let (ta, tb) = (a.type_of(schema)?, b.type_of(schema)?);
                if ta == ExprType::Bool && tb == ExprType::Bool {
                    Ok(ExprType::Bool)
                } else {
                    Err(mismatch("combine", ta, tb))
                }
            }
            Not(a) => match a.type_of(schema)? {
                ExprType::Bool => Ok(ExprType::Bool),
                t => Err(Error::TypeError(format!("cannot negate {t:?}"))),
            },
            Add(a, b) | Sub(a, b) | Mul(a, b) => {
                let (ta, tb) = (a.type_of(schema)?, b.type_of(schema)?);
                match (ta, tb) {
                    (ExprType::Column(ColumnType::Int64), ExprType::Column(ColumnType::Int64)) => {
                        Ok(ta)
                    }
                    _ if ta.is_numeric() && tb.is_numeric() => {
                        Ok(ExprType::Column(ColumnType::Float64))
                    }
                    _ => Err(mismatch("do arithmetic on", ta, tb)),
                }
            }
            Div(a, b) => {
                let (ta, tb) = (a.type_of(schema)?, b.type_of(schema)?);
                if ta.is_numeric() && tb.is_numeric() {
                    Ok(ExprType::Column(ColumnType::Float64))
                } else {
                    Err(mismatch("divide", ta, tb))
                }
            }
        }
    }

    /// Evaluates on a row. The expression must type-check against the row's
    /// schema; otherwise the result is a `TypeError`.
    pub fn eval(&self, schema: &Schema, row: &Row) -> Result<Evaluated> {
        use Expr::*;
        Ok(match self {
            Col(name) => {
                let i = schema
                    .index_of(name)
                    .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
                Evaluated::Value(row.get(i).clone())
            }
            Lit(v) => Evaluated::Value(v.clone()),
            Eq(a, b) => Evaluated::Bool(compare(schema, row, a, b)? == Ordering::Equal),
            Ne(a, b) => Evaluated::Bool(compare(schema, row, a, b)? != Ordering::Equal),
            Lt(a, b) => Evaluated::Bool(compare(schema, row, a, b)? == Ordering::Less),
            Le(a, b) => Evaluated::Bool(compare(schema, row, a, b)? != Ordering::Greater),
            Gt(a, b) => Evaluated::Bool(compare(schema, row, a, b)? == Ordering::Greater),
            Ge(a, b) => Evaluated::Bool(compare(schema, row, a, b)? != Ordering::Less),
            And(a, b) => Evaluated::Bool(a.eval_bool(schema, row)? && b.eval_bool(schema, row)?),
            Or(a, b) => Evaluated::Bool(a.eval_bool(schema, row)? || b.eval_bool(schema, row)?),
            Not(a) => Evaluated::Bool(!a.eval_bool(schema, row)?),
            Add(a, b) => arith(schema, row, a, b, i64::saturating_add, |x, y| x + y)?,
            Sub(a, b) => arith(schema, row, a, b, i64::saturating_sub, |x, y| x - y)?,
            Mul(a, b) => arith(schema, row, a, b, i64::saturating_mul, |x, y| x * y)?,
            Div(a, b) => {
                let x = a.eval_f64(schema, row)?;
                let y = b.eval_f64(schema, row)?;
                let q = if y == 0.0 { 0.0 } else { x / y };
                Evaluated::Value(finite(q))
            }
        })
    }

    pub fn eval_bool(&self, schema: &Schema, row: &Row) -> Result<bool> {
        match self.eval(schema, row)? {
            Evaluated::Bool(b) => Ok(b),
            Evaluated::Value(v) => Err(Error::TypeError(format!("expected boolean, got {v}"))),
        }
    }

    pub fn eval_value(&self, schema: &Schema, row: &Row) -> Result<Value> {
        match self.eval(schema, row)? {
            Evaluated::Value(v) => Ok(v),
            Evaluated::Bool(_) => Err(Error::TypeError("expected a value, got boolean".into())),
        }
    }

    fn eval_f64(&self, schema: &Schema, row: &Row) -> Result<f64> {
        self.eval_value(schema, row)?
            .as_f64()
            .ok_or_else(|| Error::TypeError("expected a number".into()))
    }

    /// Columns referenced anywhere in the expression.
    pub fn columns(&self) -> Vec<&str> {
        use Expr::*;
        match self {
            Col(c) => vec![c.as_str()],
            Lit(_) => vec![],
            Not(a) => a.columns(),
            Eq(a, b) | Ne(a, b) | Lt(a, b) | Le(a, b) | Gt(a, b) | Ge(a, b) | And(a, b)
            | Or(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => {
                let mut c = a.columns();
                c.extend(b.columns());
                c
            }
        }
    }
}

fn mismatch(what: &str, a: ExprType, b: ExprType) -> Error {
    Error::TypeError(format!("cannot {what} {a:?} and {b:?}"))
}

fn finite(x: f64) -> Value {
    let x = if x.is_nan() {
        0.0
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    };
    Value::float(x).expect("finite")
}

fn compare(schema: &Schema, row: &Row, a: &Expr, b: &Expr) -> Result<Ordering> {
    match (a.eval(schema, row)?, b.eval(schema, row)?) {
        (Evaluated::Bool(x), Evaluated::Bool(y)) => Ok(x.cmp(&y)),
        (Evaluated::Value(Value::Int(x)), Evaluated::Value(Value::Int(y))) => Ok(x.cmp(&y)),
        (Evaluated::Value(Value::Text(x)), Evaluated::Value(Value::Text(y))) => {
            Ok(x.as_bytes().cmp(y.as_bytes()))
        }
        (Evaluated::Value(x), Evaluated::Value(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => Ok(x.total_cmp(&y)),
            _ => Err(Error::TypeError(format!("cannot compare {x} and {y}"))),
        },
        _ => Err(Error::TypeError("cannot compare boolean and value".into())),
    }
}

fn arith(
    schema: &Schema,
    row: &Row,
    a: &Expr,
    b: &Expr,
    int_op: fn(i64, i64) -> i64,
    float_op: fn(f64, f64) -> f64,
) -> Result<Evaluated> {
    let x = a.eval_value(schema, row)?;
    let y = b.eval_value(schema, row)?;
    let v = match (&x, &y) {
        (Value::Int(i), Value::Int(j)) => Value::Int(int_op(*i, *j)),
        _ => match (x.as_f64(), y.as_f64()) {
            (Some(p), Some(q)) => finite(float_op(p, q)),
            _ => return Err(Error::TypeError(format!("cannot do arithmetic on {x} and {y}"))),
        },
    };
    Ok(Evaluated::Value(v))
}
