//! Expressions of the PRISM language and their exact evaluation.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::number::{format_rational, Field, Rational};
use crate::parametric::RationalFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
    Iff,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Implies => "=>",
            BinOp::Iff => "<=>",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Iff => 1,
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul | BinOp::Div => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Pow,
    Mod,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Pow => "pow",
            Func::Mod => "mod",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "pow" => Func::Pow,
            "mod" => Func::Mod,
            _ => return None,
        })
    }

    /// Accepted argument counts.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (2, usize::MAX),
            Func::Floor | Func::Ceil => (1, 1),
            Func::Pow | Func::Mod => (2, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Real(Rational),
    Ident(String),
    /// `"name"` atom; only meaningful in property state formulas.
    Label(String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn from_value(value: &Value) -> Expr {
        match value {
            Value::Bool(b) => Expr::Bool(*b),
            Value::Int(i) => Expr::Int(*i),
            Value::Real(r) => Expr::Real(r.clone()),
        }
    }

    pub fn literal_value(&self) -> Option<Value> {
        match self {
            Expr::Bool(b) => Some(Value::Bool(*b)),
            Expr::Int(i) => Some(Value::Int(*i)),
            Expr::Real(r) => Some(Value::Real(r.clone())),
            _ => None,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ite(..) => 0,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Not(_) => 5,
            Expr::Neg(_) => 9,
            Expr::Int(i) if *i < 0 => 9,
            Expr::Real(r) if r.is_negative() => 9,
            _ => 10,
        }
    }

    /// Every identifier occurring in the expression.
    pub fn identifiers(&self, out: &mut Vec<String>) {
        self.visit(&mut |e| {
            if let Expr::Ident(name) = e {
                out.push(name.clone());
            }
        });
    }

    pub fn labels(&self, out: &mut Vec<String>) {
        self.visit(&mut |e| {
            if let Expr::Label(name) = e {
                out.push(name.clone());
            }
        });
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Not(e) | Expr::Neg(e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Ite(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Rebuilds the expression bottom-up, letting `f` replace identifiers.
    pub fn map_identifiers(&self, f: &mut impl FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ident(name) => f(name).unwrap_or_else(|| self.clone()),
            Expr::Not(e) => Expr::Not(Box::new(e.map_identifiers(f))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_identifiers(f))),
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.map_identifiers(f), b.map_identifiers(f))
            }
            Expr::Ite(c, a, b) => Expr::Ite(
                Box::new(c.map_identifiers(f)),
                Box::new(a.map_identifiers(f)),
                Box::new(b.map_identifiers(f)),
            ),
            Expr::Call(func, args) => {
                Expr::Call(*func, args.iter().map(|a| a.map_identifiers(f)).collect())
            }
            _ => self.clone(),
        }
    }

    /// Evaluates subtrees without identifiers into literals.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Not(e) => Expr::Not(Box::new(e.fold())),
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold())),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.fold(), b.fold()),
            Expr::Ite(c, a, b) => {
                let c = c.fold();
                match c {
                    Expr::Bool(true) => return a.fold(),
                    Expr::Bool(false) => return b.fold(),
                    _ => Expr::Ite(Box::new(c), Box::new(a.fold()), Box::new(b.fold())),
                }
            }
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(Expr::fold).collect()),
            other => return other.clone(),
        };
        let closed = match &folded {
            Expr::Not(e) | Expr::Neg(e) => e.literal_value().is_some(),
            Expr::Binary(_, a, b) => a.literal_value().is_some() && b.literal_value().is_some(),
            Expr::Call(_, args) => args.iter().all(|a| a.literal_value().is_some()),
            _ => false,
        };
        if closed {
            if let Ok(v) = folded.evaluate(&|_: &str| None) {
                return Expr::from_value(&v);
            }
        }
        folded
    }

    pub fn evaluate(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        match self {
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Real(r) => Ok(Value::Real(r.clone())),
            Expr::Ident(name) => env(name).ok_or_else(|| EvalError::UnknownIdentifier(name.clone())),
            Expr::Label(name) => Err(EvalError::LabelInExpression(name.clone())),
            Expr::Not(e) => Ok(Value::Bool(!e.evaluate(env)?.as_bool()?)),
            Expr::Neg(e) => match e.evaluate(env)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
                Value::Real(r) => Ok(Value::Real(-r)),
                Value::Bool(_) => Err(EvalError::TypeMismatch("negation of a boolean".into())),
            },
            Expr::Binary(op, a, b) => {
                match op {
                    BinOp::And => {
                        return Ok(Value::Bool(a.evaluate(env)?.as_bool()? && b.evaluate(env)?.as_bool()?))
                    }
                    BinOp::Or => {
                        return Ok(Value::Bool(a.evaluate(env)?.as_bool()? || b.evaluate(env)?.as_bool()?))
                    }
                    BinOp::Implies => {
                        return Ok(Value::Bool(!a.evaluate(env)?.as_bool()? || b.evaluate(env)?.as_bool()?))
                    }
                    _ => {}
                }
                binary_value(*op, a.evaluate(env)?, b.evaluate(env)?)
            }
            Expr::Ite(c, a, b) => {
                if c.evaluate(env)?.as_bool()? {
                    a.evaluate(env)
                } else {
                    b.evaluate(env)
                }
            }
            Expr::Call(func, args) => {
                let values = args
                    .iter()
                    .map(|a| a.evaluate(env))
                    .collect::<Result<Vec<_>, _>>()?;
                call_value(*func, values)
            }
        }
    }

    /// Evaluates a numeric expression in which the identifiers `parameters`
    /// stay symbolic.
    pub fn evaluate_function(
        &self,
        env: &dyn Fn(&str) -> Option<Value>,
        is_parameter: &dyn Fn(&str) -> bool,
    ) -> Result<RationalFunction, EvalError> {
        let mut mentions = false;
        self.visit(&mut |e| {
            if let Expr::Ident(n) = e {
                mentions |= is_parameter(n);
            }
        });
        if !mentions {
            return Ok(RationalFunction::constant(self.evaluate(env)?.as_rational()?));
        }
        let sub = |e: &Expr| e.evaluate_function(env, is_parameter);
        match self {
            Expr::Ident(name) => Ok(RationalFunction::parameter(name)),
            Expr::Neg(e) => Ok(-sub(e)?),
            Expr::Binary(BinOp::Add, a, b) => Ok(sub(a)? + sub(b)?),
            Expr::Binary(BinOp::Sub, a, b) => Ok(sub(a)? - sub(b)?),
            Expr::Binary(BinOp::Mul, a, b) => Ok(sub(a)? * sub(b)?),
            Expr::Binary(BinOp::Div, a, b) => {
                let d = sub(b)?;
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(sub(a)? / d)
            }
            Expr::Ite(c, a, b) => {
                if c.evaluate(env)?.as_bool()? {
                    sub(a)
                } else {
                    sub(b)
                }
            }
            Expr::Call(Func::Pow, args) => {
                let exponent = args[1].evaluate(env)?;
                match exponent {
                    Value::Int(e) if e >= 0 => {
                        let base = sub(&args[0])?;
                        Ok((0..e).fold(RationalFunction::one(), |acc, _| acc * base.clone()))
                    }
                    _ => Err(EvalError::TypeMismatch(
                        "parametric pow needs a non-negative integer exponent".into(),
                    )),
                }
            }
            other => Err(EvalError::TypeMismatch(format!(
                "parameters are not allowed in `{other}`"
            ))),
        }
    }
}

/// Typed value of an evaluated expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(Rational),
}

impl Value {
    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(EvalError::TypeMismatch(format!("expected boolean, found {other}"))),
        }
    }

    pub fn as_int(&self) -> Result<i64, EvalError> {
        match self {
            Value::Int(i) => Ok(*i),
            other => Err(EvalError::TypeMismatch(format!("expected integer, found {other}"))),
        }
    }

    pub fn as_rational(&self) -> Result<Rational, EvalError> {
        match self {
            Value::Int(i) => Ok(Rational::from_integer(BigInt::from(*i))),
            Value::Real(r) => Ok(r.clone()),
            Value::Bool(_) => Err(EvalError::TypeMismatch("expected number, found boolean".into())),
        }
    }

    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Bool(_) => ValueType::Bool,
            Value::Int(_) => ValueType::Int,
            Value::Real(_) => ValueType::Double,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&format_rational(r)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Int,
    Double,
    Bool,
}

impl ValueType {
    pub fn keyword(self) -> &'static str {
        match self {
            ValueType::Int => "int",
            ValueType::Double => "double",
            ValueType::Bool => "bool",
        }
    }

    /// Converts `value` to this type where PRISM allows it (int to double).
    pub fn coerce(self, value: Value) -> Result<Value, EvalError> {
        match (self, value) {
            (ValueType::Int, v @ Value::Int(_)) => Ok(v),
            (ValueType::Bool, v @ Value::Bool(_)) => Ok(v),
            (ValueType::Double, Value::Int(i)) => Ok(Value::Real(Rational::from_integer(BigInt::from(i)))),
            (ValueType::Double, v @ Value::Real(_)) => Ok(v),
            (ValueType::Int, Value::Real(r)) if r.is_integer() => r
                .to_integer()
                .to_i64()
                .map(Value::Int)
                .ok_or(EvalError::Overflow),
            (ty, v) => Err(EvalError::TypeMismatch(format!(
                "value {v} of type {} used as {}",
                v.value_type().keyword(),
                ty.keyword()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("type error: {0}")]
    TypeMismatch(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("label \"{0}\" cannot be used here")]
    LabelInExpression(String),
}

fn binary_value(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use Value::*;
    match op {
        BinOp::Eq | BinOp::Ne => {
            let equal = match (&a, &b) {
                (Bool(x), Bool(y)) => x == y,
                (Bool(_), _) | (_, Bool(_)) => {
                    return Err(EvalError::TypeMismatch("comparing boolean with number".into()))
                }
                _ => a.as_rational()? == b.as_rational()?,
            };
            Ok(Bool(if op == BinOp::Eq { equal } else { !equal }))
        }
        BinOp::Iff => Ok(Bool(a.as_bool()? == b.as_bool()?)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = (a.as_rational()?, b.as_rational()?);
            Ok(Bool(match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            }))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (&a, &b) {
            (Int(x), Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(*y),
                    BinOp::Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                r.map(Int).ok_or(EvalError::Overflow)
            }
            _ => {
                let (x, y) = (a.as_rational()?, b.as_rational()?);
                Ok(Real(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    _ => x * y,
                }))
            }
        },
        BinOp::Div => {
            let (x, y) = (a.as_rational()?, b.as_rational()?);
            if Field::is_zero(&y) {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Real(x / y))
        }
        BinOp::And | BinOp::Or | BinOp::Implies => unreachable!("short-circuit operators"),
    }
}

fn call_value(func: Func, args: Vec<Value>) -> Result<Value, EvalError> {
    let (lo, hi) = func.arity();
    if args.len() < lo || args.len() > hi {
        return Err(EvalError::TypeMismatch(format!(
            "{} expects {} argument(s)",
            func.name(),
            lo
        )));
    }
    match func {
        Func::Min | Func::Max => {
            let all_int = args.iter().all(|a| matches!(a, Value::Int(_)));
            let mut best = args[0].as_rational()?;
            for a in &args[1..] {
                let v = a.as_rational()?;
                if (func == Func::Min && v < best) || (func == Func::Max && v > best) {
                    best = v;
                }
            }
            if all_int {
                Ok(Value::Int(best.to_integer().to_i64().ok_or(EvalError::Overflow)?))
            } else {
                Ok(Value::Real(best))
            }
        }
        Func::Floor | Func::Ceil => {
            let v = args[0].as_rational()?;
            let r = if func == Func::Floor { v.floor() } else { v.ceil() };
            r.to_integer().to_i64().map(Value::Int).ok_or(EvalError::Overflow)
        }
        Func::Pow => match (&args[0], &args[1]) {
            (Value::Int(b), Value::Int(e)) if *e >= 0 => u32::try_from(*e)
                .ok()
                .and_then(|e| b.checked_pow(e))
                .map(Value::Int)
                .ok_or(EvalError::Overflow),
            (base, Value::Int(e)) => {
                let b = base.as_rational()?;
                if *e < 0 && Field::is_zero(&b) {
                    return Err(EvalError::DivisionByZero);
                }
                let p = num_traits::pow(b, e.unsigned_abs() as usize);
                Ok(Value::Real(if *e < 0 { num_traits::Inv::inv(p) } else { p }))
            }
            _ => Err(EvalError::TypeMismatch("pow needs an integer exponent".into())),
        },
        Func::Mod => {
            let (a, b) = (args[0].as_int()?, args[1].as_int()?);
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Int(a.mod_floor(&b)))
        }
    }
}

/// Decimal text for rationals whose expansion terminates.
pub(crate) fn decimal_text(value: &Rational) -> Option<String> {
    let mut denom = value.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&denom % &two) == BigInt::from(0) {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five) == BigInt::from(0) {
        denom /= &five;
        fives += 1;
    }
    if denom != BigInt::from(1) {
        return None;
    }
    let digits = twos.max(fives);
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10), digits));
    let n = scaled.to_integer();
    let negative = n.is_negative();
    let mut text = n.abs().to_string();
    if digits > 0 {
        if text.len() <= digits {
            text = format!("{}{}", "0".repeat(digits + 1 - text.len()), text);
        }
        text.insert(text.len() - digits, '.');
    } else {
        text.push_str(".0");
    }
    Some(if negative { format!("-{text}") } else { text })
}

struct Prec<'a>(&'a Expr, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Real(r) => match decimal_text(r) {
                Some(text) => f.write_str(&text),
                None => write!(f, "({}/{})", r.numer(), r.denom()),
            },
            Expr::Ident(name) => f.write_str(name),
            Expr::Label(name) => write!(f, "\"{name}\""),
            Expr::Not(e) => write!(f, "!{}", Prec(e, 6)),
            Expr::Neg(e) => write!(f, "-{}", Prec(e, 10)),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (lp, rp) = match op {
                    BinOp::Implies => (p + 1, p),
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        (p + 1, p + 1)
                    }
                    _ => (p, p + 1),
                };
                write!(f, "{} {} {}", Prec(a, lp), op.symbol(), Prec(b, rp))
            }
            Expr::Ite(c, a, b) => write!(f, "{} ? {} : {}", Prec(c, 1), Prec(a, 1), Prec(b, 0)),
            Expr::Call(func, args) => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "{}({})", func.name(), args.join(", "))
            }
        }
    }
}
