use super::ast::{BinaryOp, Builtin, Expr, PathRef, UnaryOp};
use super::{BindingSet, EvalError};
use crate::model::{SensorUpdate, Value};

type EResult = Result<Value, EvalError>;

/// Navigates a bound update document.
///
/// `channels.<name>.<field>` selects a channel by name; `lastUpdate`,
/// `name` and `customFields.<key>` address top-level fields. Anything absent
/// is `Null`; only an unbound alias is an error.
pub fn resolve_path(binding: &BindingSet<'_>, path: &PathRef) -> EResult {
    let su = binding
        .get(&path.alias)
        .ok_or_else(|| EvalError::UnboundAlias(path.alias.clone()))?;
    Ok(lookup(su, &path.segments))
}

fn lookup(su: &SensorUpdate, segs: &[String]) -> Value {
    let segs: Vec<&str> = segs.iter().map(String::as_str).collect();
    match segs.as_slice() {
        ["lastUpdate"] => Value::Number(su.last_update as f64),
        ["name"] => Value::Str(su.name.clone()),
        ["customFields", key] => su
            .custom_fields
            .as_ref()
            .and_then(|f| f.get(*key))
            .cloned()
            .unwrap_or(Value::Null),
        ["channels", channel, field] => {
            let Some(ch) = su.channel(channel) else {
                return Value::Null;
            };
            match *field {
                "current-value" => ch.current_value.clone(),
                "name" => Value::Str(ch.name.clone()),
                "unit" => ch.unit.clone().map_or(Value::Null, Value::Str),
                "type" => ch
                    .current_value
                    .value_type()
                    .map_or(Value::Null, |t| Value::Str(t.as_str().to_owned())),
                _ => Value::Null,
            }
        }
        _ => Value::Null,
    }
}

pub fn evaluate(expr: &Expr, b: &BindingSet<'_>) -> EResult {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Path(p) => resolve_path(b, p),
        Expr::Array(items) => Ok(Value::Array(
            items.iter().map(|e| evaluate(e, b)).collect::<Result<_, _>>()?,
        )),
        Expr::Unary(op, inner) => unary(*op, evaluate(inner, b)?),
        Expr::Binary(BinaryOp::And, l, r) => logical(true, l, r, b),
        Expr::Binary(BinaryOp::Or, l, r) => logical(false, l, r, b),
        Expr::Binary(op, l, r) => binary(*op, evaluate(l, b)?, evaluate(r, b)?),
        Expr::Conditional(c, t, e) => match evaluate(c, b)? {
            Value::Bool(true) => evaluate(t, b),
            Value::Bool(false) => evaluate(e, b),
            Value::Null => Err(EvalError::NullOperand("?:")),
            other => Err(mismatch("?:", format!("condition is a {}", other.type_name()))),
        },
        Expr::Call(f, args) => {
            let args = args
                .iter()
                .map(|e| evaluate(e, b))
                .collect::<Result<Vec<_>, _>>()?;
            call(*f, args)
        }
        Expr::Index(target, idx) => index(evaluate(target, b)?, evaluate(idx, b)?),
    }
}

fn mismatch(op: &'static str, detail: String) -> EvalError {
    EvalError::TypeMismatch { op, detail }
}

fn finite(op: &'static str, n: f64) -> EResult {
    if n.is_finite() {
        Ok(Value::Number(n))
    } else {
        Err(EvalError::Domain(format!("{op} produced {n}")))
    }
}

fn unary(op: UnaryOp, v: Value) -> EResult {
    match (op, v) {
        (UnaryOp::Not, Value::Bool(x)) => Ok(Value::Bool(!x)),
        (UnaryOp::Neg, Value::Number(n)) => Ok(Value::Number(-n)),
        (UnaryOp::Not, Value::Null) => Err(EvalError::NullOperand("!")),
        (UnaryOp::Neg, Value::Null) => Err(EvalError::NullOperand("-")),
        (UnaryOp::Not, v) => Err(mismatch("!", format!("operand is a {}", v.type_name()))),
        (UnaryOp::Neg, v) => Err(mismatch("-", format!("operand is a {}", v.type_name()))),
    }
}

fn logical(is_and: bool, l: &Expr, r: &Expr, b: &BindingSet<'_>) -> EResult {
    let sym = if is_and { "&&" } else { "||" };
    let as_bool = |v: Value| match v {
        Value::Bool(x) => Ok(x),
        Value::Null => Err(EvalError::NullOperand(sym)),
        other => Err(mismatch(sym, format!("operand is a {}", other.type_name()))),
    };
    let left = as_bool(evaluate(l, b)?)?;
    if left != is_and {
        return Ok(Value::Bool(left));
    }
    Ok(Value::Bool(as_bool(evaluate(r, b)?)?))
}

fn binary(op: BinaryOp, l: Value, r: Value) -> EResult {
    let sym = op.symbol();
    if l.is_null() || r.is_null() {
        return Err(EvalError::NullOperand(sym));
    }
    match op {
        BinaryOp::Eq => return Ok(Value::Bool(l == r)),
        BinaryOp::Ne => return Ok(Value::Bool(l != r)),
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
                (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
                (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
                _ => None,
            }
            .ok_or_else(|| mismatch(sym, format!("cannot compare {} with {}", l.type_name(), r.type_name())))?;
            use std::cmp::Ordering::*;
            let out = match op {
                BinaryOp::Lt => ord == Less,
                BinaryOp::Le => ord != Greater,
                BinaryOp::Gt => ord == Greater,
                _ => ord != Less,
            };
            return Ok(Value::Bool(out));
        }
        _ => {}
    }
    match (l, r) {
        (Value::Str(a), Value::Str(b)) if op == BinaryOp::Add => Ok(Value::Str(a + &b)),
        (Value::Number(a), Value::Number(b)) => match op {
            BinaryOp::Add => finite(sym, a + b),
            BinaryOp::Sub => finite(sym, a - b),
            BinaryOp::Mul => finite(sym, a * b),
            BinaryOp::Div if b == 0.0 => Err(EvalError::DivByZero),
            BinaryOp::Div => finite(sym, a / b),
            BinaryOp::Rem if b == 0.0 => Err(EvalError::DivByZero),
            BinaryOp::Rem => finite(sym, a % b),
            _ => unreachable!("non-arithmetic operator {sym}"),
        },
        (l, r) => Err(mismatch(
            sym,
            format!("operands are {} and {}", l.type_name(), r.type_name()),
        )),
    }
}

fn index(target: Value, idx: Value) -> EResult {
    if target.is_null() || idx.is_null() {
        return Err(EvalError::NullOperand("[]"));
    }
    let i = match idx {
        Value::Number(n) if n.fract() == 0.0 => n,
        other => return Err(mismatch("[]", format!("index is {}", other))),
    };
    match target {
        Value::Array(items) => Ok(usize_index(i).and_then(|i| items.into_iter().nth(i)).unwrap_or(Value::Null)),
        Value::Str(s) => Ok(usize_index(i)
            .and_then(|i| s.chars().nth(i))
            .map_or(Value::Null, |c| Value::Str(c.to_string()))),
        other => Err(mismatch("[]", format!("cannot index a {}", other.type_name()))),
    }
}

fn usize_index(n: f64) -> Option<usize> {
    (n >= 0.0 && n < usize::MAX as f64).then_some(n as usize)
}

fn num(f: Builtin, v: &Value) -> Result<f64, EvalError> {
    match v {
        Value::Number(n) => Ok(*n),
        other => Err(mismatch(f.name(), format!("expected number, got {}", other.type_name()))),
    }
}

fn string(f: Builtin, v: &Value) -> Result<&str, EvalError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(mismatch(f.name(), format!("expected string, got {}", other.type_name()))),
    }
}

fn array(f: Builtin, v: &Value) -> Result<&[Value], EvalError> {
    match v {
        Value::Array(a) => Ok(a),
        other => Err(mismatch(f.name(), format!("expected array, got {}", other.type_name()))),
    }
}

/// Integral position argument, clamped into `0..=len` the way slicing
/// functions clamp; negative positions count from the end when `from_end`.
fn position(f: Builtin, v: &Value, len: usize, from_end: bool) -> Result<usize, EvalError> {
    let n = num(f, v)?.trunc();
    let len_f = len as f64;
    let n = if from_end && n < 0.0 { len_f + n } else { n };
    Ok(n.clamp(0.0, len_f) as usize)
}

fn call(f: Builtin, args: Vec<Value>) -> EResult {
    if args.iter().any(Value::is_null) {
        return Err(EvalError::NullOperand(f.name()));
    }
    let name = f.name();
    match f {
        Builtin::MathAbs => finite(name, num(f, &args[0])?.abs()),
        Builtin::MathFloor => finite(name, num(f, &args[0])?.floor()),
        Builtin::MathCeil => finite(name, num(f, &args[0])?.ceil()),
        // Halves round towards +infinity.
        Builtin::MathRound => finite(name, (num(f, &args[0])? + 0.5).floor()),
        Builtin::MathSqrt => {
            let x = num(f, &args[0])?;
            if x < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative number {x}")));
            }
            finite(name, x.sqrt())
        }
        Builtin::MathPow => {
            let (b, e) = (num(f, &args[0])?, num(f, &args[1])?);
            let r = b.powf(e);
            if r.is_nan() {
                return Err(EvalError::Domain(format!("pow({b}, {e}) is undefined")));
            }
            finite(name, r)
        }
        Builtin::MathMin | Builtin::MathMax => {
            let mut acc = num(f, &args[0])?;
            for a in &args[1..] {
                let x = num(f, a)?;
                acc = if f == Builtin::MathMin { acc.min(x) } else { acc.max(x) };
            }
            Ok(Value::Number(acc))
        }
        Builtin::StrLength => Ok(Value::Number(string(f, &args[0])?.chars().count() as f64)),
        Builtin::StrUpper => Ok(Value::Str(string(f, &args[0])?.to_uppercase())),
        Builtin::StrLower => Ok(Value::Str(string(f, &args[0])?.to_lowercase())),
        Builtin::StrSubstring => {
            let s: Vec<char> = string(f, &args[0])?.chars().collect();
            let a = position(f, &args[1], s.len(), false)?;
            let b = match args.get(2) {
                Some(v) => position(f, v, s.len(), false)?,
                None => s.len(),
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            Ok(Value::Str(s[lo..hi].iter().collect()))
        }
        Builtin::StrIndexOf => {
            let (hay, needle) = (string(f, &args[0])?, string(f, &args[1])?);
            Ok(Value::Number(match hay.find(needle) {
                Some(byte) => hay[..byte].chars().count() as f64,
                None => -1.0,
            }))
        }
        Builtin::StrConcat => {
            let mut out = String::new();
            for a in &args {
                out.push_str(string(f, a)?);
            }
            Ok(Value::Str(out))
        }
        Builtin::ArrLength => Ok(Value::Number(array(f, &args[0])?.len() as f64)),
        Builtin::ArrConcat => {
            let mut out = Vec::new();
            for a in &args {
                out.extend_from_slice(array(f, a)?);
            }
            Ok(Value::Array(out))
        }
        Builtin::ArrSlice => {
            let items = array(f, &args[0])?;
            let a = position(f, &args[1], items.len(), true)?;
            let b = match args.get(2) {
                Some(v) => position(f, v, items.len(), true)?,
                None => items.len(),
            };
            Ok(Value::Array(if a < b { items[a..b].to_vec() } else { Vec::new() }))
        }
        Builtin::ArrIndexOf => {
            let items = array(f, &args[0])?;
            Ok(Value::Number(
                items.iter().position(|v| *v == args[1]).map_or(-1.0, |i| i as f64),
            ))
        }
        Builtin::ArrSum | Builtin::ArrAvg => {
            let items = array(f, &args[0])?;
            let mut sum = 0.0;
            for v in items {
                sum += num(f, v)?;
            }
            if f == Builtin::ArrSum {
                finite(name, sum)
            } else if items.is_empty() {
                Err(EvalError::Domain("avg of empty array".into()))
            } else {
                finite(name, sum / items.len() as f64)
            }
        }
    }
}
