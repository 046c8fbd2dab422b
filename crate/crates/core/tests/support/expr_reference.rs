//! Reference interpreter and case corpus for expression conformance.
//!
//! The interpreter evaluates directly while parsing and shares no code with
//! the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamflow_core::expr::{BindingSet, EvalError, Expression};
use streamflow_core::model::{ChannelValue, SensorUpdate, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum V {
    Null,
    Num(f64),
    Bool(bool),
    Str(String),
    Arr(Vec<V>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Parse,
    Unbound,
    Type,
    Null,
    DivZero,
    Domain,
}

pub type R = Result<V, Kind>;

// ---------------------------------------------------------------- fixtures

struct Chan {
    name: &'static str,
    value: V,
    unit: Option<&'static str>,
}

struct Doc {
    name: &'static str,
    last_update: u64,
    channels: Vec<Chan>,
    custom: Vec<(&'static str, V)>,
}

fn docs() -> Vec<(&'static str, Doc)> {
    vec![
        (
            "t",
            Doc {
                name: "data",
                last_update: 1000,
                channels: vec![
                    Chan { name: "temp", value: V::Num(14.5), unit: Some("C") },
                    Chan { name: "flag", value: V::Bool(true), unit: None },
                    Chan { name: "label", value: V::Str("Hot Day".into()), unit: None },
                    Chan {
                        name: "samples",
                        value: V::Arr(vec![V::Num(1.0), V::Num(2.0), V::Num(4.5)]),
                        unit: None,
                    },
                ],
                custom: vec![("site", V::Str("lab".into())), ("floor", V::Num(3.0))],
            },
        ),
        (
            "h",
            Doc {
                name: "humidity",
                last_update: 2500,
                channels: vec![Chan { name: "rh", value: V::Num(-61.25), unit: Some("%") }],
                custom: vec![],
            },
        ),
    ]
}

fn to_value(v: &V) -> Value {
    match v {
        V::Null => Value::Null,
        V::Num(n) => Value::Number(*n),
        V::Bool(b) => Value::Bool(*b),
        V::Str(s) => Value::Str(s.clone()),
        V::Arr(a) => Value::Array(a.iter().map(to_value).collect()),
    }
}

fn from_value(v: &Value) -> V {
    match v {
        Value::Null => V::Null,
        Value::Number(n) => V::Num(*n),
        Value::Bool(b) => V::Bool(*b),
        Value::Str(s) => V::Str(s.clone()),
        Value::Array(a) => V::Arr(a.iter().map(from_value).collect()),
    }
}

fn to_update(d: &Doc) -> SensorUpdate {
    let channels = d
        .channels
        .iter()
        .map(|c| {
            let mut cv = ChannelValue::new(c.name, to_value(&c.value));
            cv.unit = c.unit.map(str::to_owned);
            cv
        })
        .collect();
    let mut su = SensorUpdate::new(d.name, d.last_update, channels);
    if !d.custom.is_empty() {
        let fields: BTreeMap<String, Value> =
            d.custom.iter().map(|(k, v)| (k.to_string(), to_value(v))).collect();
        su.custom_fields = Some(fields);
    }
    su
}

// ------------------------------------------------------- reference evaluator

struct Ref<'a> {
    s: Vec<char>,
    i: usize,
    env: &'a [(&'static str, Doc)],
}

type P = Result<R, ()>;

pub fn ty(v: &V) -> &'static str {
    match v {
        V::Null => "null",
        V::Num(_) => "number",
        V::Bool(_) => "bool",
        V::Str(_) => "string",
        V::Arr(_) => "array",
    }
}

fn fin(x: f64) -> R {
    if x.is_finite() {
        Ok(V::Num(x))
    } else {
        Err(Kind::Domain)
    }
}

impl<'a> Ref<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn at(&mut self, lit: &str) -> bool {
        self.ws();
        let cs: Vec<char> = lit.chars().collect();
        self.s.get(self.i..self.i + cs.len()) == Some(&cs[..])
    }

    fn take(&mut self, lit: &str) -> bool {
        if self.at(lit) {
            self.i += lit.chars().count();
            true
        } else {
            false
        }
    }

    fn need(&mut self, lit: &str) -> Result<(), ()> {
        if self.take(lit) {
            Ok(())
        } else {
            Err(())
        }
    }

    fn top(&mut self) -> P {
        let v = self.cond()?;
        self.ws();
        if self.i != self.s.len() {
            return Err(());
        }
        Ok(v)
    }

    fn cond(&mut self) -> P {
        let c = self.or()?;
        if !self.take("?") {
            return Ok(c);
        }
        let a = self.cond()?;
        self.need(":")?;
        let b = self.cond()?;
        Ok(match c {
            Err(k) => Err(k),
            Ok(V::Bool(true)) => a,
            Ok(V::Bool(false)) => b,
            Ok(V::Null) => Err(Kind::Null),
            Ok(_) => Err(Kind::Type),
        })
    }

    fn logic(l: R, r: R, and: bool) -> R {
        let truth = |v: R| match v? {
            V::Bool(b) => Ok(b),
            V::Null => Err(Kind::Null),
            _ => Err(Kind::Type),
        };
        let a = truth(l)?;
        if a != and {
            return Ok(V::Bool(a));
        }
        Ok(V::Bool(truth(r)?))
    }

    fn or(&mut self) -> P {
        let mut l = self.and()?;
        while self.take("||") {
            let r = self.and()?;
            l = Self::logic(l, r, false);
        }
        Ok(l)
    }

    fn and(&mut self) -> P {
        let mut l = self.eq()?;
        while self.take("&&") {
            let r = self.eq()?;
            l = Self::logic(l, r, true);
        }
        Ok(l)
    }

    fn eq(&mut self) -> P {
        let mut l = self.rel()?;
        loop {
            let ne = if self.take("==") {
                false
            } else if self.take("!=") {
                true
            } else {
                return Ok(l);
            };
            let r = self.rel()?;
            l = (|| {
                let (a, b) = (l?, r?);
                if a == V::Null || b == V::Null {
                    return Err(Kind::Null);
                }
                Ok(V::Bool((a == b) != ne))
            })();
        }
    }

    fn rel(&mut self) -> P {
        let mut l = self.add()?;
        loop {
            let op = if self.take("<=") {
                "<="
            } else if self.take(">=") {
                ">="
            } else if self.take("<") {
                "<"
            } else if self.take(">") {
                ">"
            } else {
                return Ok(l);
            };
            let r = self.add()?;
            l = (|| {
                let (a, b) = (l?, r?);
                let ord = match (&a, &b) {
                    (V::Null, _) | (_, V::Null) => return Err(Kind::Null),
                    (V::Num(x), V::Num(y)) => x.partial_cmp(y).ok_or(Kind::Type)?,
                    (V::Str(x), V::Str(y)) => x.cmp(y),
                    (V::Bool(x), V::Bool(y)) => x.cmp(y),
                    _ => return Err(Kind::Type),
                };
                Ok(V::Bool(match op {
                    "<" => ord.is_lt(),
                    "<=" => ord.is_le(),
                    ">" => ord.is_gt(),
                    _ => ord.is_ge(),
                }))
            })();
        }
    }

    fn arith(op: char, l: R, r: R) -> R {
        let (a, b) = (l?, r?);
        match (a, b) {
            (V::Null, _) | (_, V::Null) => Err(Kind::Null),
            (V::Str(x), V::Str(y)) if op == '+' => Ok(V::Str(x + &y)),
            (V::Num(x), V::Num(y)) => match op {
                '+' => fin(x + y),
                '-' => fin(x - y),
                '*' => fin(x * y),
                _ if y == 0.0 => Err(Kind::DivZero),
                '/' => fin(x / y),
                _ => fin(x % y),
            },
            _ => Err(Kind::Type),
        }
    }

    fn add(&mut self) -> P {
        let mut l = self.mul()?;
        loop {
            let op = if self.take("+") {
                '+'
            } else if self.take("-") {
                '-'
            } else {
                return Ok(l);
            };
            let r = self.mul()?;
            l = Self::arith(op, l, r);
        }
    }

    fn mul(&mut self) -> P {
        let mut l = self.unary()?;
        loop {
            let op = if self.take("*") {
                '*'
            } else if self.take("/") {
                '/'
            } else if self.take("%") {
                '%'
            } else {
                return Ok(l);
            };
            let r = self.unary()?;
            l = Self::arith(op, l, r);
        }
    }

    fn unary(&mut self) -> P {
        if self.at("!=") {
            return Err(());
        }
        if self.take("!") {
            return Ok(self.unary()?.and_then(|v| match v {
                V::Bool(b) => Ok(V::Bool(!b)),
                V::Null => Err(Kind::Null),
                _ => Err(Kind::Type),
            }));
        }
        if self.take("-") {
            return Ok(self.unary()?.and_then(|v| match v {
                V::Num(n) => Ok(V::Num(-n)),
                V::Null => Err(Kind::Null),
                _ => Err(Kind::Type),
            }));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> P {
        let mut v = self.primary()?;
        while self.take("[") {
            let idx = self.cond()?;
            self.need("]")?;
            v = (|| {
                let (t, k) = (v?, idx?);
                if t == V::Null || k == V::Null {
                    return Err(Kind::Null);
                }
                let k = match k {
                    V::Num(n) if n == n.trunc() => n,
                    _ => return Err(Kind::Type),
                };
                match t {
                    V::Arr(items) => Ok(if k < 0.0 {
                        V::Null
                    } else {
                        items.get(k as usize).cloned().unwrap_or(V::Null)
                    }),
                    V::Str(s) => Ok(if k < 0.0 {
                        V::Null
                    } else {
                        s.chars().nth(k as usize).map_or(V::Null, |c| V::Str(c.to_string()))
                    }),
                    _ => Err(Kind::Type),
                }
            })();
        }
        Ok(v)
    }

    fn number(&mut self) -> Result<f64, ()> {
        let start = self.i;
        let digits = |me: &mut Self| {
            while me.i < me.s.len() && me.s[me.i].is_ascii_digit() {
                me.i += 1;
            }
        };
        digits(self);
        if self.s.get(self.i) == Some(&'.') && self.s.get(self.i + 1).is_some_and(char::is_ascii_digit) {
            self.i += 1;
            digits(self);
        }
        if matches!(self.s.get(self.i), Some('e' | 'E')) {
            self.i += 1;
            if matches!(self.s.get(self.i), Some('+' | '-')) {
                self.i += 1;
            }
            if !self.s.get(self.i).is_some_and(char::is_ascii_digit) {
                return Err(());
            }
            digits(self);
        }
        if self.s.get(self.i).is_some_and(|c| c.is_ascii_alphabetic() || *c == '_') {
            return Err(());
        }
        let text: String = self.s[start..self.i].iter().collect();
        text.parse::<f64>().ok().filter(|n| n.is_finite()).ok_or(())
    }

    fn string(&mut self, q: char) -> Result<String, ()> {
        self.i += 1;
        let mut out = String::new();
        loop {
            let c = *self.s.get(self.i).ok_or(())?;
            self.i += 1;
            if c == q {
                return Ok(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let e = *self.s.get(self.i).ok_or(())?;
            self.i += 1;
            out.push(match e {
                'n' => '\n',
                't' => '\t',
                'r' => '\r',
                '0' => '\0',
                '\\' | '\'' | '"' => e,
                _ => return Err(()),
            });
        }
    }

    fn path(&mut self) -> P {
        let close = self.s[self.i..].iter().position(|&c| c == '}').ok_or(())? + self.i;
        let inner: String = self.s[self.i + 1..close].iter().collect();
        self.i = close + 1;
        let inner = inner.trim_start().strip_prefix('$').ok_or(())?;
        let parts: Vec<&str> = inner.split('.').map(str::trim).collect();
        let good = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !parts.iter().all(|p| good(p)) {
            return Err(());
        }
        let Some((_, doc)) = self.env.iter().find(|(a, _)| *a == parts[0]) else {
            return Ok(Err(Kind::Unbound));
        };
        let v = match &parts[1..] {
            ["lastUpdate"] => V::Num(doc.last_update as f64),
            ["name"] => V::Str(doc.name.into()),
            ["customFields", k] => doc.custom.iter().find(|(n, _)| n == k).map_or(V::Null, |(_, v)| v.clone()),
            ["channels", ch, field] => match doc.channels.iter().find(|c| c.name == *ch) {
                None => V::Null,
                Some(c) => match *field {
                    "current-value" => c.value.clone(),
                    "name" => V::Str(c.name.into()),
                    "unit" => c.unit.map_or(V::Null, |u| V::Str(u.into())),
                    "type" => match c.value {
                        V::Num(_) => V::Str("numeric".into()),
                        V::Bool(_) => V::Str("boolean".into()),
                        V::Str(_) => V::Str("string".into()),
                        V::Arr(_) => V::Str("array".into()),
                        V::Null => V::Null,
                    },
                    _ => V::Null,
                },
            },
            _ => V::Null,
        };
        Ok(Ok(v))
    }

    fn items(&mut self, close: &str) -> Result<Vec<R>, ()> {
        let mut out = Vec::new();
        if self.take(close) {
            return Ok(out);
        }
        loop {
            out.push(self.cond()?);
            if self.take(close) {
                return Ok(out);
            }
            self.need(",")?;
        }
    }

    fn word(&mut self) -> String {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == '_') {
            self.i += 1;
        }
        self.s[start..self.i].iter().collect()
    }

    fn primary(&mut self) -> P {
        self.ws();
        let Some(&c) = self.s.get(self.i) else {
            return Err(());
        };
        match c {
            '0'..='9' => Ok(Ok(V::Num(self.number()?))),
            '.' if self.s.get(self.i + 1).is_some_and(char::is_ascii_digit) => Ok(Ok(V::Num(self.number()?))),
            '"' | '\'' => Ok(Ok(V::Str(self.string(c)?))),
            '{' => self.path(),
            '(' => {
                self.i += 1;
                let v = self.cond()?;
                self.need(")")?;
                Ok(v)
            }
            '[' => {
                self.i += 1;
                let items = self.items("]")?;
                Ok(items.into_iter().collect::<Result<Vec<_>, _>>().map(V::Arr))
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let ns = self.word();
                match ns.as_str() {
                    "true" => return Ok(Ok(V::Bool(true))),
                    "false" => return Ok(Ok(V::Bool(false))),
                    _ => {}
                }
                self.need(".")?;
                let f = format!("{ns}.{}", self.word());
                let (lo, hi) = match f.as_str() {
                    "math.min" | "math.max" | "str.concat" | "arr.concat" => (1, usize::MAX),
                    "math.pow" | "str.indexOf" | "arr.indexOf" => (2, 2),
                    "str.substring" | "arr.slice" => (2, 3),
                    "math.abs" | "math.floor" | "math.ceil" | "math.round" | "math.sqrt" | "str.length"
                    | "str.upper" | "str.lower" | "arr.length" | "arr.sum" | "arr.avg" => (1, 1),
                    _ => return Err(()),
                };
                self.need("(")?;
                let args = self.items(")")?;
                if args.len() < lo || args.len() > hi {
                    return Err(());
                }
                Ok(args.into_iter().collect::<Result<Vec<_>, _>>().and_then(|a| builtin(&f, a)))
            }
            _ => Err(()),
        }
    }
}

fn builtin(f: &str, a: Vec<V>) -> R {
    if a.contains(&V::Null) {
        return Err(Kind::Null);
    }
    let n = |v: &V| match v {
        V::Num(x) => Ok(*x),
        _ => Err(Kind::Type),
    };
    let s = |v: &V| match v {
        V::Str(x) => Ok(x.clone()),
        _ => Err(Kind::Type),
    };
    let arr = |v: &V| match v {
        V::Arr(x) => Ok(x.clone()),
        _ => Err(Kind::Type),
    };
    // truncate, optionally count negatives from the end, clamp to 0..=len
    let pos = |v: &V, len: usize, from_end: bool| -> Result<usize, Kind> {
        let mut x = n(v)?.trunc();
        if from_end && x < 0.0 {
            x += len as f64;
        }
        Ok(if x < 0.0 { 0 } else if x > len as f64 { len } else { x as usize })
    };
    match f {
        "math.abs" => fin(n(&a[0])?.abs()),
        "math.floor" => fin(n(&a[0])?.floor()),
        "math.ceil" => fin(n(&a[0])?.ceil()),
        "math.round" => fin((n(&a[0])? + 0.5).floor()),
        "math.sqrt" => {
            let x = n(&a[0])?;
            if x < 0.0 {
                Err(Kind::Domain)
            } else {
                fin(x.sqrt())
            }
        }
        "math.pow" => fin(n(&a[0])?.powf(n(&a[1])?)),
        "math.min" | "math.max" => {
            let xs = a.iter().map(n).collect::<Result<Vec<_>, _>>()?;
            let pick = if f == "math.min" { f64::min } else { f64::max };
            Ok(V::Num(xs[1..].iter().fold(xs[0], |acc, &x| pick(acc, x))))
        }
        "str.length" => Ok(V::Num(s(&a[0])?.chars().count() as f64)),
        "str.upper" => Ok(V::Str(s(&a[0])?.to_uppercase())),
        "str.lower" => Ok(V::Str(s(&a[0])?.to_lowercase())),
        "str.substring" => {
            let cs: Vec<char> = s(&a[0])?.chars().collect();
            let x = pos(&a[1], cs.len(), false)?;
            let y = match a.get(2) {
                Some(v) => pos(v, cs.len(), false)?,
                None => cs.len(),
            };
            Ok(V::Str(cs[x.min(y)..x.max(y)].iter().collect()))
        }
        "str.indexOf" => {
            let (hay, needle): (Vec<char>, Vec<char>) = (s(&a[0])?.chars().collect(), s(&a[1])?.chars().collect());
            let hit = (0..=hay.len()).find(|&i| hay[i..].starts_with(&needle));
            Ok(V::Num(hit.map_or(-1.0, |i| i as f64)))
        }
        "str.concat" => Ok(V::Str(a.iter().map(s).collect::<Result<String, _>>()?)),
        "arr.length" => Ok(V::Num(arr(&a[0])?.len() as f64)),
        "arr.concat" => Ok(V::Arr(a.iter().map(arr).collect::<Result<Vec<_>, _>>()?.concat())),
        "arr.slice" => {
            let items = arr(&a[0])?;
            let x = pos(&a[1], items.len(), true)?;
            let y = match a.get(2) {
                Some(v) => pos(v, items.len(), true)?,
                None => items.len(),
            };
            Ok(V::Arr(if x < y { items[x..y].to_vec() } else { vec![] }))
        }
        "arr.indexOf" => {
            let items = arr(&a[0])?;
            Ok(V::Num(items.iter().position(|v| *v == a[1]).map_or(-1.0, |i| i as f64)))
        }
        "arr.sum" | "arr.avg" => {
            let items = arr(&a[0])?;
            let xs = items.iter().map(n).collect::<Result<Vec<_>, _>>()?;
            let total: f64 = xs.iter().sum();
            if f == "arr.sum" {
                fin(total)
            } else if xs.is_empty() {
                Err(Kind::Domain)
            } else {
                fin(total / xs.len() as f64)
            }
        }
        _ => unreachable!("{f}"),
    }
}

fn reference(src: &str, env: &[(&'static str, Doc)]) -> R {
    let mut r = Ref { s: src.chars().collect(), i: 0, env };
    if src.trim().is_empty() {
        return Err(Kind::Parse);
    }
    r.top().unwrap_or(Err(Kind::Parse))
}

// ------------------------------------------------------------- comparison

fn library(src: &str, updates: &[(&'static str, SensorUpdate)]) -> R {
    let expr = Expression::parse(src).map_err(|_| Kind::Parse)?;
    let mut b = BindingSet::new();
    for (alias, su) in updates {
        b.bind(alias, su);
    }
    expr.evaluate(&b).map(|v| from_value(&v)).map_err(|e| match e {
        EvalError::UnboundAlias(_) => Kind::Unbound,
        EvalError::TypeMismatch { .. } => Kind::Type,
        EvalError::NullOperand(_) => Kind::Null,
        EvalError::DivByZero => Kind::DivZero,
        EvalError::Domain(_) => Kind::Domain,
    })
}

fn close(a: &V, b: &V) -> bool {
    match (a, b) {
        (V::Num(x), V::Num(y)) => x == y || (x - y).abs() <= 1e-12 * x.abs().max(y.abs()),
        (V::Arr(x), V::Arr(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p, q)),
        _ => a == b,
    }
}

fn agree(lib: &R, oracle: &R) -> bool {
    match (lib, oracle) {
        (Ok(a), Ok(b)) => close(a, b),
        (Err(a), Err(b)) => a == b,
        _ => false,
    }
}

pub struct Harness {
    env: Vec<(&'static str, Doc)>,
    updates: Vec<(&'static str, SensorUpdate)>,
}

impl Harness {
    pub fn new() -> Self {
        let env = docs();
        let updates = env.iter().map(|(a, d)| (*a, to_update(d))).collect();
        Self { env, updates }
    }

    pub fn check(&self, src: &str) -> Result<R, String> {
        let lib = library(src, &self.updates);
        let oracle = reference(src, &self.env);
        if agree(&lib, &oracle) {
            Ok(oracle)
        } else {
            Err(format!("{src:?}: library {lib:?}, reference {oracle:?}"))
        }
    }
}

pub const CORPUS: &[&str] = &[
    // arithmetic
    "1 + 2",
    "7 - 10",
    "6 * 7",
    "1 / 3",
    "7 % 3",
    "-7 % 3",
    "7.5 % 2",
    "0.1 + 0.2",
    "1e3 + 2.5E-2",
    ".5 * 4",
    "2 * 3 + 4",
    "2 * (3 + 4)",
    "10 - 4 - 3",
    "100 / 10 / 5",
    "-3 * -3",
    "--4",
    "-(2 + 3) * 2",
    "1 + 2 * 3 - 4 / 8 % 3",
    "(1 + 2) * (3 - 4) / (5 % 3)",
    "1e308 * 10",
    "1 / 0",
    "5 % 0",
    "0 / 0",
    // comparison and equality
    "1 < 2",
    "2 <= 2",
    "3 > 4",
    "4 >= 4.0",
    "'abc' < 'abd'",
    "'b' > 'abc'",
    "false < true",
    "1 == 1.0",
    "1 != 2",
    "'a' == 'a'",
    "1 == '1'",
    "[1, 2] == [1, 2]",
    "[1, [2, 3]] != [1, [2, 4]]",
    "true == 1",
    "1 < '2'",
    "1 + 2 == 3 && 2 * 2 == 4",
    "1 < 2 == true",
    // logic and ternary
    "true && false",
    "true || false",
    "!true || !false",
    "false && (1 / 0 > 0)",
    "true || 'x'",
    "false || 'x'",
    "1 && true",
    "!1",
    "true ? 1 : 2",
    "false ? 1 : 2",
    "1 > 2 ? 'big' : 'small'",
    "true ? false ? 1 : 2 : 3",
    "false ? 1 : true ? 2 : 3",
    "true ? 1 : 1 / 0",
    "1 ? 2 : 3",
    "true || false && false",
    "(true || false) && false",
    // strings and arrays
    "'foo' + 'bar'",
    "\"dq\" + 'sq'",
    "'a\\tb\\n' + \"\\\"q\\\"\"",
    "'x' + 1",
    "'x' - 'y'",
    "[1, 'two', true, [3]]",
    "[]",
    "[1, 2, 3][1]",
    "[1, 2, 3][5]",
    "[1, 2, 3][-1]",
    "[1, 2, 3][0.5]",
    "'héllo'[1]",
    "'abc'['0']",
    "5[0]",
    "[[1, 2], [3, 4]][1][0]",
    // math builtins
    "math.abs(-3.5)",
    "math.floor(-2.5)",
    "math.ceil(2.1)",
    "math.round(2.5)",
    "math.round(-2.5)",
    "math.round(-2.6)",
    "math.sqrt(16)",
    "math.sqrt(-1)",
    "math.pow(2, 10)",
    "math.pow(-8, 1 / 3)",
    "math.pow(10, 400)",
    "math.min(3, 1, 2)",
    "math.max(-1)",
    "math.max(1, 'a')",
    "math.min()",
    "math.pow(2)",
    "math.nope(1)",
    "math . abs ( -1 )",
    // string builtins
    "str.length('héllo')",
    "str.upper('MiXed')",
    "str.lower('MiXed')",
    "str.substring('streamflow', 6)",
    "str.substring('streamflow', 2, 6)",
    "str.substring('streamflow', 6, 2)",
    "str.substring('abc', -5, 99)",
    "str.substring('abc', 1.9)",
    "str.indexOf('banana', 'nan')",
    "str.indexOf('héllo', 'l')",
    "str.indexOf('abc', 'z')",
    "str.indexOf('abc', '')",
    "str.concat('a', 'b', 'c')",
    "str.concat('a', 1)",
    "str.length(12)",
    // array builtins
    "arr.length([1, 2, 3])",
    "arr.concat([1], [2, 3], [])",
    "arr.slice([1, 2, 3, 4, 5], 1, 3)",
    "arr.slice([1, 2, 3, 4, 5], -2)",
    "arr.slice([1, 2, 3, 4, 5], 3, 1)",
    "arr.slice([1, 2, 3], -10, 10)",
    "arr.indexOf([1, 'a', [2]], [2])",
    "arr.indexOf([1, 2], 3)",
    "arr.sum([1, 2, 3.5])",
    "arr.sum([])",
    "arr.avg([2, 4])",
    "arr.avg([])",
    "arr.sum([1, 'x'])",
    "arr.length('abc')",
    // path references
    "{$t.channels.temp.current-value}",
    "{$t.channels.temp.current-value} * 9 / 5 + 32",
    "{ $t . channels . temp . current-value } - 0.5",
    "{$t.channels.temp.unit}",
    "{$t.channels.temp.name}",
    "{$t.channels.temp.type}",
    "{$t.channels.label.type}",
    "{$t.channels.flag.current-value} ? 'on' : 'off'",
    "str.upper({$t.channels.label.current-value})",
    "arr.avg({$t.channels.samples.current-value})",
    "{$t.channels.samples.current-value}[2]",
    "{$t.channels.missing.current-value}",
    "{$t.channels.missing.current-value} + 1",
    "{$t.channels.flag.unit}",
    "{$t.lastUpdate} + {$h.lastUpdate}",
    "{$t.name} + '/' + {$h.name}",
    "{$t.customFields.site}",
    "{$t.customFields.floor} * 2",
    "{$h.customFields.site}",
    "{$t.channels}",
    "{$h.channels.rh.current-value} < 0 && {$t.channels.temp.current-value} > 0",
    "math.abs({$h.channels.rh.current-value}) + math.max({$t.channels.temp.current-value}, 20)",
    "{$x.channels.temp.current-value}",
    "false && {$x.lastUpdate} > 0",
    "{$t.channels.temp.current-value} > 10 ? {$t.channels.temp.current-value} - 24 : {$t.channels.temp.current-value}",
    // parse errors
    "",
    "   ",
    "1 +",
    "(1 + 2",
    "1 2",
    "1 = 2",
    "1 & 2",
    "true ? 1",
    "'unterminated",
    "'bad \\q escape'",
    "{t.channels.temp.current-value}",
    "{$t..x}",
    "{$t.channels.temp",
    "12abc",
    "1e+",
    "foo",
    "[1, 2",
    "[1, , 2]",
    "math.abs(1,)",
    "1 # 2",
    "null",
];

// --------------------------------------------------------- random corpus

pub fn gen(rng: &mut ChaCha8Rng, depth: u32) -> String {
    const LEAVES: &[&str] = &[
        "0",
        "1",
        "2.5",
        "-3",
        "1e2",
        "0.1",
        "'ab'",
        "'Zé'",
        "true",
        "false",
        "[1, 2, 3]",
        "[]",
        "{$t.channels.temp.current-value}",
        "{$h.channels.rh.current-value}",
        "{$t.channels.label.current-value}",
        "{$t.channels.samples.current-value}",
        "{$t.channels.flag.current-value}",
        "{$t.lastUpdate}",
        "{$t.channels.nothing.current-value}",
    ];
    if depth == 0 || rng.random_bool(0.25) {
        return LEAVES[rng.random_range(0..LEAVES.len())].to_owned();
    }
    let d = depth - 1;
    match rng.random_range(0..10) {
        0..=3 => {
            const OPS: &[&str] = &["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"];
            let op = OPS[rng.random_range(0..OPS.len())];
            format!("{} {op} {}", gen(rng, d), gen(rng, d))
        }
        4 => format!("({})", gen(rng, d)),
        5 => format!("{}{}", if rng.random_bool(0.5) { "-" } else { "!" }, gen(rng, d)),
        6 => format!("{} ? {} : {}", gen(rng, d), gen(rng, d), gen(rng, d)),
        7 => format!("{}[{}]", gen(rng, d), gen(rng, d)),
        8 => format!("[{}, {}]", gen(rng, d), gen(rng, d)),
        _ => {
            const FNS: &[(&str, usize)] = &[
                ("math.abs", 1),
                ("math.floor", 1),
                ("math.round", 1),
                ("math.sqrt", 1),
                ("math.pow", 2),
                ("math.min", 3),
                ("math.max", 2),
                ("str.length", 1),
                ("str.upper", 1),
                ("str.substring", 3),
                ("str.indexOf", 2),
                ("str.concat", 2),
                ("arr.length", 1),
                ("arr.slice", 2),
                ("arr.sum", 1),
                ("arr.avg", 1),
                ("arr.indexOf", 2),
                ("arr.concat", 2),
            ];
            let (f, k) = FNS[rng.random_range(0..FNS.len())];
            let args: Vec<String> = (0..k).map(|_| gen(rng, d)).collect();
            format!("{f}({})", args.join(", "))
        }
    }
}


/// Outcome class of a case: the result type or the error kind.
pub fn class(r: &R) -> &'static str {
    match r {
        Ok(v) => ty(v),
        Err(Kind::Parse) => "parse",
        Err(Kind::Unbound) => "unbound",
        Err(Kind::Type) => "type",
        Err(Kind::Null) => "nulloperand",
        Err(Kind::DivZero) => "divzero",
        Err(Kind::Domain) => "domain",
    }
}

pub const CLASSES: [&str; 11] = [
    "number", "bool", "string", "array", "null", "parse", "unbound", "type", "nulloperand", "divzero", "domain",
];

pub struct Summary {
    pub cases: usize,
    pub numeric: usize,
    pub classes: BTreeMap<&'static str, usize>,
    pub mismatches: Vec<String>,
}

/// Runs the handwritten corpus plus `random` seeded expressions.
pub fn run(random: usize, seed: u64) -> Summary {
    let h = Harness::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_cases = (0..random).map(|_| gen(&mut rng, 4));
    let mut out = Summary {
        cases: 0,
        numeric: 0,
        classes: BTreeMap::new(),
        mismatches: Vec::new(),
    };
    for src in CORPUS.iter().map(|s| s.to_string()).chain(random_cases) {
        out.cases += 1;
        match h.check(&src) {
            Ok(r) => {
                if matches!(r, Ok(V::Num(_))) {
                    out.numeric += 1;
                }
                *out.classes.entry(class(&r)).or_insert(0) += 1;
            }
            Err(e) => out.mismatches.push(e),
        }
    }
    out
}
