//! Sandboxed expression language for user-supplied transformation and
//! filter code.
//!
//! The language is closed: literals, path references into bound sensor
//! updates, arithmetic/comparison/logical operators, the ternary
//! conditional, array literals and indexing, and a fixed whitelist of
//! builtin functions. There are no assignments, loops or definitions, so
//! evaluation cost is linear in the size of the tree and performs no I/O.

mod ast;
mod eval;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use ast::{BinaryOp, Builtin, Expr, PathRef, UnaryOp};
pub use eval::resolve_path;
pub use parser::{MAX_DEPTH, MAX_SOURCE_LEN};

use crate::model::{SensorUpdate, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function {name:?} at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("alias {0:?} is not bound")]
    UnboundAlias(String),
    #[error("type mismatch in {op}: {detail}")]
    TypeMismatch { op: &'static str, detail: String },
    #[error("null operand to {0}")]
    NullOperand(&'static str),
    #[error("division by zero")]
    DivByZero,
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("filter error: {0}")]
    Eval(#[from] EvalError),
    #[error("filter produced a {0}, not a bool")]
    NotBool(&'static str),
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Expression {
    source: String,
    ast: Expr,
    aliases: BTreeSet<String>,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let ast = parser::parse(text)?;
        let mut aliases = BTreeSet::new();
        collect_aliases(&ast, &mut aliases);
        Ok(Self {
            source: text.to_owned(),
            ast,
            aliases,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Aliases referenced by `{$alias...}` paths, sorted.
    pub fn aliases(&self) -> impl Iterator<Item = &String> {
        self.aliases.iter()
    }

    pub fn evaluate(&self, binding: &BindingSet<'_>) -> Result<Value, EvalError> {
        eval::evaluate(&self.ast, binding)
    }

    /// Evaluates a filter assertion; anything but a `Bool` is an error.
    pub fn evaluate_filter(&self, binding: &BindingSet<'_>) -> Result<bool, FilterError> {
        match self.evaluate(binding)? {
            Value::Bool(b) => Ok(b),
            other => Err(FilterError::NotBool(other.type_name())),
        }
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Expression").field(&self.source).finish()
    }
}

fn collect_aliases(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Literal(_) => {}
        Expr::Path(p) => {
            out.insert(p.alias.clone());
        }
        Expr::Array(items) | Expr::Call(_, items) => {
            items.iter().for_each(|i| collect_aliases(i, out));
        }
        Expr::Unary(_, x) => collect_aliases(x, out),
        Expr::Binary(_, l, r) | Expr::Index(l, r) => {
            collect_aliases(l, out);
            collect_aliases(r, out);
        }
        Expr::Conditional(c, t, f) => {
            collect_aliases(c, out);
            collect_aliases(t, out);
            collect_aliases(f, out);
        }
    }
}

/// Sensor updates visible to an expression, by alias.
#[derive(Debug, Default, Clone)]
pub struct BindingSet<'a> {
    entries: Vec<(&'a str, &'a SensorUpdate)>,
}

impl<'a> BindingSet<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `alias`, replacing any earlier binding of the same name.
    pub fn bind(&mut self, alias: &'a str, su: &'a SensorUpdate) -> &mut Self {
        match self.entries.iter_mut().find(|(a, _)| *a == alias) {
            Some(slot) => slot.1 = su,
            None => self.entries.push((alias, su)),
        }
        self
    }

    pub fn with(mut self, alias: &'a str, su: &'a SensorUpdate) -> Self {
        self.bind(alias, su);
        self
    }

    pub fn get(&self, alias: &str) -> Option<&'a SensorUpdate> {
        self.entries.iter().find(|(a, _)| *a == alias).map(|(_, s)| *s)
    }

    pub fn contains(&self, alias: &str) -> bool {
        self.get(alias).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelValue;

    fn num(n: f64) -> Box<Expr> {
        Box::new(Expr::Literal(Value::Number(n)))
    }

    fn update(temp: f64) -> SensorUpdate {
        SensorUpdate::new("t", 10, vec![ChannelValue::new("temp", Value::Number(temp))])
    }

    fn eval(text: &str) -> Result<Value, EvalError> {
        Expression::parse(text).unwrap().evaluate(&BindingSet::new())
    }

    const FROZEN: &str = "({$fahrenheit.channels.temp.current-value} - 32) / 1.8";
    const FROZEN_POST: &str = "({$result.channels.temp.current-value} < 0)";

    #[test]
    fn frozencelsius_ast() {
        let e = Expression::parse(FROZEN).unwrap();
        let path = Expr::Path(PathRef {
            alias: "fahrenheit".into(),
            segments: vec!["channels".into(), "temp".into(), "current-value".into()],
        });
        let want = Expr::Binary(
            BinaryOp::Div,
            Box::new(Expr::Binary(BinaryOp::Sub, Box::new(path), num(32.0))),
            num(1.8),
        );
        assert_eq!(e.ast(), &want);
        assert_eq!(e.aliases().collect::<Vec<_>>(), ["fahrenheit"]);
    }

    #[test]
    fn precedence() {
        let e = Expression::parse("1 + 2 * 3").unwrap();
        let want = Expr::Binary(
            BinaryOp::Add,
            num(1.0),
            Box::new(Expr::Binary(BinaryOp::Mul, num(2.0), num(3.0))),
        );
        assert_eq!(e.ast(), &want);
    }

    #[test]
    fn unterminated_reference_reports_offset_zero() {
        let err = Expression::parse("{$a.x").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 0, .. }), "{err:?}");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Expression::parse("math.cbrt(8)"),
            Err(ParseError::UnknownFunction { .. })
        ));
        assert!(Expression::parse("").is_err());
        assert!(Expression::parse("1 +").is_err());
        assert!(Expression::parse("(1").is_err());
        assert!(Expression::parse("a = 1").is_err());
        assert!(Expression::parse("x").is_err());
        assert!(Expression::parse("math.pow(1)").is_err());
        assert!(Expression::parse("'abc").is_err());
        assert!(Expression::parse("1 2").is_err());
        assert!(Expression::parse("1e").is_err());
    }

    #[test]
    fn deep_nesting_is_a_syntax_error() {
        let deep = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(Expression::parse(&deep).is_err());
        let chain = vec!["1"; 20_000].join(" + ");
        assert!(Expression::parse(&chain).is_err());
        let negs = format!("{}1", "!".repeat(10_000));
        assert!(Expression::parse(&negs).is_err());
    }

    #[test]
    fn resolve_posting_data_paths() {
        let su: SensorUpdate = serde_json::from_str(
            r#"{"channels":[{"name":"temp","current-value":22.58,"type":"numeric","unit":"m/s2"}],
                "name":"temperature","lastUpdate":194896800,
                "customFields":{"covered-period":"24h","averageLastHour":32,"risk":"low","averageLastDay":42}}"#,
        )
        .unwrap();
        let b = BindingSet::new().with("s", &su);
        let path = |segs: &str| PathRef {
            alias: "s".into(),
            segments: segs.split('.').map(str::to_owned).collect(),
        };
        assert_eq!(resolve_path(&b, &path("channels.temp.current-value")), Ok(Value::Number(22.58)));
        assert_eq!(resolve_path(&b, &path("customFields.averageLastHour")), Ok(Value::Number(32.0)));
        assert_eq!(resolve_path(&b, &path("channels.nosuch.current-value")), Ok(Value::Null));
        assert_eq!(resolve_path(&b, &path("lastUpdate")), Ok(Value::Number(194896800.0)));
        let unbound = PathRef {
            alias: "zz".into(),
            segments: vec!["lastUpdate".into()],
        };
        assert_eq!(resolve_path(&b, &unbound), Err(EvalError::UnboundAlias("zz".into())));
    }

    #[test]
    fn frozencelsius_evaluation() {
        let e = Expression::parse(FROZEN).unwrap();
        let src = update(14.0);
        let out = e.evaluate(&BindingSet::new().with("fahrenheit", &src)).unwrap();
        assert_eq!(out, Value::Number(-10.0));

        let post = Expression::parse(FROZEN_POST).unwrap();
        let cold = update(-10.0);
        assert_eq!(post.evaluate_filter(&BindingSet::new().with("result", &cold)), Ok(true));
        let zero = update(0.0);
        assert_eq!(post.evaluate_filter(&BindingSet::new().with("result", &zero)), Ok(false));
    }

    #[test]
    fn ternary_and_filters() {
        assert_eq!(eval("true ? \"a\" : \"b\""), Ok(Value::Str("a".into())));
        let f = Expression::parse("1 < 2").unwrap();
        assert_eq!(f.evaluate_filter(&BindingSet::new()), Ok(true));
        let f = Expression::parse("1 + 1").unwrap();
        assert_eq!(f.evaluate_filter(&BindingSet::new()), Err(FilterError::NotBool("number")));
    }

    #[test]
    fn coercion_rules() {
        assert_eq!(eval("'a' + 'b'"), Ok(Value::Str("ab".into())));
        assert!(matches!(eval("'a' + 1"), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(eval("'a' < 1"), Err(EvalError::TypeMismatch { .. })));
        assert_eq!(eval("'a' == 1"), Ok(Value::Bool(false)));
        assert_eq!(eval("[1, 2] == [1, 2]"), Ok(Value::Bool(true)));
        assert!(matches!(eval("1 ? 2 : 3"), Err(EvalError::TypeMismatch { .. })));
        assert_eq!(eval("1 / 0"), Err(EvalError::DivByZero));
        assert_eq!(eval("1 % 0"), Err(EvalError::DivByZero));
        assert!(matches!(eval("math.sqrt(-1)"), Err(EvalError::Domain(_))));
        assert_eq!(eval("false && 1 / 0 > 0"), Ok(Value::Bool(false)));
        assert_eq!(eval("true || 1 / 0 > 0"), Ok(Value::Bool(true)));
        assert!(matches!(eval("1 && true"), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn null_operands_are_rejected() {
        let su = update(1.0);
        let b = BindingSet::new().with("s", &su);
        let e = Expression::parse("{$s.channels.missing.current-value} + 1").unwrap();
        assert_eq!(e.evaluate(&b), Err(EvalError::NullOperand("+")));
        let e = Expression::parse("math.abs({$s.customFields.x})").unwrap();
        assert_eq!(e.evaluate(&b), Err(EvalError::NullOperand("math.abs")));
        let e = Expression::parse("{$s.customFields.x} == 1").unwrap();
        assert_eq!(e.evaluate(&b), Err(EvalError::NullOperand("==")));
    }

    #[test]
    fn builtins() {
        let cases: &[(&str, Value)] = &[
            ("math.abs(-2.5)", Value::Number(2.5)),
            ("math.min(3, 1, 2)", Value::Number(1.0)),
            ("math.max(3, 1, 2)", Value::Number(3.0)),
            ("math.floor(-1.5)", Value::Number(-2.0)),
            ("math.ceil(1.2)", Value::Number(2.0)),
            ("math.round(2.5)", Value::Number(3.0)),
            ("math.round(-2.5)", Value::Number(-2.0)),
            ("math.sqrt(16)", Value::Number(4.0)),
            ("math.pow(2, 10)", Value::Number(1024.0)),
            ("str.length('héllo')", Value::Number(5.0)),
            ("str.upper('ab')", Value::Str("AB".into())),
            ("str.lower('AB')", Value::Str("ab".into())),
            ("str.substring('abcdef', 4, 1)", Value::Str("bcd".into())),
            ("str.substring('abcdef', 2)", Value::Str("cdef".into())),
            ("str.indexOf('abcabc', 'ca')", Value::Number(2.0)),
            ("str.indexOf('abc', 'z')", Value::Number(-1.0)),
            ("str.concat('a', 'b', 'c')", Value::Str("abc".into())),
            ("arr.length([1, 2, 3])", Value::Number(3.0)),
            ("arr.concat([1], [2, 3])", Value::Array(vec![1.0.into(), 2.0.into(), 3.0.into()])),
            ("arr.slice([1, 2, 3, 4], 1, -1)", Value::Array(vec![2.0.into(), 3.0.into()])),
            ("arr.indexOf([1, 2, 3], 3)", Value::Number(2.0)),
            ("arr.sum([1, 2, 3.5])", Value::Number(6.5)),
            ("arr.avg([1, 2, 3])", Value::Number(2.0)),
            ("[10, 20, 30][1]", Value::Number(20.0)),
            ("[10][5]", Value::Null),
        ];
        for (text, want) in cases {
            assert_eq!(eval(text).as_ref(), Ok(want), "{text}");
        }
        assert!(matches!(eval("arr.avg([])"), Err(EvalError::Domain(_))));
        assert!(matches!(eval("arr.sum(['a'])"), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn evaluation_is_thread_safe() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Expression>();
    }
}
