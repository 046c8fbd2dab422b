//! Tokenizer and recursive-descent parser.
//!
//! Precedence, loosest first: `?:`, `||`, `&&`, `== !=`, `< <= > >=`,
//! `+ -`, `* / %`, unary `! -`, call/index, primary.

use super::ast::{BinaryOp, Builtin, Expr, PathRef, UnaryOp};
use super::ParseError;
use crate::model::Value;

/// Deepest tree the parser will build; evaluation recursion is bounded by it.
pub const MAX_DEPTH: usize = 128;
/// Longest accepted source text, in bytes.
pub const MAX_SOURCE_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Path(PathRef),
    Dot,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Question,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

fn is_segment_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = |c: u8| bytes.get(i + 1) == Some(&c);
        let tok = match b {
            b'{' => {
                let (path, end) = lex_path(src, i)?;
                i = end;
                Tok::Path(path)
            }
            b'"' | b'\'' => {
                let (s, end) = lex_string(src, i)?;
                i = end;
                Tok::Str(s)
            }
            b'0'..=b'9' => {
                let (n, end) = lex_number(src, i)?;
                i = end;
                Tok::Num(n)
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let (n, end) = lex_number(src, i)?;
                i = end;
                Tok::Num(n)
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let end = bytes[i..]
                    .iter()
                    .position(|c| !(c.is_ascii_alphanumeric() || *c == b'_'))
                    .map_or(bytes.len(), |p| i + p);
                let word = &src[i..end];
                i = end;
                Tok::Ident(word.to_owned())
            }
            _ => {
                let (tok, len) = match b {
                    b'.' => (Tok::Dot, 1),
                    b',' => (Tok::Comma, 1),
                    b'(' => (Tok::LParen, 1),
                    b')' => (Tok::RParen, 1),
                    b'[' => (Tok::LBracket, 1),
                    b']' => (Tok::RBracket, 1),
                    b'?' => (Tok::Question, 1),
                    b':' => (Tok::Colon, 1),
                    b'+' => (Tok::Plus, 1),
                    b'-' => (Tok::Minus, 1),
                    b'*' => (Tok::Star, 1),
                    b'/' => (Tok::Slash, 1),
                    b'%' => (Tok::Percent, 1),
                    b'=' if two(b'=') => (Tok::EqEq, 2),
                    b'!' if two(b'=') => (Tok::NotEq, 2),
                    b'!' => (Tok::Bang, 1),
                    b'<' if two(b'=') => (Tok::Le, 2),
                    b'<' => (Tok::Lt, 1),
                    b'>' if two(b'=') => (Tok::Ge, 2),
                    b'>' => (Tok::Gt, 1),
                    b'&' if two(b'&') => (Tok::AndAnd, 2),
                    b'|' if two(b'|') => (Tok::OrOr, 2),
                    _ => {
                        let ch = src[i..].chars().next().unwrap_or('?');
                        return Err(syntax(i, format!("unexpected character {ch:?}")));
                    }
                };
                i += len;
                tok
            }
        };
        out.push((tok, start));
    }
    Ok(out)
}

/// `{$alias.seg...}`; whitespace around segments is tolerated.
fn lex_path(src: &str, start: usize) -> Result<(PathRef, usize), ParseError> {
    let bytes = src.as_bytes();
    let close = src[start..]
        .find('}')
        .map(|p| start + p)
        .ok_or_else(|| syntax(start, "unterminated reference"))?;
    let inner = &src[start + 1..close];
    let inner = inner
        .trim_start()
        .strip_prefix('$')
        .ok_or_else(|| syntax(start, "reference must start with '{$'"))?;
    let mut parts = inner.split('.').map(str::trim);
    let alias = parts.next().unwrap_or_default();
    let segments: Vec<String> = parts.map(str::to_owned).collect();
    let ok = |s: &str| !s.is_empty() && s.bytes().all(is_segment_byte);
    if !ok(alias) || !segments.iter().all(|s| ok(s)) {
        return Err(syntax(start, format!("malformed reference {:?}", &src[start..=close])));
    }
    debug_assert_eq!(bytes[close], b'}');
    Ok((
        PathRef {
            alias: alias.to_owned(),
            segments,
        },
        close + 1,
    ))
}

fn lex_string(src: &str, start: usize) -> Result<(String, usize), ParseError> {
    let quote = src.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        let pos = start + 1 + off;
        match c {
            c if c == quote => return Ok((out, pos + 1)),
            '\\' => {
                let (_, esc) = chars
                    .next()
                    .ok_or_else(|| syntax(start, "unterminated string"))?;
                out.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    '0' => '\0',
                    '\\' => '\\',
                    '\'' => '\'',
                    '"' => '"',
                    other => return Err(syntax(pos, format!("unknown escape \\{other}"))),
                });
            }
            c => out.push(c),
        }
    }
    Err(syntax(start, "unterminated string"))
}

fn lex_number(src: &str, start: usize) -> Result<(f64, usize), ParseError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let digits = |i: &mut usize| {
        while bytes.get(*i).is_some_and(u8::is_ascii_digit) {
            *i += 1;
        }
    };
    digits(&mut i);
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        digits(&mut i);
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(bytes.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if bytes.get(j).is_some_and(u8::is_ascii_digit) {
            i = j;
            digits(&mut i);
        } else {
            return Err(syntax(start, "malformed exponent"));
        }
    }
    if bytes.get(i).is_some_and(|b| b.is_ascii_alphabetic() || *b == b'_') {
        return Err(syntax(start, "malformed number"));
    }
    let n: f64 = src[start..i]
        .parse()
        .map_err(|_| syntax(start, "malformed number"))?;
    if !n.is_finite() {
        return Err(syntax(start, "number out of range"));
    }
    Ok((n, i))
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
    depth: usize,
}

type PResult = Result<Expr, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(t) => syntax(self.offset(), format!("expected {wanted}, found {t:?}")),
            None => syntax(self.offset(), format!("expected {wanted}, found end of input")),
        }
    }

    /// Every node built costs one level of nesting budget.
    fn nest(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(syntax(self.offset(), "expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn ternary(&mut self) -> PResult {
        self.nest()?;
        let cond = self.binary(0)?;
        let out = if self.eat(&Tok::Question) {
            let then = self.ternary()?;
            self.expect(&Tok::Colon, "':'")?;
            let other = self.ternary()?;
            Expr::Conditional(Box::new(cond), Box::new(then), Box::new(other))
        } else {
            cond
        };
        self.depth -= 1;
        Ok(out)
    }

    fn binary_op(&self, level: usize) -> Option<BinaryOp> {
        let op = match (level, self.peek()?) {
            (0, Tok::OrOr) => BinaryOp::Or,
            (1, Tok::AndAnd) => BinaryOp::And,
            (2, Tok::EqEq) => BinaryOp::Eq,
            (2, Tok::NotEq) => BinaryOp::Ne,
            (3, Tok::Lt) => BinaryOp::Lt,
            (3, Tok::Le) => BinaryOp::Le,
            (3, Tok::Gt) => BinaryOp::Gt,
            (3, Tok::Ge) => BinaryOp::Ge,
            (4, Tok::Plus) => BinaryOp::Add,
            (4, Tok::Minus) => BinaryOp::Sub,
            (5, Tok::Star) => BinaryOp::Mul,
            (5, Tok::Slash) => BinaryOp::Div,
            (5, Tok::Percent) => BinaryOp::Rem,
            _ => return None,
        };
        Some(op)
    }

    /// Left-associative levels 0..=5, then unary.
    fn binary(&mut self, level: usize) -> PResult {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        let mut chain = 0;
        while let Some(op) = self.binary_op(level) {
            self.pos += 1;
            self.nest()?;
            chain += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= chain;
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult {
        let op = match self.peek() {
            Some(Tok::Bang) => UnaryOp::Not,
            Some(Tok::Minus) => UnaryOp::Neg,
            _ => return self.postfix(),
        };
        self.pos += 1;
        self.nest()?;
        let inner = self.unary()?;
        self.depth -= 1;
        Ok(match (op, inner) {
            (UnaryOp::Neg, Expr::Literal(Value::Number(n))) => Expr::Literal(Value::Number(-n)),
            (op, inner) => Expr::Unary(op, Box::new(inner)),
        })
    }

    fn postfix(&mut self) -> PResult {
        let mut e = self.primary()?;
        let mut chain = 0;
        while self.eat(&Tok::LBracket) {
            self.nest()?;
            chain += 1;
            let idx = self.ternary()?;
            self.expect(&Tok::RBracket, "']'")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        self.depth -= chain;
        Ok(e)
    }

    fn list(&mut self, close: &Tok, what: &str) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.ternary()?);
            if self.eat(close) {
                return Ok(items);
            }
            self.expect(&Tok::Comma, what)?;
        }
    }

    fn primary(&mut self) -> PResult {
        let offset = self.offset();
        let Some(tok) = self.bump().cloned() else {
            return Err(syntax(offset, "unexpected end of input"));
        };
        match tok {
            Tok::Num(n) => Ok(Expr::Literal(Value::Number(n))),
            Tok::Str(s) => Ok(Expr::Literal(Value::Str(s))),
            Tok::Path(p) => Ok(Expr::Path(p)),
            Tok::LParen => {
                self.nest()?;
                let e = self.ternary()?;
                self.expect(&Tok::RParen, "')'")?;
                self.depth -= 1;
                Ok(e)
            }
            Tok::LBracket => {
                self.nest()?;
                let items = self.list(&Tok::RBracket, "',' or ']'")?;
                self.depth -= 1;
                Ok(Expr::Array(items))
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => Ok(Expr::Literal(Value::Bool(true))),
                "false" => Ok(Expr::Literal(Value::Bool(false))),
                _ => self.call(word, offset),
            },
            other => Err(syntax(offset, format!("unexpected {other:?}"))),
        }
    }

    fn call(&mut self, namespace: String, offset: usize) -> PResult {
        if !self.eat(&Tok::Dot) {
            return Err(syntax(offset, format!("unknown identifier {namespace:?}")));
        }
        let name = match self.bump() {
            Some(Tok::Ident(n)) => format!("{namespace}.{n}"),
            _ => return Err(syntax(offset, "expected function name after '.'")),
        };
        let builtin = Builtin::lookup(&name).ok_or(ParseError::UnknownFunction {
            name: name.clone(),
            offset,
        })?;
        self.expect(&Tok::LParen, "'('")?;
        self.nest()?;
        let args = self.list(&Tok::RParen, "',' or ')'")?;
        self.depth -= 1;
        let (lo, hi) = builtin.arity();
        if args.len() < lo || args.len() > hi {
            return Err(syntax(
                offset,
                format!("{name} does not take {} argument(s)", args.len()),
            ));
        }
        Ok(Expr::Call(builtin, args))
    }
}

pub(super) fn parse(src: &str) -> Result<Expr, ParseError> {
    if src.len() > MAX_SOURCE_LEN {
        return Err(syntax(0, "expression too long"));
    }
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
        depth: 0,
    };
    let e = p.ternary()?;
    if p.pos < toks.len() {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}
