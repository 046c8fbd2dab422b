use crate::model::Value;

/// Parsed expression tree. Only these node kinds exist: there is no
/// assignment, looping, definition or host access in the language.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Path(PathRef),
    Array(Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Conditional(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

/// `{$alias.seg.seg...}`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRef {
    pub alias: String,
    pub segments: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }
}

/// The closed set of callable functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    MathAbs,
    MathMin,
    MathMax,
    MathFloor,
    MathCeil,
    MathRound,
    MathSqrt,
    MathPow,
    StrLength,
    StrUpper,
    StrLower,
    StrSubstring,
    StrIndexOf,
    StrConcat,
    ArrLength,
    ArrConcat,
    ArrSlice,
    ArrIndexOf,
    ArrSum,
    ArrAvg,
}

const VARIADIC: usize = usize::MAX;

impl Builtin {
    pub const ALL: [Builtin; 20] = [
        Builtin::MathAbs,
        Builtin::MathMin,
        Builtin::MathMax,
        Builtin::MathFloor,
        Builtin::MathCeil,
        Builtin::MathRound,
        Builtin::MathSqrt,
        Builtin::MathPow,
        Builtin::StrLength,
        Builtin::StrUpper,
        Builtin::StrLower,
        Builtin::StrSubstring,
        Builtin::StrIndexOf,
        Builtin::StrConcat,
        Builtin::ArrLength,
        Builtin::ArrConcat,
        Builtin::ArrSlice,
        Builtin::ArrIndexOf,
        Builtin::ArrSum,
        Builtin::ArrAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::MathAbs => "math.abs",
            Builtin::MathMin => "math.min",
            Builtin::MathMax => "math.max",
            Builtin::MathFloor => "math.floor",
            Builtin::MathCeil => "math.ceil",
            Builtin::MathRound => "math.round",
            Builtin::MathSqrt => "math.sqrt",
            Builtin::MathPow => "math.pow",
            Builtin::StrLength => "str.length",
            Builtin::StrUpper => "str.upper",
            Builtin::StrLower => "str.lower",
            Builtin::StrSubstring => "str.substring",
            Builtin::StrIndexOf => "str.indexOf",
            Builtin::StrConcat => "str.concat",
            Builtin::ArrLength => "arr.length",
            Builtin::ArrConcat => "arr.concat",
            Builtin::ArrSlice => "arr.slice",
            Builtin::ArrIndexOf => "arr.indexOf",
            Builtin::ArrSum => "arr.sum",
            Builtin::ArrAvg => "arr.avg",
        }
    }

    pub fn lookup(name: &str) -> Option<Builtin> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Inclusive bounds on the argument count.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Builtin::MathMin | Builtin::MathMax | Builtin::StrConcat | Builtin::ArrConcat => {
                (1, VARIADIC)
            }
            Builtin::MathPow | Builtin::StrIndexOf | Builtin::ArrIndexOf => (2, 2),
            Builtin::StrSubstring | Builtin::ArrSlice => (2, 3),
            _ => (1, 1),
        }
    }
}
