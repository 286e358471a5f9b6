//! Syntax tree of the target-program language.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Node kinds the cost model can weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Let,
    Assign,
    If,
    /// Charged once per loop-condition check, i.e. iterations + 1.
    For,
    Return,
    Literal,
    Var,
    Index,
    Unary,
    Binary,
    Call,
    Array,
}

impl NodeKind {
    pub const ALL: [NodeKind; 12] = [
        NodeKind::Let,
        NodeKind::Assign,
        NodeKind::If,
        NodeKind::For,
        NodeKind::Return,
        NodeKind::Literal,
        NodeKind::Var,
        NodeKind::Index,
        NodeKind::Unary,
        NodeKind::Binary,
        NodeKind::Call,
        NodeKind::Array,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Let => "let",
            NodeKind::Assign => "assign",
            NodeKind::If => "if",
            NodeKind::For => "for",
            NodeKind::Return => "return",
            NodeKind::Literal => "literal",
            NodeKind::Var => "var",
            NodeKind::Index => "index",
            NodeKind::Unary => "unary",
            NodeKind::Binary => "binary",
            NodeKind::Call => "call",
            NodeKind::Array => "array",
        }
    }

    pub fn from_name(name: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub name: String,
    pub len_high: usize,
    pub len_low: usize,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let {
        name: String,
        value: Expr,
        pos: Pos,
    },
    Assign {
        name: String,
        value: Expr,
        pos: Pos,
    },
    IndexAssign {
        name: String,
        index: Expr,
        value: Expr,
        pos: Pos,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
        pos: Pos,
    },
    For {
        var: String,
        from: Expr,
        to: Expr,
        body: Vec<Stmt>,
        pos: Pos,
    },
    Return {
        value: Expr,
        pos: Pos,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Char(char),
    Str(String),
    Var(String),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Array(Vec<Expr>),
}

impl Expr {
    pub fn kind(&self) -> NodeKind {
        match self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Char(_) | ExprKind::Str(_) => {
                NodeKind::Literal
            }
            ExprKind::Var(_) => NodeKind::Var,
            ExprKind::Index(..) => NodeKind::Index,
            ExprKind::Unary(..) => NodeKind::Unary,
            ExprKind::Binary(..) => NodeKind::Binary,
            ExprKind::Call(..) => NodeKind::Call,
            ExprKind::Array(_) => NodeKind::Array,
        }
    }
}

impl Stmt {
    pub fn pos(&self) -> Pos {
        match self {
            Stmt::Let { pos, .. }
            | Stmt::Assign { pos, .. }
            | Stmt::IndexAssign { pos, .. }
            | Stmt::If { pos, .. }
            | Stmt::For { pos, .. }
            | Stmt::Return { pos, .. } => *pos,
        }
    }
}

impl Program {
    /// Number of `for` statements, nested ones included.
    pub fn loop_count(&self) -> usize {
        fn walk(body: &[Stmt]) -> usize {
            body.iter()
                .map(|s| match s {
                    Stmt::For { body, .. } => 1 + walk(body),
                    Stmt::If {
                        then, otherwise, ..
                    } => walk(then) + walk(otherwise),
                    _ => 0,
                })
                .sum()
        }
        walk(&self.body)
    }
}
