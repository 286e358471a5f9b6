//! Lexer, recursive-descent parser and static checks for target programs.
//!
//! ```text
//! program NAME (h: string[N], l: string[M]) { STMT* }
//! STMT := let x = E; | x = E; | x[E] = E; | return E;
//!       | if (E) { .. } [else { .. } | else if ..]
//!       | for i in E..E { .. }
//! ```
//! Comments run from `#` to the end of the line.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{BinaryOp, Expr, ExprKind, Pos, Program, Stmt, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: loop bound is not a compile-time constant")]
    NonConstantBound { pos: Pos },
    #[error("{pos}: index {index} is out of range for {name} (length {len})")]
    IndexOutOfRange {
        pos: Pos,
        name: String,
        index: i64,
        len: usize,
    },
    #[error("{pos}: unknown name `{name}`")]
    UnknownName { pos: Pos, name: String },
    #[error("{pos}: cannot assign to `{name}`")]
    ReadOnly { pos: Pos, name: String },
    #[error("{pos}: loop nest unrolls to more than {limit} iterations")]
    TooManyIterations { pos: Pos, limit: usize },
}

const BUILTINS: [&str; 6] = ["length", "begins", "substring", "min", "max", "zeros"];
const UNROLL_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Char(char),
    Str(String),
    Punct(&'static str),
    Eof,
}

const PUNCT: [&str; 25] = [
    "..", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]", ",", ";", ":", "=",
    "<", ">", "+", "-", "*", "/", "%", "!",
];

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ProgramError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |pos: Pos, m: String| ProgramError::Syntax { pos, message: m };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| err(pos, format!("integer literal {text} is too large")))?;
            col += i - start;
            out.push((Tok::Int(v), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let mut text = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(pos, "unterminated literal".into())),
                    Some(&q) if q == quote => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = *chars
                            .get(i + 1)
                            .ok_or_else(|| err(pos, "unterminated literal".into()))?;
                        text.push(e);
                        i += 2;
                        col += 2;
                    }
                    Some(&x) => {
                        text.push(x);
                        i += 1;
                        col += 1;
                    }
                }
            }
            if quote == '"' {
                out.push((Tok::Str(text), pos));
            } else {
                let mut it = text.chars();
                match (it.next(), it.next()) {
                    (Some(ch), None) => out.push((Tok::Char(ch), pos)),
                    _ => {
                        return Err(err(
                            pos,
                            "character literal must hold exactly one character".into(),
                        ))
                    }
                }
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push((Tok::Punct(p), pos));
                i += p.len();
                col += p.len();
            }
            None => return Err(err(pos, format!("unexpected character {c:?}"))),
        }
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ProgramError> {
        Err(ProgramError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Char(c) => format!("'{c}'"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn expect(&mut self, p: &str) -> Result<Pos, ProgramError> {
        if self.is_punct(p) {
            Ok(self.bump().1)
        } else {
            self.fail(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn keyword(&mut self, k: &str) -> Result<Pos, ProgramError> {
        if self.is_keyword(k) {
            Ok(self.bump().1)
        } else {
            self.fail(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, ProgramError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(format!("expected a name, found {}", self.describe())),
        }
    }

    fn int(&mut self) -> Result<i64, ProgramError> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.fail(format!("expected an integer, found {}", self.describe())),
        }
    }

    fn program(&mut self) -> Result<Program, ProgramError> {
        self.keyword("program")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut lens: HashMap<String, usize> = HashMap::new();
        for i in 0..2 {
            if i == 1 {
                self.expect(",")?;
            }
            let pos = self.pos();
            let p = self.ident()?;
            if (p != "h" && p != "l") || lens.contains_key(&p) {
                return Err(ProgramError::Syntax {
                    pos,
                    message: "parameters must be `h` and `l`".into(),
                });
            }
            self.expect(":")?;
            self.keyword("string")?;
            self.expect("[")?;
            let n = self.int()?;
            self.expect("]")?;
            lens.insert(p, n as usize);
        }
        self.expect(")")?;
        let body = self.block()?;
        if *self.peek() != Tok::Eof {
            return self.fail(format!("unexpected {} after program body", self.describe()));
        }
        Ok(Program {
            name,
            len_high: lens["h"],
            len_low: lens["l"],
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ProgramError> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.fail("unclosed block");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ProgramError> {
        let pos = self.pos();
        if self.is_keyword("let") {
            self.bump();
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            return Ok(Stmt::Let { name, value, pos });
        }
        if self.is_keyword("return") {
            self.bump();
            let value = self.expr()?;
            self.expect(";")?;
            return Ok(Stmt::Return { value, pos });
        }
        if self.is_keyword("if") {
            return self.if_stmt();
        }
        if self.is_keyword("for") {
            self.bump();
            let var = self.ident()?;
            self.keyword("in")?;
            let from = self.expr()?;
            self.expect("..")?;
            let to = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::For {
                var,
                from,
                to,
                body,
                pos,
            });
        }
        let name = self.ident()?;
        if self.is_punct("[") {
            self.bump();
            let index = self.expr()?;
            self.expect("]")?;
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            return Ok(Stmt::IndexAssign {
                name,
                index,
                value,
                pos,
            });
        }
        self.expect("=")?;
        let value = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Assign { name, value, pos })
    }

    fn if_stmt(&mut self) -> Result<Stmt, ProgramError> {
        let pos = self.keyword("if")?;
        self.expect("(")?;
        let cond = self.expr()?;
        self.expect(")")?;
        let then = self.block()?;
        let otherwise = if self.is_keyword("else") {
            self.bump();
            if self.is_keyword("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If {
            cond,
            then,
            otherwise,
            pos,
        })
    }

    fn expr(&mut self) -> Result<Expr, ProgramError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ProgramError> {
        const LEVELS: [&[(&str, BinaryOp)]; 5] = [
            &[("||", BinaryOp::Or)],
            &[("&&", BinaryOp::And)],
            &[
                ("==", BinaryOp::Eq),
                ("!=", BinaryOp::Ne),
                ("<=", BinaryOp::Le),
                (">=", BinaryOp::Ge),
                ("<", BinaryOp::Lt),
                (">", BinaryOp::Gt),
            ],
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            &[
                ("*", BinaryOp::Mul),
                ("/", BinaryOp::Div),
                ("%", BinaryOp::Rem),
            ],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = LEVELS[level]
                .iter()
                .find(|(p, _)| self.is_punct(p))
                .map(|&(_, op)| op);
            let Some(op) = op else { break };
            let pos = self.bump().1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
            // Comparisons do not chain.
            if level == 2 {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ProgramError> {
        let pos = self.pos();
        let op = if self.is_punct("!") {
            UnaryOp::Not
        } else if self.is_punct("-") {
            UnaryOp::Neg
        } else {
            return self.postfix();
        };
        self.bump();
        let inner = self.unary()?;
        Ok(Expr {
            kind: ExprKind::Unary(op, Box::new(inner)),
            pos,
        })
    }

    fn postfix(&mut self) -> Result<Expr, ProgramError> {
        let mut e = self.primary()?;
        while self.is_punct("[") {
            let pos = self.bump().1;
            let idx = self.expr()?;
            self.expect("]")?;
            e = Expr {
                kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                pos,
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ProgramError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                ExprKind::Int(v)
            }
            Tok::Char(c) => {
                self.bump();
                ExprKind::Char(c)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                ExprKind::Bool(s == "true")
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    self.bump();
                    let args = self.list(")")?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Tok::Punct("[") => {
                self.bump();
                ExprKind::Array(self.list("]")?)
            }
            _ => return self.fail(format!("expected an expression, found {}", self.describe())),
        };
        Ok(Expr { kind, pos })
    }

    fn list(&mut self, close: &str) -> Result<Vec<Expr>, ProgramError> {
        let mut out = Vec::new();
        if self.is_punct(close) {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.is_punct(",") {
                self.bump();
                continue;
            }
            self.expect(close)?;
            return Ok(out);
        }
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "program" | "string" | "let" | "if" | "else" | "for" | "in" | "return" | "true" | "false"
    )
}

/// Parses and statically checks a program.
pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
    };
    let program = p.program()?;
    check_program(&program)?;
    Ok(program)
}

/// Static checks: names resolve, loop bounds are constants and indices into
/// `h`/`l` that only depend on loop counters stay in range on every iteration.
pub fn check_program(p: &Program) -> Result<(), ProgramError> {
    let mut c = Checker {
        lens: [("h".to_string(), p.len_high), ("l".to_string(), p.len_low)].into(),
        scopes: vec![HashMap::new()],
        iterations: 0,
    };
    c.block(&p.body)
}

// Names in scope map to a known constant (loop counters) or `None`.
struct Checker {
    lens: HashMap<String, usize>,
    scopes: Vec<HashMap<String, Option<i64>>>,
    iterations: usize,
}

impl Checker {
    fn lookup(&self, name: &str) -> Option<Option<i64>> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), ProgramError> {
        self.scopes.push(HashMap::new());
        let r = body.iter().try_for_each(|s| self.stmt(s));
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ProgramError> {
        match s {
            Stmt::Let { name, value, pos } => {
                self.expr(value)?;
                if self.lens.contains_key(name) {
                    return Err(ProgramError::ReadOnly {
                        pos: *pos,
                        name: name.clone(),
                    });
                }
                self.scopes.last_mut().unwrap().insert(name.clone(), None);
            }
            Stmt::Assign { name, value, pos }
            | Stmt::IndexAssign {
                name, value, pos, ..
            } => {
                if let Stmt::IndexAssign { index, .. } = s {
                    self.expr(index)?;
                }
                self.expr(value)?;
                self.assignable(name, *pos)?;
            }
            Stmt::If {
                cond,
                then,
                otherwise,
                ..
            } => {
                self.expr(cond)?;
                self.block(then)?;
                self.block(otherwise)?;
            }
            Stmt::For {
                var,
                from,
                to,
                body,
                pos,
            } => {
                self.expr(from)?;
                self.expr(to)?;
                let (Some(a), Some(b)) = (self.constant(from), self.constant(to)) else {
                    return Err(ProgramError::NonConstantBound { pos: *pos });
                };
                let values: Vec<Option<i64>> = if a < b {
                    (a..b).map(Some).collect()
                } else {
                    vec![None]
                };
                for v in values {
                    self.iterations += 1;
                    if self.iterations > UNROLL_LIMIT {
                        return Err(ProgramError::TooManyIterations {
                            pos: *pos,
                            limit: UNROLL_LIMIT,
                        });
                    }
                    self.scopes.push(HashMap::from([(var.clone(), v)]));
                    let r = self.block(body);
                    self.scopes.pop();
                    r?;
                }
            }
            Stmt::Return { value, .. } => self.expr(value)?,
        }
        Ok(())
    }

    fn assignable(&self, name: &str, pos: Pos) -> Result<(), ProgramError> {
        match self.lookup(name) {
            None if self.lens.contains_key(name) => Err(ProgramError::ReadOnly {
                pos,
                name: name.into(),
            }),
            None => Err(ProgramError::UnknownName {
                pos,
                name: name.into(),
            }),
            Some(Some(_)) => Err(ProgramError::ReadOnly {
                pos,
                name: name.into(),
            }),
            Some(None) => Ok(()),
        }
    }

    fn expr(&self, e: &Expr) -> Result<(), ProgramError> {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Char(_) | ExprKind::Str(_) => Ok(()),
            ExprKind::Var(name) => {
                if self.lens.contains_key(name) || self.lookup(name).is_some() {
                    Ok(())
                } else {
                    Err(ProgramError::UnknownName {
                        pos: e.pos,
                        name: name.clone(),
                    })
                }
            }
            ExprKind::Index(target, idx) => {
                self.expr(target)?;
                self.expr(idx)?;
                if let ExprKind::Var(name) = &target.kind {
                    if let (Some(&len), Some(i)) = (self.lens.get(name), self.constant(idx)) {
                        if i < 0 || i as usize >= len {
                            return Err(ProgramError::IndexOutOfRange {
                                pos: e.pos,
                                name: name.clone(),
                                index: i,
                                len,
                            });
                        }
                    }
                }
                Ok(())
            }
            ExprKind::Unary(_, x) => self.expr(x),
            ExprKind::Binary(_, a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            ExprKind::Call(name, args) => {
                if !BUILTINS.contains(&name.as_str()) {
                    return Err(ProgramError::UnknownName {
                        pos: e.pos,
                        name: name.clone(),
                    });
                }
                args.iter().try_for_each(|a| self.expr(a))
            }
            ExprKind::Array(xs) => xs.iter().try_for_each(|a| self.expr(a)),
        }
    }

    /// Value of an integer expression built from literals, loop counters and
    /// `length`, if it has one.
    fn constant(&self, e: &Expr) -> Option<i64> {
        match &e.kind {
            ExprKind::Int(v) => Some(*v),
            ExprKind::Var(name) => self.lookup(name).flatten(),
            ExprKind::Unary(UnaryOp::Neg, x) => self.constant(x)?.checked_neg(),
            ExprKind::Binary(op, a, b) => {
                let (x, y) = (self.constant(a)?, self.constant(b)?);
                match op {
                    BinaryOp::Add => x.checked_add(y),
                    BinaryOp::Sub => x.checked_sub(y),
                    BinaryOp::Mul => x.checked_mul(y),
                    BinaryOp::Div => x.checked_div(y),
                    BinaryOp::Rem => x.checked_rem(y),
                    _ => None,
                }
            }
            ExprKind::Call(name, args) => match (name.as_str(), args.as_slice()) {
                ("length", [arg]) => match &arg.kind {
                    ExprKind::Var(v) => self.lens.get(v).map(|&n| n as i64),
                    ExprKind::Str(s) => Some(s.chars().count() as i64),
                    _ => None,
                },
                ("min", xs) if !xs.is_empty() => xs
                    .iter()
                    .map(|x| self.constant(x))
                    .collect::<Option<Vec<_>>>()?
                    .into_iter()
                    .min(),
                ("max", xs) if !xs.is_empty() => xs
                    .iter()
                    .map(|x| self.constant(x))
                    .collect::<Option<Vec<_>>>()?
                    .into_iter()
                    .max(),
                _ => None,
            },
            _ => None,
        }
    }
}

impl Program {
    /// The same program with different declared lengths, re-checked.
    pub fn with_lengths(&self, len_high: usize, len_low: usize) -> Result<Program, ProgramError> {
        let p = Program {
            len_high,
            len_low,
            ..self.clone()
        };
        check_program(&p)?;
        Ok(p)
    }
}
