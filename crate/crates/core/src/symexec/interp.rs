//! One interpreter for both concrete runs and symbolic exploration.
//!
//! In concrete mode `h` and `l` hold literal characters and every condition
//! evaluates to a boolean. In symbolic mode they hold character references;
//! conditions then evaluate to formulas and a [`Brancher`] decides which way
//! each one goes. Costs are charged identically in both modes, so a concrete
//! run and the symbolic path it follows always agree on the total.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{
    lex_greater_than_const, lex_less_than_const, Atom, CharRef, ConstraintError, Formula,
    StringDomain, Var,
};

use super::ast::{BinaryOp, Expr, ExprKind, NodeKind, Pos, Program, Stmt, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("{pos}: {message}")]
    Type { pos: Pos, message: String },
    #[error("{pos}: index {index} out of range (length {len})")]
    IndexOutOfRange { pos: Pos, index: i64, len: usize },
    #[error("{pos}: division by zero")]
    DivisionByZero { pos: Pos },
    #[error("{pos}: integer overflow")]
    Overflow { pos: Pos },
    #[error("{pos}: condition is not expressible as a string constraint: {message}")]
    NotExpressible { pos: Pos, message: String },
    #[error("{pos}: unknown name `{name}`")]
    UnknownName { pos: Pos, name: String },
    #[error("symbolic condition reached during a concrete run")]
    SymbolicInConcrete,
    #[error("more than {limit} paths")]
    PathLimit { limit: usize },
    #[error("invalid input: {0}")]
    Input(#[from] ConstraintError),
}

/// Per-node-kind weights; the cost of a run is `base` plus the weights of
/// every node it evaluates. Missing kinds weigh 1.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(default)]
    pub weights: BTreeMap<NodeKind, u64>,
    #[serde(default)]
    pub base: u64,
}

impl CostModel {
    pub fn unit() -> Self {
        CostModel::default()
    }

    pub fn weight(&self, kind: NodeKind) -> u64 {
        self.weights.get(&kind).copied().unwrap_or(1)
    }

    pub fn with_weight(mut self, kind: NodeKind, w: u64) -> Self {
        self.weights.insert(kind, w);
        self
    }

    pub fn with_base(mut self, base: u64) -> Self {
        self.base = base;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharValue {
    Known(char),
    Sym(CharRef),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Unit,
    Int(i64),
    Bool(bool),
    Char(CharValue),
    Str(Vec<CharValue>),
    Array(Vec<i64>),
    Cond(Formula),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Unit => "nothing",
            Value::Int(_) => "an integer",
            Value::Bool(_) | Value::Cond(_) => "a boolean",
            Value::Char(_) => "a character",
            Value::Str(_) => "a string",
            Value::Array(_) => "an array",
        }
    }

    fn cond(f: Formula) -> Value {
        match f.simplify() {
            Formula::True => Value::Bool(true),
            Formula::False => Value::Bool(false),
            g => Value::Cond(g),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = |c: &CharValue| match c {
            CharValue::Known(c) => c.to_string(),
            CharValue::Sym(r) => format!("{r}"),
        };
        match self {
            Value::Unit => f.write_str("()"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => f.write_str(&ch(c)),
            Value::Str(cs) => f.write_str(&cs.iter().map(ch).collect::<String>()),
            Value::Array(xs) => write!(f, "{xs:?}"),
            Value::Cond(g) => write!(f, "{g}"),
        }
    }
}

/// Chooses the direction of symbolic branches.
pub(crate) trait Brancher {
    fn decide(&mut self, cond: &Formula) -> Result<bool, ExecError>;
}

pub(crate) struct Concrete;

impl Brancher for Concrete {
    fn decide(&mut self, _: &Formula) -> Result<bool, ExecError> {
        Err(ExecError::SymbolicInConcrete)
    }
}

/// Result of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub value: Value,
    pub cost: u64,
}

/// Runs the program on concrete inputs. This is the observation oracle.
pub fn run_concrete(
    p: &Program,
    domain: &StringDomain,
    h: &str,
    l: &str,
    cm: &CostModel,
) -> Result<Execution, ExecError> {
    let d = domain.with_lengths(p.len_high, p.len_low);
    let h = d.check_word(Var::High, h)?;
    let l = d.check_word(Var::Low, l)?;
    let known = |w: Vec<char>| Value::Str(w.into_iter().map(CharValue::Known).collect());
    run(p, &d, known(h), known(l), cm, &mut Concrete)
}

pub(crate) fn run_symbolic(
    p: &Program,
    domain: &StringDomain,
    cm: &CostModel,
    brancher: &mut impl Brancher,
) -> Result<Execution, ExecError> {
    let sym =
        |v: Var, n: usize| Value::Str((0..n).map(|i| CharValue::Sym(CharRef::new(v, i))).collect());
    let h = sym(Var::High, p.len_high);
    let l = sym(Var::Low, p.len_low);
    run(p, domain, h, l, cm, brancher)
}

fn run(
    p: &Program,
    domain: &StringDomain,
    h: Value,
    l: Value,
    cm: &CostModel,
    brancher: &mut impl Brancher,
) -> Result<Execution, ExecError> {
    let mut it = Interp {
        domain,
        cm,
        brancher,
        cost: cm.base,
        scopes: vec![HashMap::from([("h".to_string(), h), ("l".to_string(), l)])],
    };
    let value = match it.block(&p.body)? {
        Flow::Return(v) => v,
        Flow::Normal => Value::Unit,
    };
    Ok(Execution {
        value,
        cost: it.cost,
    })
}

enum Flow {
    Normal,
    Return(Value),
}

struct Interp<'a, B: Brancher> {
    domain: &'a StringDomain,
    cm: &'a CostModel,
    brancher: &'a mut B,
    cost: u64,
    scopes: Vec<HashMap<String, Value>>,
}

impl<B: Brancher> Interp<'_, B> {
    fn charge(&mut self, kind: NodeKind) {
        self.cost += self.cm.weight(kind);
    }

    fn lookup(&self, name: &str, pos: Pos) -> Result<&Value, ExecError> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .ok_or_else(|| ExecError::UnknownName {
                pos,
                name: name.into(),
            })
    }

    fn lookup_mut(&mut self, name: &str, pos: Pos) -> Result<&mut Value, ExecError> {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|s| s.get_mut(name))
            .ok_or_else(|| ExecError::UnknownName {
                pos,
                name: name.into(),
            })
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Flow, ExecError> {
        self.scopes.push(HashMap::new());
        let mut flow = Flow::Normal;
        for s in body {
            match self.stmt(s) {
                Ok(Flow::Normal) => {}
                Ok(ret) => {
                    flow = ret;
                    break;
                }
                Err(e) => {
                    self.scopes.pop();
                    return Err(e);
                }
            }
        }
        self.scopes.pop();
        Ok(flow)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Flow, ExecError> {
        match s {
            Stmt::Let { name, value, .. } => {
                self.charge(NodeKind::Let);
                let v = self.expr(value)?;
                self.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            Stmt::Assign { name, value, pos } => {
                self.charge(NodeKind::Assign);
                let v = self.expr(value)?;
                *self.lookup_mut(name, *pos)? = v;
            }
            Stmt::IndexAssign {
                name,
                index,
                value,
                pos,
            } => {
                self.charge(NodeKind::Assign);
                let i = self.int(index)?;
                let v = self.expr(value)?;
                let Value::Int(v) = v else {
                    return Err(type_error(*pos, "array elements are integers"));
                };
                match self.lookup_mut(name, *pos)? {
                    Value::Array(xs) => {
                        let len = xs.len();
                        let slot = usize::try_from(i).ok().and_then(|i| xs.get_mut(i)).ok_or(
                            ExecError::IndexOutOfRange {
                                pos: *pos,
                                index: i,
                                len,
                            },
                        )?;
                        *slot = v;
                    }
                    other => {
                        let msg = format!("cannot index-assign {}", other.type_name());
                        return Err(type_error(*pos, &msg));
                    }
                }
            }
            Stmt::If {
                cond,
                then,
                otherwise,
                ..
            } => {
                self.charge(NodeKind::If);
                let c = self.expr(cond)?;
                let taken = self.truth(c, cond.pos)?;
                return self.block(if taken { then } else { otherwise });
            }
            Stmt::For {
                var,
                from,
                to,
                body,
                ..
            } => {
                let a = self.int(from)?;
                let b = self.int(to)?;
                for i in a..b {
                    self.charge(NodeKind::For);
                    self.scopes
                        .push(HashMap::from([(var.clone(), Value::Int(i))]));
                    let flow = self.block(body);
                    self.scopes.pop();
                    if let Flow::Return(v) = flow? {
                        return Ok(Flow::Return(v));
                    }
                }
                self.charge(NodeKind::For);
            }
            Stmt::Return { value, .. } => {
                self.charge(NodeKind::Return);
                return Ok(Flow::Return(self.expr(value)?));
            }
        }
        Ok(Flow::Normal)
    }

    fn truth(&mut self, v: Value, pos: Pos) -> Result<bool, ExecError> {
        match v {
            Value::Bool(b) => Ok(b),
            Value::Cond(f) => match f.simplify() {
                Formula::True => Ok(true),
                Formula::False => Ok(false),
                g => self.brancher.decide(&g),
            },
            other => Err(type_error(
                pos,
                &format!("expected a boolean, found {}", other.type_name()),
            )),
        }
    }

    fn int(&mut self, e: &Expr) -> Result<i64, ExecError> {
        match self.expr(e)? {
            Value::Int(v) => Ok(v),
            other => Err(type_error(
                e.pos,
                &format!("expected an integer, found {}", other.type_name()),
            )),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Value, ExecError> {
        self.charge(e.kind());
        let pos = e.pos;
        Ok(match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Char(c) => Value::Char(CharValue::Known(*c)),
            ExprKind::Str(s) => Value::Str(s.chars().map(CharValue::Known).collect()),
            ExprKind::Var(name) => self.lookup(name, pos)?.clone(),
            ExprKind::Array(xs) => {
                let mut out = Vec::with_capacity(xs.len());
                for x in xs {
                    out.push(self.int(x)?);
                }
                Value::Array(out)
            }
            ExprKind::Index(target, idx) => {
                let t = self.expr(target)?;
                let i = self.int(idx)?;
                let len = match &t {
                    Value::Str(cs) => cs.len(),
                    Value::Array(xs) => xs.len(),
                    other => {
                        return Err(type_error(
                            pos,
                            &format!("cannot index {}", other.type_name()),
                        ))
                    }
                };
                let k = usize::try_from(i)
                    .ok()
                    .filter(|&k| k < len)
                    .ok_or(ExecError::IndexOutOfRange { pos, index: i, len })?;
                match t {
                    Value::Str(cs) => Value::Char(cs[k]),
                    Value::Array(xs) => Value::Int(xs[k]),
                    _ => unreachable!(),
                }
            }
            ExprKind::Unary(op, x) => {
                let v = self.expr(x)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnaryOp::Not, Value::Cond(f)) => Value::cond(f.negate()),
                    (UnaryOp::Neg, Value::Int(v)) => {
                        Value::Int(v.checked_neg().ok_or(ExecError::Overflow { pos })?)
                    }
                    (_, v) => {
                        return Err(type_error(pos, &format!("bad operand: {}", v.type_name())))
                    }
                }
            }
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b, pos)?,
            ExprKind::Call(name, args) => self.call(name, args, pos)?,
        })
    }

    fn binary(&mut self, op: BinaryOp, a: &Expr, b: &Expr, pos: Pos) -> Result<Value, ExecError> {
        // Short-circuit operators branch on the left operand.
        if matches!(op, BinaryOp::And | BinaryOp::Or) {
            let lhs = self.expr(a)?;
            let l = self.truth(lhs, a.pos)?;
            if l == (op == BinaryOp::Or) {
                return Ok(Value::Bool(l));
            }
            let rhs = self.expr(b)?;
            return match rhs {
                Value::Bool(_) | Value::Cond(_) => Ok(rhs),
                other => Err(type_error(
                    b.pos,
                    &format!("expected a boolean, found {}", other.type_name()),
                )),
            };
        }
        let x = self.expr(a)?;
        let y = self.expr(b)?;
        use BinaryOp::*;
        match op {
            Add | Sub | Mul | Div | Rem => {
                let (Value::Int(x), Value::Int(y)) = (&x, &y) else {
                    return Err(type_error(
                        pos,
                        &format!("`{}` needs integers", op.symbol()),
                    ));
                };
                let (x, y) = (*x, *y);
                if matches!(op, Div | Rem) && y == 0 {
                    return Err(ExecError::DivisionByZero { pos });
                }
                let r = match op {
                    Add => x.checked_add(y),
                    Sub => x.checked_sub(y),
                    Mul => x.checked_mul(y),
                    Div => x.checked_div(y),
                    _ => x.checked_rem(y),
                };
                r.map(Value::Int).ok_or(ExecError::Overflow { pos })
            }
            Eq | Ne => {
                let eq = self.equal(&x, &y, pos)?;
                Ok(if op == Eq { eq } else { negate(eq) })
            }
            Lt => self.less(&x, &y, pos),
            Gt => self.less(&y, &x, pos),
            Ge => Ok(negate(self.less(&x, &y, pos)?)),
            Le => Ok(negate(self.less(&y, &x, pos)?)),
            And | Or => unreachable!(),
        }
    }

    fn equal(&self, x: &Value, y: &Value, pos: Pos) -> Result<Value, ExecError> {
        Ok(match (x, y) {
            (Value::Int(a), Value::Int(b)) => Value::Bool(a == b),
            (Value::Bool(a), Value::Bool(b)) => Value::Bool(a == b),
            (Value::Cond(f), Value::Bool(b)) | (Value::Bool(b), Value::Cond(f)) => {
                Value::cond(if *b { f.clone() } else { f.negate() })
            }
            (Value::Char(a), Value::Char(b)) => Value::cond(self.char_eq(*a, *b)),
            (Value::Str(a), Value::Str(b)) => Value::cond(self.str_eq(a, b)),
            (Value::Array(a), Value::Array(b)) => Value::Bool(a == b),
            _ => {
                return Err(type_error(
                    pos,
                    &format!("cannot compare {} with {}", x.type_name(), y.type_name()),
                ))
            }
        })
    }

    fn char_eq(&self, a: CharValue, b: CharValue) -> Formula {
        match (a, b) {
            (CharValue::Known(x), CharValue::Known(y)) => Formula::constant(x == y),
            (CharValue::Sym(r), CharValue::Known(c)) | (CharValue::Known(c), CharValue::Sym(r)) => {
                if self.domain.contains(c) {
                    Atom::CharEqConst(r, c).into()
                } else {
                    Formula::False
                }
            }
            (CharValue::Sym(r), CharValue::Sym(s)) => Atom::CharEqVar(r, s).into(),
        }
    }

    fn str_eq(&self, a: &[CharValue], b: &[CharValue]) -> Formula {
        if a.len() != b.len() {
            return Formula::False;
        }
        for (x, y) in [(a, b), (b, a)] {
            if let (Some(v), Some(lit)) = (whole_var(x, self.domain), known(y)) {
                if lit.iter().all(|&c| self.domain.contains(c)) {
                    return Atom::StrEqConst(v, lit.into_iter().collect()).into();
                }
            }
        }
        Formula::and(a.iter().zip(b).map(|(&x, &y)| self.char_eq(x, y)).collect())
    }

    fn less(&self, x: &Value, y: &Value, pos: Pos) -> Result<Value, ExecError> {
        match (x, y) {
            (Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a < b)),
            (Value::Char(a), Value::Char(b)) => self.char_less(*a, *b, pos).map(Value::cond),
            (Value::Str(a), Value::Str(b)) => self.str_less(a, b, pos).map(Value::cond),
            _ => Err(type_error(
                pos,
                &format!("cannot order {} and {}", x.type_name(), y.type_name()),
            )),
        }
    }

    fn rank(&self, c: char, pos: Pos) -> Result<usize, ExecError> {
        self.domain
            .rank(c)
            .ok_or_else(|| ExecError::NotExpressible {
                pos,
                message: format!("character {c:?} is not in the alphabet"),
            })
    }

    fn char_less(&self, a: CharValue, b: CharValue, pos: Pos) -> Result<Formula, ExecError> {
        let among = |r: CharRef, keep: &dyn Fn(usize) -> bool| {
            Formula::or(
                self.domain
                    .alphabet()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| keep(i))
                    .map(|(_, &c)| Atom::CharEqConst(r, c).into())
                    .collect(),
            )
        };
        match (a, b) {
            (CharValue::Known(x), CharValue::Known(y)) => {
                Ok(Formula::constant(self.rank(x, pos)? < self.rank(y, pos)?))
            }
            (CharValue::Sym(r), CharValue::Known(c)) => {
                let k = self.rank(c, pos)?;
                Ok(among(r, &|i| i < k))
            }
            (CharValue::Known(c), CharValue::Sym(r)) => {
                let k = self.rank(c, pos)?;
                Ok(among(r, &|i| i > k))
            }
            (CharValue::Sym(_), CharValue::Sym(_)) => Err(ExecError::NotExpressible {
                pos,
                message: "ordering between two symbolic characters".into(),
            }),
        }
    }

    fn str_less(&self, a: &[CharValue], b: &[CharValue], pos: Pos) -> Result<Formula, ExecError> {
        if let (Some(x), Some(y)) = (known(a), known(b)) {
            for &c in x.iter().chain(&y) {
                self.rank(c, pos)?;
            }
            return Ok(Formula::constant(self.domain.lex_lt(&x, &y)));
        }
        match (whole_var(a, self.domain), whole_var(b, self.domain)) {
            (Some(v), Some(w)) if a.len() == b.len() => return Ok(Atom::LexLt(v, w).into()),
            (Some(v), None) => {
                if let Some(lit) = known(b).filter(|lit| lit.len() == a.len()) {
                    for &c in &lit {
                        self.rank(c, pos)?;
                    }
                    return Ok(lex_less_than_const(v, &lit, self.domain));
                }
            }
            (None, Some(w)) => {
                if let Some(lit) = known(a).filter(|lit| lit.len() == b.len()) {
                    for &c in &lit {
                        self.rank(c, pos)?;
                    }
                    return Ok(lex_greater_than_const(w, &lit, self.domain));
                }
            }
            _ => {}
        }
        Err(ExecError::NotExpressible {
            pos,
            message: "lexicographic order needs whole equal-length strings".into(),
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<Value, ExecError> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.expr(a)?);
        }
        let arity = |n: usize| {
            if vals.len() == n {
                Ok(())
            } else {
                Err(type_error(pos, &format!("`{name}` takes {n} argument(s)")))
            }
        };
        match name {
            "length" => {
                arity(1)?;
                match &vals[0] {
                    Value::Str(cs) => Ok(Value::Int(cs.len() as i64)),
                    Value::Array(xs) => Ok(Value::Int(xs.len() as i64)),
                    other => Err(type_error(pos, &format!("length of {}", other.type_name()))),
                }
            }
            "begins" => {
                arity(2)?;
                let (Value::Str(s), Value::Str(p)) = (&vals[0], &vals[1]) else {
                    return Err(type_error(pos, "`begins` takes two strings"));
                };
                if p.len() > s.len() {
                    return Ok(Value::Bool(false));
                }
                if let (Some(v), Some(lit)) = (whole_var(s, self.domain), known(p)) {
                    if lit.iter().all(|&c| self.domain.contains(c)) {
                        return Ok(Value::cond(
                            Atom::BeginsConst(v, lit.into_iter().collect()).into(),
                        ));
                    }
                }
                Ok(Value::cond(self.str_eq(&s[..p.len()], p)))
            }
            "substring" => {
                arity(3)?;
                let (Value::Str(s), Value::Int(a), Value::Int(b)) = (&vals[0], &vals[1], &vals[2])
                else {
                    return Err(type_error(
                        pos,
                        "`substring` takes a string and two integers",
                    ));
                };
                let len = s.len();
                if *a < 0 || a > b || *b as usize > len {
                    return Err(ExecError::IndexOutOfRange {
                        pos,
                        index: *b,
                        len,
                    });
                }
                Ok(Value::Str(s[*a as usize..*b as usize].to_vec()))
            }
            "min" | "max" => {
                let mut ints = Vec::with_capacity(vals.len());
                for v in &vals {
                    match v {
                        Value::Int(x) => ints.push(*x),
                        other => {
                            return Err(type_error(
                                pos,
                                &format!("`{name}` of {}", other.type_name()),
                            ))
                        }
                    }
                }
                let r = if name == "min" {
                    ints.into_iter().min()
                } else {
                    ints.into_iter().max()
                };
                r.map(Value::Int).ok_or_else(|| {
                    type_error(pos, &format!("`{name}` needs at least one argument"))
                })
            }
            "zeros" => {
                arity(1)?;
                match vals[0] {
                    Value::Int(n) if n >= 0 => Ok(Value::Array(vec![0; n as usize])),
                    _ => Err(type_error(pos, "`zeros` takes a non-negative integer")),
                }
            }
            _ => Err(ExecError::UnknownName {
                pos,
                name: name.into(),
            }),
        }
    }
}

fn negate(v: Value) -> Value {
    match v {
        Value::Bool(b) => Value::Bool(!b),
        Value::Cond(f) => Value::cond(f.negate()),
        other => other,
    }
}

fn type_error(pos: Pos, message: &str) -> ExecError {
    ExecError::Type {
        pos,
        message: message.into(),
    }
}

fn known(s: &[CharValue]) -> Option<Vec<char>> {
    s.iter()
        .map(|c| match c {
            CharValue::Known(c) => Some(*c),
            CharValue::Sym(_) => None,
        })
        .collect()
}

/// The variable `s` spells out in full, if it is exactly `h` or `l`.
fn whole_var(s: &[CharValue], domain: &StringDomain) -> Option<Var> {
    let CharValue::Sym(first) = s.first()? else {
        return None;
    };
    let v = first.var;
    let full = s.len() == domain.len(v)
        && s.iter()
            .enumerate()
            .all(|(i, c)| *c == CharValue::Sym(CharRef::new(v, i)));
    full.then_some(v)
}
