//! Canonical s-expression text format for formulas.
//!
//! ```text
//! (true) (false)
//! (= (charat h 0) "1")   (= (charat l 0) (charat h 0))
//! (< l h)  (>= l h)  (= h "abcd")  (begins h "ab")
//! (not F)  (and F...)  (or F...)
//! ```

use std::fmt;

use thiserror::Error;

use super::{Atom, CharRef, ConstraintError, Formula, StringDomain, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unknown variable `{name}`")]
    UnknownVariable {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{line}:{column}: {source}")]
    Domain {
        line: usize,
        column: usize,
        source: ConstraintError,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Sym(String),
    Str(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str, first_line: usize) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (first_line, 1);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' | ')' => {
                chars.next();
                column += 1;
                let tok = if c == '(' { Tok::Open } else { Tok::Close };
                tokens.push(Token {
                    tok,
                    line: tl,
                    column: tc,
                });
            }
            '"' => {
                chars.next();
                column += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None | Some('\n') => {
                            return Err(ParseError::Syntax {
                                line: tl,
                                column: tc,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some('"') => {
                            column += 1;
                            break;
                        }
                        Some('\\') => {
                            column += 1;
                            match chars.next() {
                                Some(e @ ('"' | '\\')) => {
                                    column += 1;
                                    s.push(e);
                                }
                                _ => {
                                    return Err(ParseError::Syntax {
                                        line,
                                        column,
                                        message: "invalid escape sequence".into(),
                                    })
                                }
                            }
                        }
                        Some(other) => {
                            column += 1;
                            s.push(other);
                        }
                    }
                }
                tokens.push(Token {
                    tok: Tok::Str(s),
                    line: tl,
                    column: tc,
                });
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    column += 1;
                }
                tokens.push(Token {
                    tok: Tok::Sym(s),
                    line: tl,
                    column: tc,
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    domain: &'a StringDomain,
    end: (usize, usize),
}

impl<'a> Parser<'a> {
    fn err<T>(&self, at: &Token, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: at.line,
            column: at.column,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(ParseError::Syntax {
                line: self.end.0,
                column: self.end.1,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        let t = self.next()?;
        if t.tok != Tok::Close {
            return self.err(&t, "expected `)`");
        }
        Ok(())
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Sym(name) => Var::from_name(name).ok_or(ParseError::UnknownVariable {
                line: t.line,
                column: t.column,
                name: name.clone(),
            }),
            _ => self.err(&t, "expected a variable (`h` or `l`)"),
        }
    }

    fn check(&self, at: &Token, atom: Atom) -> Result<Formula, ParseError> {
        let f = Formula::Atom(atom);
        f.validate(self.domain)
            .map_err(|source| ParseError::Domain {
                line: at.line,
                column: at.column,
                source,
            })?;
        Ok(f)
    }

    /// `(charat VAR IDX)` after the opening paren has been consumed.
    fn charat_body(&mut self) -> Result<CharRef, ParseError> {
        let head = self.next()?;
        if head.tok != Tok::Sym("charat".into()) {
            return self.err(&head, "expected `charat`");
        }
        let var = self.var()?;
        let t = self.next()?;
        let index = match &t.tok {
            Tok::Sym(s) => match s.parse::<usize>() {
                Ok(i) => i,
                Err(_) => return self.err(&t, "expected a non-negative index"),
            },
            _ => return self.err(&t, "expected a non-negative index"),
        };
        self.expect_close()?;
        Ok(CharRef::new(var, index))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let open = self.next()?;
        if open.tok != Tok::Open {
            return self.err(&open, "expected `(`");
        }
        let head = self.next()?;
        let name = match &head.tok {
            Tok::Sym(s) => s.clone(),
            _ => return self.err(&head, "expected an operator"),
        };
        let f = match name.as_str() {
            "true" => Formula::True,
            "false" => Formula::False,
            "not" => self.formula()?.negate_normalized(),
            "and" | "or" => {
                let mut children = Vec::new();
                while self.peek().map(|t| &t.tok) != Some(&Tok::Close) {
                    children.push(self.formula()?);
                }
                if children.is_empty() {
                    return self.err(&head, format!("`{name}` needs at least one operand"));
                }
                if name == "and" {
                    Formula::And(children)
                } else {
                    Formula::Or(children)
                }
            }
            "<" | ">=" => {
                let a = self.var()?;
                let b = self.var()?;
                let atom = if name == "<" {
                    Atom::LexLt(a, b)
                } else {
                    Atom::LexGe(a, b)
                };
                self.check(&head, atom)?
            }
            "begins" => {
                let v = self.var()?;
                let t = self.next()?;
                let Tok::Str(s) = t.tok else {
                    return self.err(&t, "expected a string literal");
                };
                self.check(&head, Atom::BeginsConst(v, s))?
            }
            "=" => self.equality(&head)?,
            _ => return self.err(&head, format!("unknown operator `{name}`")),
        };
        self.expect_close()?;
        Ok(f)
    }

    fn equality(&mut self, head: &Token) -> Result<Formula, ParseError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Open => {
                let left = self.charat_body()?;
                let rhs = self.next()?;
                match rhs.tok {
                    Tok::Str(ref s) => {
                        let mut it = s.chars();
                        match (it.next(), it.next()) {
                            (Some(c), None) => self.check(head, Atom::CharEqConst(left, c)),
                            _ => self.err(&rhs, "expected a single-character literal"),
                        }
                    }
                    Tok::Open => {
                        let right = self.charat_body()?;
                        self.check(head, Atom::CharEqVar(left, right))
                    }
                    _ => self.err(&rhs, "expected a literal or `(charat ...)`"),
                }
            }
            Tok::Sym(name) => {
                let v = Var::from_name(name).ok_or(ParseError::UnknownVariable {
                    line: t.line,
                    column: t.column,
                    name: name.clone(),
                })?;
                let rhs = self.next()?;
                let Tok::Str(s) = rhs.tok else {
                    return self.err(&rhs, "expected a string literal");
                };
                self.check(head, Atom::StrEqConst(v, s))
            }
            _ => self.err(&t, "expected `(charat ...)` or a variable"),
        }
    }
}

impl Formula {
    fn negate_normalized(self) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(a.negate()),
            other => Formula::Not(Box::new(other)),
        }
    }
}

fn parse_tokens(
    tokens: Vec<Token>,
    domain: &StringDomain,
    end: (usize, usize),
) -> Result<Formula, ParseError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        domain,
        end,
    };
    let f = p.formula()?;
    if let Some(t) = p.peek() {
        let t = t.clone();
        return p.err(&t, "trailing input after formula");
    }
    Ok(f)
}

fn end_of(text: &str, first_line: usize) -> (usize, usize) {
    let lines = text.split('\n').count();
    let last = text.rsplit('\n').next().unwrap_or("");
    (first_line + lines - 1, last.chars().count() + 1)
}

/// Parses a single formula and validates it against `domain`.
pub fn parse_formula(text: &str, domain: &StringDomain) -> Result<Formula, ParseError> {
    let tokens = tokenize(text, 1)?;
    parse_tokens(tokens, domain, end_of(text, 1))
}

/// Parses a bundle: one formula per line; blank lines and `;` comments are skipped.
pub fn parse_bundle(text: &str, domain: &StringDomain) -> Result<Vec<Formula>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let tokens = tokenize(line, i + 1)?;
        out.push(parse_tokens(tokens, domain, end_of(line, i + 1))?);
    }
    Ok(out)
}

fn write_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            write!(f, "\\")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str("\"")
}

impl fmt::Display for CharRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(charat {} {})", self.var, self.index)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Atom::LexGe(a, b) = self {
            return write!(f, "(>= {a} {b})");
        }
        if !self.is_positive() {
            return write!(f, "(not {})", self.negate());
        }
        match self {
            Atom::CharEqConst(r, c) => {
                write!(f, "(= {r} ")?;
                write_literal(f, &c.to_string())?;
                f.write_str(")")
            }
            Atom::CharEqVar(a, b) => write!(f, "(= {a} {b})"),
            Atom::LexLt(a, b) => write!(f, "(< {a} {b})"),
            Atom::StrEqConst(v, s) => {
                write!(f, "(= {v} ")?;
                write_literal(f, s)?;
                f.write_str(")")
            }
            Atom::BeginsConst(v, s) => {
                write!(f, "(begins {v} ")?;
                write_literal(f, s)?;
                f.write_str(")")
            }
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("(true)"),
            Formula::False => f.write_str("(false)"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => write!(f, "(not {g})"),
            // The parser wants at least one operand.
            Formula::And(cs) if cs.is_empty() => f.write_str("(true)"),
            Formula::Or(cs) if cs.is_empty() => f.write_str("(false)"),
            Formula::And(cs) | Formula::Or(cs) => {
                f.write_str(if matches!(self, Formula::And(_)) {
                    "(and"
                } else {
                    "(or"
                })?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(i: usize) -> CharRef {
        CharRef::new(Var::High, i)
    }

    #[test]
    fn parses_conjunction_with_negated_atom() {
        let d = StringDomain::digits(4);
        let f = parse_formula(
            r#"(and (= (charat h 0) "1") (not (= (charat h 1) "0")))"#,
            &d,
        )
        .unwrap();
        assert_eq!(
            f,
            Formula::And(vec![
                Atom::CharEqConst(h(0), '1').into(),
                Atom::CharNeqConst(h(1), '0').into(),
            ])
        );
    }

    #[test]
    fn parses_constants_and_lexicographic() {
        let d = StringDomain::digits(4);
        assert_eq!(parse_formula("(true)", &d).unwrap(), Formula::True);
        assert_eq!(
            parse_formula("(< l h)", &d).unwrap(),
            Formula::Atom(Atom::LexLt(Var::Low, Var::High))
        );
        assert_eq!(
            parse_formula("(>= h l)", &d).unwrap(),
            Formula::Atom(Atom::LexGe(Var::High, Var::Low))
        );
    }

    #[test]
    fn reports_position_of_syntax_error() {
        let d = StringDomain::digits(4);
        let err = parse_formula("(and\n  (= (charat h 0) \"1\")\n  (frob h))", &d).unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                line: 3,
                column: 4,
                message: "unknown operator `frob`".into()
            }
        );
    }

    #[test]
    fn rejects_unknown_variable_and_bad_index() {
        let d = StringDomain::digits(4);
        assert!(matches!(
            parse_formula("(< x h)", &d),
            Err(ParseError::UnknownVariable { name, .. }) if name == "x"
        ));
        assert!(matches!(
            parse_formula(r#"(= (charat h 4) "1")"#, &d),
            Err(ParseError::Domain {
                source: ConstraintError::IndexOutOfRange { .. },
                ..
            })
        ));
        assert!(matches!(
            parse_formula(r#"(= (charat h 0) "x")"#, &d),
            Err(ParseError::Domain {
                source: ConstraintError::CharNotInAlphabet('x'),
                ..
            })
        ));
    }

    #[test]
    fn rejects_truncated_input() {
        let d = StringDomain::digits(4);
        assert!(matches!(
            parse_formula("(and (true)", &d),
            Err(ParseError::Syntax { message, .. }) if message == "unexpected end of input"
        ));
        assert!(parse_formula("(true) (false)", &d).is_err());
    }

    #[test]
    fn escapes_round_trip() {
        let d = StringDomain::new(['"', '\\', 'a'], 3, 3).unwrap();
        let f: Formula = Atom::StrEqConst(Var::High, "\"\\a".into()).into();
        let text = f.to_string();
        assert_eq!(text, r#"(= h "\"\\a")"#);
        assert_eq!(parse_formula(&text, &d).unwrap(), f);
    }

    #[test]
    fn bundle_skips_comments_and_reports_line() {
        let d = StringDomain::digits(2);
        let text = "; header\n(true)\n\n(= h \"12\")\n";
        assert_eq!(parse_bundle(text, &d).unwrap().len(), 2);
        let err = parse_bundle("(true)\n(= h \"123\")\n", &d).unwrap_err();
        assert!(matches!(err, ParseError::Domain { line: 2, .. }));
    }
}
