//! Text form of constraint rules.
//!
//! ```text
//! rule := "If" cond ("and" cond)* "then" cons
//! cond := "user." ident ("=" | "!=") literal
//! cons := "product." ident ("=" | "!=") literal
//!       | "product.id" "in" "{" id ("," id)* "}"
//! ```
//!
//! Keywords are case-insensitive. Identifiers are matched ignoring case and
//! underscores, so `carsharing_usage` and `car_sharing_usage` name the same
//! variable. A rule file holds one rule per line; `#` starts a comment.

use std::fmt;

use super::{
    Answer, CmpOp, Condition, ConditionValue, Consequence, ConstraintRule, FrequencyKind,
    ProductAttribute, UserVariable,
};
use crate::catalog::Mode;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct RuleError {
    pub line: usize,
    pub column: usize,
    pub kind: RuleErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown user variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown product attribute `{0}`")]
    UnknownAttribute(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Dot,
    Eq,
    Ne,
    LBrace,
    RBrace,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "number {s}"),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize)>,
    end_col: usize,
}

fn lex(text: &str, line: usize) -> Result<Lexed, RuleError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |col: usize, msg: String| RuleError {
        line,
        column: col,
        kind: RuleErrorKind::Syntax(msg),
    };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '.' => {
                toks.push((Tok::Dot, col));
                i += 1;
            }
            '=' => {
                toks.push((Tok::Eq, col));
                i += 1;
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                toks.push((Tok::Ne, col));
                i += 2;
            }
            '{' => {
                toks.push((Tok::LBrace, col));
                i += 1;
            }
            '}' => {
                toks.push((Tok::RBrace, col));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, col));
                i += 1;
            }
            '\'' | '"' => {
                let quote = c;
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != quote {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(err(col, "unterminated string literal".into()));
                }
                toks.push((Tok::Str(chars[start..j].iter().collect()), col));
                i = j + 1;
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    // a dot followed by a letter belongs to a path, not a number
                    if chars[i] == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        break;
                    }
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                if s == "-" {
                    return Err(err(col, "expected digits after `-`".into()));
                }
                toks.push((Tok::Number(s), col));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(Lexed {
        toks,
        end_col: chars.len() + 1,
    })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

impl Parser {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn error(&self, column: usize, kind: RuleErrorKind) -> RuleError {
        RuleError {
            line: self.line,
            column,
            kind,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> RuleError {
        self.error(self.col(), RuleErrorKind::Syntax(msg.into()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self, what: &str) -> Result<(Tok, usize), RuleError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(self.syntax(format!("expected {what}, found end of rule"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), RuleError> {
        let col = self.col();
        let (t, _) = self.next(what)?;
        if t == tok {
            Ok(())
        } else {
            Err(self.error(col, RuleErrorKind::Syntax(format!("expected {what}, found {t}"))))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RuleError> {
        if self.is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            let found = self
                .peek()
                .map_or_else(|| "end of rule".to_string(), |t| t.to_string());
            Err(self.syntax(format!("expected `{kw}`, found {found}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), RuleError> {
        let col = self.col();
        match self.next(what)? {
            (Tok::Ident(s), c) => Ok((s, c)),
            (t, _) => Err(self.error(col, RuleErrorKind::Syntax(format!("expected {what}, found {t}")))),
        }
    }

    fn op(&mut self) -> Result<CmpOp, RuleError> {
        let col = self.col();
        match self.next("`=` or `!=`")? {
            (Tok::Eq, _) => Ok(CmpOp::Eq),
            (Tok::Ne, _) => Ok(CmpOp::Ne),
            (t, _) => Err(self.error(col, RuleErrorKind::Syntax(format!("expected `=` or `!=`, found {t}")))),
        }
    }

    /// Raw literal text plus its column.
    fn literal(&mut self) -> Result<(String, usize), RuleError> {
        let col = self.col();
        match self.next("a literal")? {
            (Tok::Str(s) | Tok::Number(s) | Tok::Ident(s), c) => Ok((s, c)),
            (t, _) => Err(self.error(col, RuleErrorKind::Syntax(format!("expected a literal, found {t}")))),
        }
    }

    fn condition(&mut self) -> Result<Condition, RuleError> {
        let (root, col) = self.ident("`user`")?;
        if !root.eq_ignore_ascii_case("user") {
            return Err(self.error(col, RuleErrorKind::Syntax(format!("expected `user.`, found `{root}`"))));
        }
        self.expect(Tok::Dot, "`.`")?;
        let (name, name_col) = self.ident("a user variable")?;
        let variable = UserVariable::parse(&name)
            .ok_or_else(|| self.error(name_col, RuleErrorKind::UnknownVariable(name.clone())))?;
        let op = self.op()?;
        let (lit, lit_col) = self.literal()?;
        let value = match variable {
            UserVariable::DrivingLicense | UserVariable::CanCycle | UserVariable::FareReductions => {
                match lit.to_ascii_lowercase().as_str() {
                    "yes" | "true" => ConditionValue::Answer(Answer::Yes),
                    "no" | "false" => ConditionValue::Answer(Answer::No),
                    _ => {
                        return Err(self.error(
                            lit_col,
                            RuleErrorKind::Syntax(format!("`{name}` takes 'yes' or 'no', found '{lit}'")),
                        ))
                    }
                }
            }
            UserVariable::Usage(_) => match FrequencyKind::parse(&lit) {
                Some(k) => ConditionValue::Frequency(k),
                None => {
                    return Err(self.error(
                        lit_col,
                        RuleErrorKind::Syntax(format!("`{lit}` is not a usage frequency")),
                    ))
                }
            },
        };
        Ok(Condition { variable, op, value })
    }

    fn id_token(&mut self) -> Result<String, RuleError> {
        let col = self.col();
        match self.next("a plan id")? {
            (Tok::Str(s) | Tok::Number(s) | Tok::Ident(s), _) => Ok(s),
            (t, _) => Err(self.error(col, RuleErrorKind::Syntax(format!("expected a plan id, found {t}")))),
        }
    }

    fn consequence(&mut self) -> Result<Consequence, RuleError> {
        let (root, col) = self.ident("`product`")?;
        if !root.eq_ignore_ascii_case("product") {
            return Err(self.error(col, RuleErrorKind::Syntax(format!("expected `product.`, found `{root}`"))));
        }
        self.expect(Tok::Dot, "`.`")?;
        let (name, name_col) = self.ident("a product attribute")?;
        if squash(&name) == "id" {
            if self.is_keyword("in") {
                self.pos += 1;
                self.expect(Tok::LBrace, "`{`")?;
                let mut ids = vec![self.id_token()?];
                loop {
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.pos += 1;
                            ids.push(self.id_token()?);
                        }
                        Some(Tok::RBrace) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.syntax("expected `,` or `}` in id list")),
                    }
                }
                return Ok(Consequence::IdIn(ids));
            }
            let op = self.op()?;
            let id = self.id_token()?;
            return Ok(Consequence::Id { op, id });
        }
        let attribute = ProductAttribute::parse(&name)
            .ok_or_else(|| self.error(name_col, RuleErrorKind::UnknownAttribute(name.clone())))?;
        let op = self.op()?;
        let (lit, lit_col) = self.literal()?;
        let value: f64 = lit.trim().parse().map_err(|_| {
            self.error(
                lit_col,
                RuleErrorKind::Syntax(format!("`{name}` compares against a number, found '{lit}'")),
            )
        })?;
        Ok(Consequence::Attribute { attribute, op, value })
    }

    fn rule(&mut self) -> Result<(Vec<Condition>, Consequence), RuleError> {
        self.keyword("if")?;
        let mut conditions = vec![self.condition()?];
        while self.is_keyword("and") {
            self.pos += 1;
            conditions.push(self.condition()?);
        }
        self.keyword("then")?;
        let consequence = self.consequence()?;
        if let Some(t) = self.peek() {
            return Err(self.syntax(format!("unexpected {t} after consequence")));
        }
        Ok((conditions, consequence))
    }
}

pub(super) fn parse_line(id: String, text: &str, line: usize) -> Result<ConstraintRule, RuleError> {
    let Lexed { toks, end_col } = lex(text, line)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col,
    };
    let (condition, consequence) = p.rule()?;
    Ok(ConstraintRule {
        id,
        condition,
        consequence,
    })
}

/// Strips a trailing `#` comment that is not inside a quoted literal.
pub(super) fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (c, quote) {
            ('\'' | '"', None) => quote = Some(c),
            (c, Some(q)) if c == q => quote = None,
            ('#', None) => return &line[..i],
            _ => {}
        }
    }
    line
}

pub(super) fn mode_ident(mode: Mode) -> &'static str {
    mode.as_str()
}
