//! Surface syntax: `Head(x,z) :- Body1(x,y), Body2(y,z).`
//!
//! Predicates start with an uppercase letter, variables with a lowercase
//! one; both may continue with letters, digits or `_`. Whitespace is free.
//! Every rule ends with a period.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: [String; 2],
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.predicate, self.args[0], self.args[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ".")
    }
}

impl Rule {
    pub fn is_recursive(&self) -> bool {
        self.body.iter().any(|a| a.predicate == self.head.predicate)
    }
}

/// Parses exactly one rule.
pub fn parse_rule(text: &str) -> Result<Rule> {
    let mut p = Parser::new(text);
    p.skip_ws();
    let rule = p.rule()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected input after rule"));
    }
    Ok(rule)
}

/// Parses a sequence of rules; `%` starts a line comment.
pub fn parse_program(text: &str) -> Result<Vec<Rule>> {
    let mut p = Parser::new(text);
    let mut rules = Vec::new();
    loop {
        p.skip_ws();
        if p.at_end() {
            break;
        }
        rules.push(p.rule()?);
    }
    if rules.is_empty() {
        return Err(p.error("empty program"));
    }
    Ok(rules)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

#[derive(PartialEq)]
enum Case {
    Upper,
    Lower,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn line_start(&self, pos: usize) -> usize {
        self.text[..pos].rfind('\n').map_or(0, |i| i + 1)
    }

    fn column_at(&self, pos: usize) -> usize {
        self.text[self.line_start(pos)..pos].chars().count() + 1
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        let line_start = self.line_start(self.pos);
        let line_end = self.text[self.pos..]
            .find('\n')
            .map_or(self.text.len(), |i| self.pos + i);
        Error::Syntax {
            text: self.text[line_start..line_end].to_owned(),
            column: self.column_at(self.pos),
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        loop {
            let r = self.rest();
            let trimmed = r.trim_start();
            self.pos += r.len() - trimmed.len();
            if trimmed.starts_with('%') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn ident(&mut self, case: Case, what: &str) -> Result<String> {
        self.skip_ws();
        let r = self.rest();
        let first = r.chars().next();
        let ok = match (first, &case) {
            (Some(c), Case::Upper) => c.is_ascii_uppercase(),
            (Some(c), Case::Lower) => c.is_ascii_lowercase(),
            (None, _) => false,
        };
        if !ok {
            return Err(self.error(format!("expected {what}")));
        }
        let len = r
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(r.len());
        self.pos += len;
        Ok(r[..len].to_owned())
    }

    fn atom(&mut self) -> Result<Atom> {
        self.skip_ws();
        let start = self.pos;
        let predicate = self.ident(Case::Upper, "predicate name (capitalized)")?;
        self.expect("(")?;
        let mut args = vec![self.ident(Case::Lower, "variable (lowercase)")?];
        loop {
            self.skip_ws();
            if self.rest().starts_with(',') {
                self.pos += 1;
                args.push(self.ident(Case::Lower, "variable (lowercase)")?);
            } else {
                break;
            }
        }
        self.expect(")")?;
        let args: [String; 2] = args.try_into().map_err(|a: Vec<String>| {
            Error::Rule(format!(
                "unsupported arity {} for `{predicate}` at column {}: only binary predicates are supported",
                a.len(),
                self.column_at(start)
            ))
        })?;
        Ok(Atom { predicate, args })
    }

    fn rule(&mut self) -> Result<Rule> {
        let head = self.atom()?;
        self.expect(":-")?;
        let mut body = vec![self.atom()?];
        loop {
            self.skip_ws();
            if self.rest().starts_with(',') {
                self.pos += 1;
                body.push(self.atom()?);
            } else {
                break;
            }
        }
        self.expect(".")?;
        for v in &head.args {
            if !body.iter().any(|a| a.args.contains(v)) {
                return Err(Error::Rule(format!(
                    "head variable `{v}` of `{head}` does not occur in the body"
                )));
            }
        }
        Ok(Rule { head, body })
    }
}
