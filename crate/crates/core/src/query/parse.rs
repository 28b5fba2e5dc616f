//! Text grammar:
//!
//! ```text
//! query    := NAME '(' [var (',' var)*] ')' ':=' disjunct ('|' disjunct)*
//! disjunct := ['EXISTS' var (',' var)* '.'] literal ('&' literal)*
//! literal  := ['!'] atom | 'OR' '{' ['!'] atom (';' ['!'] atom)* '}'
//! atom     := symbol '(' term ',' term ')'
//! term     := 'c:' symbol | var
//! ```
//!
//! Variables are `[A-Za-z_][A-Za-z0-9_]*`. Symbols are runs of characters
//! other than whitespace and `(),&|;{}"`, or double-quoted strings with
//! `\"` and `\\` escapes.

use std::fmt;

use thiserror::Error;

use super::{ConjunctiveQuery, DnfQuery, Literal, LiteralKind, NamedDnf, NamedQuery, Term, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
}

impl ParseError {
    /// The offending line with a caret under the error position.
    pub fn render(&self, src: &str) -> String {
        let start = src[..self.offset.min(src.len())].rfind('\n').map_or(0, |i| i + 1);
        let end = src[start..].find('\n').map_or(src.len(), |i| start + i);
        let col = src[start..self.offset.min(src.len())].chars().count();
        format!("{}\n{}\n{}^", self.message, &src[start..end], " ".repeat(col))
    }
}

pub fn parse_query(text: &str) -> Result<NamedDnf, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let q = p.query()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(q)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_symbol_char(c: char) -> bool {
    !c.is_whitespace() && !"(),&|;{}\"".contains(c)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            message: msg.into(),
            offset: self.pos,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        match rest.chars().next() {
            Some(c) if is_ident_start(c) => {}
            _ => return Err(self.error("expected a variable name")),
        }
        let len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        self.pos += len;
        Ok(rest[..len].to_owned())
    }

    fn symbol(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if self.peek() == Some('"') {
            return self.quoted();
        }
        let rest = self.rest();
        let len = rest.find(|c: char| !is_symbol_char(c)).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected a symbol"));
        }
        self.pos += len;
        Ok(rest[..len].to_owned())
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => {
                        self.pos += i;
                        return Err(self.error("invalid escape in quoted symbol"));
                    }
                },
                c => out.push(c),
            }
        }
        self.pos = start;
        Err(self.error("unterminated quoted symbol"))
    }

    fn var_list(&mut self, close: &str) -> Result<Vec<(String, usize)>, ParseError> {
        let mut out = Vec::new();
        self.skip_ws();
        if self.rest().starts_with(close) {
            return Ok(out);
        }
        loop {
            self.skip_ws();
            let at = self.pos;
            out.push((self.ident()?, at));
            if !self.eat(",") {
                break;
            }
        }
        Ok(out)
    }

    fn query(&mut self) -> Result<NamedDnf, ParseError> {
        self.ident()?;
        self.expect("(")?;
        let free = self.var_list(")")?;
        self.expect(")")?;
        self.expect(":=")?;
        for (i, (name, at)) in free.iter().enumerate() {
            if free[..i].iter().any(|(n, _)| n == name) {
                return Err(ParseError {
                    message: format!("variable `{name}` declared twice"),
                    offset: *at,
                });
            }
        }
        let mut disjuncts = Vec::new();
        loop {
            disjuncts.push(self.disjunct(&free)?);
            if !self.eat("|") {
                break;
            }
        }
        Ok(DnfQuery { disjuncts })
    }

    fn at_exists_keyword(&mut self) -> bool {
        self.skip_ws();
        let rest = self.rest();
        if !rest.starts_with("EXISTS") {
            return false;
        }
        let after = rest["EXISTS".len()..].trim_start();
        rest["EXISTS".len()..].starts_with(char::is_whitespace) && !after.starts_with('(')
    }

    fn disjunct(&mut self, free: &[(String, usize)]) -> Result<NamedQuery, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut names: Vec<String> = free.iter().map(|(n, _)| n.clone()).collect();
        let mut exists = Vec::new();
        if self.at_exists_keyword() {
            self.pos += "EXISTS".len();
            for (name, at) in self.var_list(".")? {
                if names.contains(&name) {
                    return Err(ParseError {
                        message: format!("variable `{name}` declared twice"),
                        offset: at,
                    });
                }
                exists.push(VarId(names.len() as u32));
                names.push(name);
            }
            self.expect(".")?;
        }
        let mut literals = Vec::new();
        loop {
            literals.push(self.literal(&names)?);
            if !self.eat("&") {
                break;
            }
        }
        let q = ConjunctiveQuery {
            var_names: names,
            free: (0..free.len() as u32).map(VarId).collect(),
            exists,
            literals,
        };
        q.validate().map_err(|e| ParseError {
            message: e.to_string(),
            offset: start,
        })?;
        Ok(q)
    }

    fn literal(&mut self, names: &[String]) -> Result<Literal<String, String>, ParseError> {
        self.skip_ws();
        let negated = self.eat("!");
        self.skip_ws();
        let at = self.pos;
        let rel = self.symbol()?;
        if rel == "OR" && self.eat("{") {
            if negated {
                return Err(ParseError {
                    message: "clause literals cannot be negated".into(),
                    offset: at,
                });
            }
            let mut body = Vec::new();
            loop {
                self.skip_ws();
                let neg = self.eat("!");
                self.skip_ws();
                let rel = self.symbol()?;
                body.push(self.atom_args(rel, neg, names)?);
                if !self.eat(";") {
                    break;
                }
            }
            self.expect("}")?;
            return Ok(Literal::clause(body));
        }
        self.atom_args(rel, negated, names)
    }

    fn atom_args(
        &mut self,
        rel: String,
        negated: bool,
        names: &[String],
    ) -> Result<Literal<String, String>, ParseError> {
        self.expect("(")?;
        let mut args = Vec::new();
        self.skip_ws();
        if !self.rest().starts_with(')') {
            loop {
                args.push(self.term(names)?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.skip_ws();
        if args.len() != 2 {
            return Err(self.error(format!("atom `{rel}` must have 2 arguments, found {}", args.len())));
        }
        self.expect(")")?;
        let tail = args.pop().expect("two args");
        let head = args.pop().expect("two args");
        Ok(Literal {
            kind: LiteralKind::Atom {
                rel,
                args: [head, tail],
            },
            negated,
        })
    }

    fn term(&mut self, names: &[String]) -> Result<Term<String>, ParseError> {
        self.skip_ws();
        if self.rest().starts_with("c:") {
            self.pos += 2;
            return Ok(Term::Const(self.symbol()?));
        }
        let at = self.pos;
        let name = self.ident()?;
        match names.iter().position(|n| *n == name) {
            Some(i) => Ok(Term::Var(VarId(i as u32))),
            None => Err(ParseError {
                message: format!("unbound variable `{name}`"),
                offset: at,
            }),
        }
    }
}

fn write_symbol(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    let bare = !s.is_empty() && s.chars().all(is_symbol_char) && !s.starts_with('!');
    if bare {
        f.write_str(s)
    } else {
        f.write_str("\"")?;
        for c in s.chars() {
            if c == '"' || c == '\\' {
                f.write_str("\\")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("\"")
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, q: &NamedQuery, lit: &Literal<String, String>) -> fmt::Result {
    match &lit.kind {
        LiteralKind::Clause(body) => {
            f.write_str("OR{ ")?;
            for (i, b) in body.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ; ")?;
                }
                write_literal(f, q, b)?;
            }
            f.write_str(" }")
        }
        LiteralKind::Atom { rel, args } => {
            if lit.negated {
                f.write_str("!")?;
            }
            write_symbol(f, rel)?;
            f.write_str("(")?;
            for (i, t) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match t {
                    Term::Var(v) => f.write_str(q.var_name(*v))?,
                    Term::Const(c) => {
                        f.write_str("c:")?;
                        write_symbol(f, c)?;
                    }
                }
            }
            f.write_str(")")
        }
    }
}

pub(super) fn write_dnf(f: &mut fmt::Formatter<'_>, dnf: &NamedDnf) -> fmt::Result {
    f.write_str("Q(")?;
    f.write_str(&dnf.free_names().join(","))?;
    f.write_str(") := ")?;
    for (i, d) in dnf.disjuncts.iter().enumerate() {
        if i > 0 {
            f.write_str(" | ")?;
        }
        if !d.exists.is_empty() {
            let names: Vec<&str> = d.exists.iter().map(|v| d.var_name(*v)).collect();
            write!(f, "EXISTS {} . ", names.join(","))?;
        }
        for (j, lit) in d.literals.iter().enumerate() {
            if j > 0 {
                f.write_str(" & ")?;
            }
            write_literal(f, d, lit)?;
        }
    }
    Ok(())
}
