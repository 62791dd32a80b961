//! Query language: parsing, printing, type checking.
//!
//! ```text
//! query    := or_expr
//! or_expr  := and_expr ("||" and_expr)*
//! and_expr := atom ("&" atom)*
//! atom     := field op value | "(" query ")"
//! op       := "=" | ">" | "<" | ">=" | "<="
//! field    := ident ("." ident)*
//! value    := number unit? | ident ("||" ident)*
//! unit     := "mph" | "kmh" | "mps"
//! ```
//!
//! `||` after a value continues the value list unless the next word is
//! itself followed by an operator, in which case it starts a new branch.

use std::fmt;

use super::{FieldType, Schema, Value};
use crate::units::SpeedUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Gt => ">",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Le => "<=",
        }
    }

    pub fn test(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Op::Eq => lhs == rhs,
            Op::Gt => lhs > rhs,
            Op::Lt => lhs < rhs,
            Op::Ge => lhs >= rhs,
            Op::Le => lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub field: String,
    pub op: Op,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Atom(Atom),
    And(Vec<Query>),
    Or(Vec<Query>),
}

impl Query {
    pub fn atom(field: &str, op: Op, value: impl Into<Value>) -> Query {
        Query::Atom(Atom {
            field: field.to_string(),
            op,
            value: value.into(),
        })
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        fn walk<'a>(q: &'a Query, out: &mut Vec<&'a Atom>) {
            match q {
                Query::Atom(a) => out.push(a),
                Query::And(c) | Query::Or(c) => c.iter().for_each(|q| walk(q, out)),
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown field '{field}' at {pos}")]
    UnknownField { pos: usize, field: String },
    #[error("unit on non-numeric field '{field}' at {pos}")]
    UnitOnString { pos: usize, field: String },
    #[error("operator '{op}' not defined for string field '{field}' at {pos}")]
    StringOrder { pos: usize, field: String, op: &'static str },
    #[error("unknown unit '{unit}' at {pos}")]
    UnknownUnit { pos: usize, unit: String },
}

/// Legacy spellings accepted in queries.
const FIELD_ALIASES: &[(&str, &str)] = &[("ODD.road_way_type", "ODD.roadway_type")];

pub fn canonical_field(name: &str) -> &str {
    FIELD_ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map_or(name, |(_, canon)| canon)
}

fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'-' | b'.' | b'/' | b':')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    schema: &'a Schema,
}

impl<'a> Parser<'a> {
    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::Syntax { pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes().get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Option<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && is_word_char(self.bytes()[self.pos]) {
            self.pos += 1;
        }
        (self.pos > start).then(|| (start, &self.src[start..self.pos]))
    }

    /// After a `||`: is the upcoming text `word op`?
    fn starts_atom(&self) -> bool {
        let b = self.bytes();
        let mut i = self.pos;
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < b.len() && b[i] == b'(' {
            return true;
        }
        let start = i;
        while i < b.len() && is_word_char(b[i]) {
            i += 1;
        }
        if i == start {
            return false;
        }
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        i < b.len() && matches!(b[i], b'=' | b'<' | b'>')
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let mut branches = vec![self.and_expr()?];
        while self.eat("||") {
            branches.push(self.and_expr()?);
        }
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Query::Or(branches) })
    }

    fn and_expr(&mut self) -> Result<Query, QueryError> {
        let mut terms = vec![self.atom()?];
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with("&&") {
                return self.err(self.pos, "use '&' for conjunction");
            }
            if !self.eat("&") {
                break;
            }
            terms.push(self.atom()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Query::And(terms) })
    }

    fn atom(&mut self) -> Result<Query, QueryError> {
        if self.peek() == Some(b'(') {
            let open = self.pos;
            self.pos += 1;
            let q = self.query()?;
            if !self.eat(")") {
                return self.err(self.pos, format!("unclosed '(' opened at {open}"));
            }
            return Ok(q);
        }
        let Some((fpos, raw)) = self.word() else {
            return match self.peek() {
                None => self.err(self.pos, "unexpected end of query, expected a field"),
                Some(c) => self.err(self.pos, format!("unexpected '{}', expected a field", c as char)),
            };
        };
        if raw.split('.').any(|p| p.is_empty() || !p.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_')) {
            return self.err(fpos, format!("malformed field name '{raw}'"));
        }
        let field = canonical_field(raw).to_string();
        let Some(ftype) = self.schema.get(&field) else {
            return Err(QueryError::UnknownField { pos: fpos, field });
        };
        let oppos = {
            self.skip_ws();
            self.pos
        };
        let op = if self.eat(">=") {
            Op::Ge
        } else if self.eat("<=") {
            Op::Le
        } else if self.eat("=") {
            Op::Eq
        } else if self.eat(">") {
            Op::Gt
        } else if self.eat("<") {
            Op::Lt
        } else {
            return self.err(oppos, format!("expected an operator after '{raw}'"));
        };
        match ftype {
            FieldType::Numeric => {
                self.skip_ws();
                let vpos = self.pos;
                let v = self.number(&field)?;
                if self.src[self.pos..].trim_start().starts_with("||") && !self.lookahead_atom_after_or() {
                    return self.err(vpos, format!("value lists are only allowed on string fields ('{field}')"));
                }
                Ok(Query::Atom(Atom { field, op, value: Value::Num(v) }))
            }
            FieldType::String => {
                if op != Op::Eq {
                    return Err(QueryError::StringOrder { pos: oppos, field, op: op.as_str() });
                }
                let mut values = vec![self.string_value(&field)?];
                loop {
                    let save = self.pos;
                    if !self.eat("||") {
                        break;
                    }
                    if self.starts_atom() {
                        self.pos = save;
                        break;
                    }
                    values.push(self.string_value(&field)?);
                }
                let mut atoms: Vec<Query> = values
                    .into_iter()
                    .map(|v| Query::Atom(Atom { field: field.clone(), op, value: Value::Str(v) }))
                    .collect();
                Ok(if atoms.len() == 1 { atoms.pop().unwrap() } else { Query::Or(atoms) })
            }
        }
    }

    fn lookahead_atom_after_or(&self) -> bool {
        let rest = self.src[self.pos..].trim_start();
        let skipped = self.src.len() - rest.len();
        let probe = Parser {
            src: self.src,
            pos: skipped + 2,
            schema: self.schema,
        };
        probe.starts_atom()
    }

    fn string_value(&mut self, field: &str) -> Result<String, QueryError> {
        let Some((vpos, v)) = self.word() else {
            return self.err(self.pos, format!("expected a value for '{field}'"));
        };
        if split_number(v).is_some_and(|(_, unit)| !unit.is_empty() && unit.parse::<SpeedUnit>().is_ok()) {
            return Err(QueryError::UnitOnString { pos: vpos, field: field.to_string() });
        }
        Ok(v.to_string())
    }

    fn number(&mut self, field: &str) -> Result<f64, QueryError> {
        let Some((vpos, v)) = self.word() else {
            return self.err(self.pos, format!("expected a number for '{field}'"));
        };
        let Some((num, unit)) = split_number(v) else {
            return self.err(vpos, format!("'{v}' is not a number ('{field}' is numeric)"));
        };
        let x: f64 = num
            .parse()
            .map_err(|_| QueryError::Syntax { pos: vpos, msg: format!("bad number '{num}'") })?;
        if unit.is_empty() {
            return Ok(x);
        }
        let unit_pos = vpos + num.len();
        match unit {
            "mph" | "kmh" | "mps" => Ok(unit.parse::<SpeedUnit>().expect("known unit").to_si(x)),
            _ => Err(QueryError::UnknownUnit { pos: unit_pos, unit: unit.to_string() }),
        }
    }
}

/// Splits `"50mph"` into `("50", "mph")`; `None` unless the text starts with
/// a well-formed number.
fn split_number(s: &str) -> Option<(&str, &str)> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    let digits = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i == digits || (i == digits + 1 && b[digits] == b'.') {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
            j += 1;
        }
        let exp_digits = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            i = j;
        }
    }
    let unit = &s[i..];
    if !unit.bytes().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    Some((&s[..i], unit))
}

/// Parses against the built-in schema.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    parse_query_with(text, &Schema::builtin())
}

pub fn parse_query_with(text: &str, schema: &Schema) -> Result<Query, QueryError> {
    let mut p = Parser { src: text, pos: 0, schema };
    let q = p.query()?;
    p.skip_ws();
    if p.pos < text.len() {
        let c = text[p.pos..].chars().next().unwrap();
        return p.err(p.pos, format!("unexpected '{c}'"));
    }
    Ok(q)
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Num(x) => format!("{x}"),
        Value::Str(s) => s.clone(),
    }
}

/// `field=a||b` form for an Or of string equalities on one field.
fn compact_or(children: &[Query]) -> Option<String> {
    let mut field = None;
    let mut values = Vec::new();
    for c in children {
        let Query::Atom(a) = c else { return None };
        if a.op != Op::Eq || !matches!(a.value, Value::Str(_)) || field.is_some_and(|f| f != &a.field) {
            return None;
        }
        field = Some(&a.field);
        values.push(fmt_value(&a.value));
    }
    Some(format!("{}={}", field?, values.join("||")))
}

pub fn print_query(q: &Query) -> String {
    match q {
        Query::Atom(a) => format!("{}{}{}", a.field, a.op.as_str(), fmt_value(&a.value)),
        Query::And(children) => children
            .iter()
            .map(|c| match c {
                Query::Atom(_) => print_query(c),
                Query::Or(cc) => compact_or(cc).unwrap_or_else(|| format!("({})", print_query(c))),
                Query::And(_) => format!("({})", print_query(c)),
            })
            .collect::<Vec<_>>()
            .join(" & "),
        Query::Or(children) => {
            if let Some(s) = compact_or(children) {
                return s;
            }
            children
                .iter()
                .map(|c| match c {
                    Query::Or(cc) => compact_or(cc).unwrap_or_else(|| format!("({})", print_query(c))),
                    _ => print_query(c),
                })
                .collect::<Vec<_>>()
                .join(" || ")
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_query(self))
    }
}
