//! Symbolic terms: the values used for events, fluents and fluent values.
//!
//! Every term has a canonical textual form (`obs(cgm,14.0)`, `[doctor,rule0]`,
//! `'Mixed Case'`) which is unique per structurally-equal term. The kd index
//! hashes that form with 64-bit FNV-1a, see [`symbol_hash`].

use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use fnv::FnvHasher;
use ordered_float::OrderedFloat;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kd::{Coord, NEG_INF, POS_INF};

/// A single argument of a compound term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Int(i64),
    Dec(OrderedFloat<f64>),
    List(Vec<Arg>),
    Term(Term),
}

impl Arg {
    /// Decimal argument; `-0.0` is normalised to `0.0`. Panics on non-finite input.
    pub fn dec(v: f64) -> Arg {
        assert!(v.is_finite(), "decimal term arguments must be finite");
        Arg::Dec(OrderedFloat(if v == 0.0 { 0.0 } else { v }))
    }

    pub fn atom(name: &str) -> Arg {
        Arg::Term(Term::atom(name))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Arg::Int(i) => Some(*i as f64),
            Arg::Dec(d) => Some(d.0),
            _ => None,
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            Arg::Term(t) => Some(t),
            _ => None,
        }
    }

    fn heap_bytes(&self) -> usize {
        match self {
            Arg::Int(_) | Arg::Dec(_) => 0,
            Arg::List(items) => {
                items.len() * std::mem::size_of::<Arg>()
                    + items.iter().map(Arg::heap_bytes).sum::<usize>()
            }
            Arg::Term(t) => t.heap_bytes(),
        }
    }
}

impl From<Term> for Arg {
    fn from(t: Term) -> Self {
        Arg::Term(t)
    }
}

impl From<i64> for Arg {
    fn from(v: i64) -> Self {
        Arg::Int(v)
    }
}

impl From<f64> for Arg {
    fn from(v: f64) -> Self {
        Arg::dec(v)
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TermData {
    functor: String,
    args: Vec<Arg>,
}

/// A functor applied to zero or more arguments. Cloning is O(1).
#[derive(Clone)]
pub struct Term(Arc<TermData>);

impl Term {
    pub fn new(functor: impl Into<String>, args: Vec<Arg>) -> Term {
        Term(Arc::new(TermData {
            functor: functor.into(),
            args,
        }))
    }

    pub fn atom(name: impl Into<String>) -> Term {
        Term::new(name, Vec::new())
    }

    pub fn functor(&self) -> &str {
        &self.0.functor
    }

    pub fn args(&self) -> &[Arg] {
        &self.0.args
    }

    pub fn arity(&self) -> usize {
        self.0.args.len()
    }

    pub fn arg(&self, i: usize) -> Option<&Arg> {
        self.0.args.get(i)
    }

    pub fn is_atom(&self) -> bool {
        self.0.args.is_empty()
    }

    /// Canonical textual form.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Stable 64-bit key of the canonical form.
    pub fn key_hash(&self) -> Coord {
        hash_display(self)
    }

    /// Bytes owned by this term outside its inline handle. Shared subterms are
    /// counted as if they were unshared.
    pub fn heap_bytes(&self) -> usize {
        std::mem::size_of::<TermData>()
            + self.0.functor.capacity()
            + self.0.args.len() * std::mem::size_of::<Arg>()
            + self.0.args.iter().map(Arg::heap_bytes).sum::<usize>()
    }

    pub fn parse(text: &str) -> Result<Term, ParseError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        p.skip_ws();
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Term {}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.cmp(&other.0)
    }
}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn is_plain_atom(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_atom(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_plain_atom(s) {
        return f.write_str(s);
    }
    f.write_char('\'')?;
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('\'')
}

/// Decimal rendering shared by terms and rule text: always carries a `.` or an
/// exponent so it never reads back as an integer.
pub fn format_decimal(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Int(i) => write!(f, "{i}"),
            Arg::Dec(d) => f.write_str(&format_decimal(d.0)),
            Arg::List(items) => {
                f.write_char('[')?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_char(']')
            }
            Arg::Term(t) => write!(f, "{t}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, &self.0.functor)?;
        if !self.0.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.0.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Term::parse(&text).map_err(serde::de::Error::custom)
    }
}

struct FnvWriter(FnvHasher);

impl fmt::Write for FnvWriter {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        self.0.write(s.as_bytes());
        Ok(())
    }
}

fn remap_sentinels(h: u64) -> Coord {
    match h as i64 {
        NEG_INF => NEG_INF + 1,
        POS_INF => POS_INF - 1,
        v => v,
    }
}

/// 64-bit FNV-1a of the UTF-8 bytes of `text`, reinterpreted as a signed
/// coordinate. The two sentinel values are remapped to their neighbours so a
/// hashed symbol can never be mistaken for an unbounded range end.
pub fn symbol_hash(text: &str) -> Coord {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    remap_sentinels(h.finish())
}

/// [`symbol_hash`] of a value's `Display` output, without an intermediate `String`.
pub fn hash_display(v: &impl fmt::Display) -> Coord {
    let mut w = FnvWriter(FnvHasher::default());
    write!(w, "{v}").expect("fnv writer is infallible");
    remap_sentinels(w.0.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn atom_name(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'\'') => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.peek() {
                        None => return Err(self.err("unterminated quoted atom")),
                        Some(b'\\') => {
                            self.pos += 1;
                            match self.peek() {
                                Some(c) => {
                                    out.push(c);
                                    self.pos += 1;
                                }
                                None => return Err(self.err("dangling escape")),
                            }
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                String::from_utf8(out).map_err(|_| self.err("invalid utf-8 in atom"))
            }
            Some(b'a'..=b'z') => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => Err(self.err("expected atom")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let functor = self.atom_name()?;
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                args.push(self.arg()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        Ok(Term::new(functor, args))
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                self.skip_ws();
                if self.peek() == Some(b']') {
                    self.pos += 1;
                    return Ok(Arg::List(items));
                }
                loop {
                    items.push(self.arg()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b']') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ']'")),
                    }
                }
                Ok(Arg::List(items))
            }
            Some(b'-' | b'0'..=b'9') => self.number(),
            _ => self.term().map(Arg::Term),
        }
    }

    fn number(&mut self) -> Result<Arg, ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let mut decimal = false;
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' => {}
                b'.' | b'e' | b'E' => decimal = true,
                b'+' | b'-' if matches!(self.src[self.pos - 1], b'e' | b'E') => {}
                _ => break,
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if decimal {
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Arg::dec(v)),
                _ => Err(self.err("malformed decimal")),
            }
        } else {
            text.parse::<i64>()
                .map(Arg::Int)
                .map_err(|_| self.err("malformed integer"))
        }
    }
}
