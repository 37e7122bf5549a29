//! Python type annotations as constructor trees.
//!
//! A [`PyType`] is a head constructor (a possibly dotted name such as `int`,
//! `torch.Tensor`, or a special form like `Union`) applied to an ordered list
//! of argument types. Two auxiliary node shapes exist:
//!
//! - bracketed argument lists (`Callable[[A, B], R]`) use the head `[]` and do
//!   not count as constructors;
//! - literal values inside `Literal[...]` and the `...` ellipsis are kept as
//!   leaf heads carrying their source text.
//!
//! The canonical rendering (`Display`) has no spaces: `Dict[str,List[int]]`.
//! [`PyType::to_source`] renders with `, ` separators for insertion into code.

mod freq;
mod normalize;

pub use freq::{categorize, Category, ConstructorFrequencyTable, Frequency, Shape};
pub use normalize::{adjust_for_comparison, annotation_source, base_head, normalize};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Head used for the bracketed parameter list in `Callable[[A], B]`.
pub const LIST_HEAD: &str = "[]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PyType {
    pub head: String,
    pub args: Vec<PyType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid type annotation at offset {position}: {message}")]
pub struct TypeParseError {
    pub message: String,
    pub position: usize,
}

impl PyType {
    pub fn simple(head: impl Into<String>) -> Self {
        PyType { head: head.into(), args: Vec::new() }
    }

    pub fn new(head: impl Into<String>, args: Vec<PyType>) -> Self {
        PyType { head: head.into(), args }
    }

    pub fn any() -> Self {
        Self::simple("Any")
    }

    pub fn none() -> Self {
        Self::simple("None")
    }

    pub fn parse(text: &str) -> Result<Self, TypeParseError> {
        parse_type(text)
    }

    pub fn is_any(&self) -> bool {
        self.head == "Any" && self.args.is_empty()
    }

    pub fn is_none(&self) -> bool {
        self.head == "None" && self.args.is_empty()
    }

    pub fn is_list_node(&self) -> bool {
        self.head == LIST_HEAD
    }

    /// Number of type constructors in the tree. Bracketed argument lists are
    /// containers, not constructors, so they contribute only their members.
    pub fn size(&self) -> usize {
        let own = usize::from(!self.is_list_node());
        own + self.args.iter().map(PyType::size).sum::<usize>()
    }

    /// All constructor heads in pre-order.
    pub fn constructors(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_constructors(&mut out);
        out
    }

    fn collect_constructors<'a>(&'a self, out: &mut Vec<&'a str>) {
        if !self.is_list_node() {
            out.push(&self.head);
        }
        for arg in &self.args {
            arg.collect_constructors(out);
        }
    }

    /// Rendering suitable for writing back into Python source.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, ", ");
        s
    }

    fn render_into(&self, out: &mut String, sep: &str) {
        if self.is_list_node() {
            out.push('[');
            render_args(&self.args, out, sep);
            out.push(']');
            return;
        }
        out.push_str(&self.head);
        if !self.args.is_empty() {
            out.push('[');
            render_args(&self.args, out, sep);
            out.push(']');
        }
    }
}

fn render_args(args: &[PyType], out: &mut String, sep: &str) {
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        arg.render_into(out, sep);
    }
}

impl fmt::Display for PyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render_into(&mut s, ",");
        f.write_str(&s)
    }
}

impl FromStr for PyType {
    type Err = TypeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

impl Serialize for PyType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PyType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_type(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses an annotation expression. String forward references are unwrapped,
/// except inside `Literal[...]` where strings are values. `A | B` becomes
/// `Union[A,B]`.
pub fn parse_type(text: &str) -> Result<PyType, TypeParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len() };
    let ty = parser.union(false)?;
    match parser.peek() {
        None => Ok(ty),
        Some(tok) => Err(TypeParseError {
            message: format!("unexpected `{}`", tok.kind.describe()),
            position: tok.offset,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Name(String),
    Str(String),
    Number(String),
    Ellipsis,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Pipe,
    Minus,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Name(n) => n.clone(),
            TokKind::Str(s) => s.clone(),
            TokKind::Number(n) => n.clone(),
            TokKind::Ellipsis => "...".into(),
            TokKind::LBracket => "[".into(),
            TokKind::RBracket => "]".into(),
            TokKind::Comma => ",".into(),
            TokKind::Dot => ".".into(),
            TokKind::Pipe => "|".into(),
            TokKind::Minus => "-".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Tok>, TypeParseError> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() || c == '\\' {
            i += 1;
            continue;
        }
        let kind = match c {
            '[' => TokKind::LBracket,
            ']' => TokKind::RBracket,
            ',' => TokKind::Comma,
            '|' => TokKind::Pipe,
            '-' => TokKind::Minus,
            '.' => {
                if text[off..].starts_with("...") {
                    i += 3;
                    out.push(Tok { kind: TokKind::Ellipsis, offset: off });
                    continue;
                }
                TokKind::Dot
            }
            '"' | '\'' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].1 != c {
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(TypeParseError {
                        message: "unterminated string".into(),
                        position: off,
                    });
                }
                let end = bytes[j].0 + c.len_utf8();
                out.push(Tok { kind: TokKind::Str(text[off..end].to_string()), offset: off });
                i = j + 1;
                continue;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].1.is_ascii_alphanumeric() || bytes[j].1 == '_' || bytes[j].1 == '.') {
                    j += 1;
                }
                let end = if j < bytes.len() { bytes[j].0 } else { text.len() };
                out.push(Tok { kind: TokKind::Number(text[off..end].to_string()), offset: off });
                i = j;
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].1.is_alphanumeric() || bytes[j].1 == '_') {
                    j += 1;
                }
                let end = if j < bytes.len() { bytes[j].0 } else { text.len() };
                out.push(Tok { kind: TokKind::Name(text[off..end].to_string()), offset: off });
                i = j;
                continue;
            }
            other => {
                return Err(TypeParseError {
                    message: format!("unexpected character `{other}`"),
                    position: off,
                })
            }
        };
        out.push(Tok { kind, offset: off });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, TypeParseError> {
        Err(TypeParseError { message: message.into(), position: self.offset() })
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn union(&mut self, in_literal: bool) -> Result<PyType, TypeParseError> {
        let first = self.primary(in_literal)?;
        if self.peek().map(|t| &t.kind) != Some(&TokKind::Pipe) {
            return Ok(first);
        }
        let mut members = vec![first];
        while self.eat(&TokKind::Pipe) {
            members.push(self.primary(in_literal)?);
        }
        Ok(PyType::new("Union", members))
    }

    fn primary(&mut self, in_literal: bool) -> Result<PyType, TypeParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected a type");
        };
        match tok.kind {
            TokKind::Name(first) => {
                self.pos += 1;
                let mut head = first;
                while self.eat(&TokKind::Dot) {
                    match self.peek().map(|t| t.kind.clone()) {
                        Some(TokKind::Name(seg)) => {
                            self.pos += 1;
                            head.push('.');
                            head.push_str(&seg);
                        }
                        _ => return self.error("expected identifier after `.`"),
                    }
                }
                let mut args = Vec::new();
                if self.eat(&TokKind::LBracket) {
                    let literal = head == "Literal" || head.ends_with(".Literal");
                    args = self.arg_list(literal)?;
                    if args.is_empty() {
                        return self.error("empty subscript");
                    }
                }
                Ok(PyType { head, args })
            }
            TokKind::Str(lit) => {
                self.pos += 1;
                if in_literal {
                    return Ok(PyType::simple(lit));
                }
                let inner = &lit[1..lit.len() - 1];
                parse_type(inner).map_err(|e| TypeParseError {
                    message: format!("in forward reference: {}", e.message),
                    position: tok.offset + 1 + e.position,
                })
            }
            TokKind::Number(n) => {
                self.pos += 1;
                Ok(PyType::simple(n))
            }
            TokKind::Minus => {
                self.pos += 1;
                match self.peek().map(|t| t.kind.clone()) {
                    Some(TokKind::Number(n)) => {
                        self.pos += 1;
                        Ok(PyType::simple(format!("-{n}")))
                    }
                    _ => self.error("expected number after `-`"),
                }
            }
            TokKind::Ellipsis => {
                self.pos += 1;
                Ok(PyType::simple("..."))
            }
            TokKind::LBracket => {
                self.pos += 1;
                let args = self.arg_list(in_literal)?;
                Ok(PyType::new(LIST_HEAD, args))
            }
            other => self.error(format!("unexpected `{}`", other.describe())),
        }
    }

    /// Parses `a, b, c]` after an opening bracket. Trailing commas are allowed.
    fn arg_list(&mut self, in_literal: bool) -> Result<Vec<PyType>, TypeParseError> {
        let mut args = Vec::new();
        loop {
            if self.eat(&TokKind::RBracket) {
                return Ok(args);
            }
            args.push(self.union(in_literal)?);
            if self.eat(&TokKind::Comma) {
                continue;
            }
            if self.eat(&TokKind::RBracket) {
                return Ok(args);
            }
            return self.error("expected `,` or `]`");
        }
    }
}
