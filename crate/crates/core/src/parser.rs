//! Concrete syntax.
//!
//! ```text
//! term    ::= \x. term | \x : T. term | rec g x. term | rec g x : T -> U. term
//!           | if term then term else term | let x = term in term
//!           | letdown x = term in term | eq
//! eq      ::= sum (== sum)*
//! sum     ::= product ((+|-) product)*
//! product ::= app (* app)*
//! app     ::= atom atom*
//! atom    ::= x | `name` | n | (-n) | "s" | true | false | #t | #eval{T} | ( term )
//!           | $( term ) | [| term |] | eval( term ) | eval{T}( term ) | lift( term )
//!           | astX( term, ... ) | astEval{T}( term )
//! ```
//!
//! A binder form (`\`, `rec`, `if`, `let`, `letdown`) may also appear as the
//! last operand of an operator or application and then extends as far right
//! as possible. `let` is sugar for an applied lambda. Any text between
//! backquotes is a variable name, so every string can name a variable.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::signature;
use crate::syntax::{BinOp, Tag, TagName, Term, TypeExpr};
use crate::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    fn new(start: usize, end: usize) -> SourceSpan {
        SourceSpan { start, end }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{message} at {span}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    fn new(span: SourceSpan, message: impl Into<String>) -> ParseError {
        ParseError {
            span,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    fn expected(span: SourceSpan, found: &Tok, expected: &[&str]) -> ParseError {
        ParseError {
            span,
            message: format!("expected {}, found {}", expected.join(" or "), found.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

const KEYWORDS: [&str; 11] = [
    "rec", "if", "then", "else", "let", "letdown", "in", "eval", "lift", "true", "false",
];

/// Whether `s` can be written as a variable: lexically an identifier and
/// neither a keyword nor an AST constructor name.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        && !KEYWORDS.contains(&s)
        && TagName::from_ctor_keyword(s).is_none()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    QuotedIdent(String),
    Int(BigInt),
    Str(String),
    Tag(String),
    Backslash,
    Dot,
    Colon,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Dollar,
    OpenQuote,
    CloseQuote,
    Plus,
    Minus,
    Star,
    EqEq,
    Equals,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::QuotedIdent(s) => format!("quoted name `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Tag(t) => format!("`#{t}`"),
            Tok::Backslash => "`\\`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::Dollar => "`$`".to_string(),
            Tok::OpenQuote => "`[|`".to_string(),
            Tok::CloseQuote => "`|]`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::EqEq => "`==`".to_string(),
            Tok::Equals => "`=`".to_string(),
            Tok::Arrow => "`->`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if input[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let two = |s: &str| input[i..].starts_with(s);
        let (tok, len) = if two("[|") {
            (Tok::OpenQuote, 2)
        } else if two("|]") {
            (Tok::CloseQuote, 2)
        } else if two("==") {
            (Tok::EqEq, 2)
        } else if two("->") {
            (Tok::Arrow, 2)
        } else {
            match c {
                b'\\' => (Tok::Backslash, 1),
                b'.' => (Tok::Dot, 1),
                b':' => (Tok::Colon, 1),
                b',' => (Tok::Comma, 1),
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'{' => (Tok::LBrace, 1),
                b'}' => (Tok::RBrace, 1),
                b'$' => (Tok::Dollar, 1),
                b'+' => (Tok::Plus, 1),
                b'-' => (Tok::Minus, 1),
                b'*' => (Tok::Star, 1),
                b'=' => (Tok::Equals, 1),
                b'#' => {
                    let mut j = i + 1;
                    while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
                        j += 1;
                    }
                    if j == i + 1 {
                        return Err(ParseError::new(
                            SourceSpan::new(i, i + 1),
                            "expected a tag name after `#`",
                        ));
                    }
                    (Tok::Tag(input[i + 1..j].to_string()), j - i)
                }
                b'"' => {
                    let (s, len) = lex_quoted(input, i, '"')?;
                    (Tok::Str(s), len)
                }
                b'`' => {
                    let (s, len) = lex_quoted(input, i, '`')?;
                    (Tok::QuotedIdent(s), len)
                }
                b'0'..=b'9' => {
                    let mut j = i;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    let n: BigInt = input[i..j].parse().expect("digits");
                    (Tok::Int(n), j - i)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i;
                    while j < bytes.len()
                        && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'\'')
                    {
                        j += 1;
                    }
                    (Tok::Ident(input[i..j].to_string()), j - i)
                }
                _ => {
                    let ch = input[i..].chars().next().expect("non-empty");
                    return Err(ParseError::new(
                        SourceSpan::new(i, i + ch.len_utf8()),
                        format!("unexpected character `{ch}`"),
                    ));
                }
            }
        };
        i += len;
        toks.push((tok, SourceSpan::new(start, i)));
    }
    toks.push((Tok::Eof, SourceSpan::new(input.len(), input.len())));
    Ok(toks)
}

/// A `delim`-delimited literal with escapes, starting at byte `start`.
fn lex_quoted(input: &str, start: usize, delim: char) -> Result<(String, usize), ParseError> {
    let mut out = String::new();
    let mut chars = input[start + 1..].char_indices();
    while let Some((off, ch)) = chars.next() {
        let pos = start + 1 + off;
        match ch {
            c if c == delim => return Ok((out, pos + 1 - start)),
            '\\' => {
                let Some((_, esc)) = chars.next() else {
                    break;
                };
                match esc {
                    '"' => out.push('"'),
                    '`' => out.push('`'),
                    '\\' => out.push('\\'),
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    'u' => {
                        let rest = &input[pos + 2..];
                        let close = rest.find('}').filter(|_| rest.starts_with('{'));
                        let code = close
                            .and_then(|c| u32::from_str_radix(&rest[1..c], 16).ok())
                            .and_then(char::from_u32);
                        match (code, close) {
                            (Some(c), Some(close)) => {
                                out.push(c);
                                for _ in 0..=close {
                                    chars.next();
                                }
                            }
                            _ => {
                                return Err(ParseError::new(
                                    SourceSpan::new(pos, pos + 2),
                                    "malformed unicode escape",
                                ))
                            }
                        }
                    }
                    other => {
                        return Err(ParseError::new(
                            SourceSpan::new(pos, pos + 1 + other.len_utf8()),
                            format!("unknown escape `\\{other}`"),
                        ))
                    }
                }
            }
            c => out.push(c),
        }
    }
    Err(ParseError::new(
        SourceSpan::new(start, input.len()),
        if delim == '"' {
            "unterminated string literal"
        } else {
            "unterminated quoted name"
        },
    ))
}

/// Parses one complete term.
pub fn parse_term(input: &str, mode: Mode) -> Result<Term, ParseError> {
    let mut p = Parser::new(input, mode)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_type(input: &str) -> Result<TypeExpr, ParseError> {
    let mut p = Parser::new(input, Mode::Typed)?;
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    mode: Mode,
}

impl Parser {
    fn new(input: &str, mode: Mode) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: lex(input)?,
            pos: 0,
            mode,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<SourceSpan, ParseError> {
        if self.peek() == &tok {
            Ok(self.bump().1)
        } else {
            Err(ParseError::expected(self.span(), self.peek(), &[what]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            other => Err(ParseError::expected(self.span(), other, &["end of input"])),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::expected(self.span(), self.peek(), &[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_identifier(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::QuotedIdent(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) => Err(ParseError {
                span: self.span(),
                message: format!("`{s}` is reserved and cannot be used as a variable"),
                expected: vec!["identifier".to_string()],
            }),
            other => Err(ParseError::expected(self.span(), &other, &["identifier"])),
        }
    }

    fn starts_binder_form(&self) -> bool {
        matches!(self.peek(), Tok::Backslash)
            || ["rec", "if", "let", "letdown"].iter().any(|k| self.is_keyword(k))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                !KEYWORDS.contains(&s.as_str()) || ["eval", "lift", "true", "false"].contains(&s.as_str())
            }
            Tok::Int(_)
            | Tok::QuotedIdent(_)
            | Tok::Str(_)
            | Tok::Tag(_)
            | Tok::LParen
            | Tok::Dollar
            | Tok::OpenQuote => true,
            _ => false,
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.starts_binder_form() {
            self.binder_form()
        } else {
            self.eq_level()
        }
    }

    fn binder_form(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::Backslash) {
            let param = self.ident()?;
            let annot = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
            self.expect(Tok::Dot, "`.`")?;
            let body = self.term()?;
            return Ok(Term::Lam {
                param,
                annot,
                body: Box::new(body),
            });
        }
        let Tok::Ident(kw) = self.peek().clone() else {
            unreachable!("checked by starts_binder_form")
        };
        self.bump();
        match kw.as_str() {
            "rec" => {
                let name = self.ident()?;
                let param = self.ident()?;
                let annot = if self.eat(&Tok::Colon) {
                    let span = self.span();
                    match self.ty()? {
                        TypeExpr::Arrow(a, b) => Some((*a, *b)),
                        other => {
                            return Err(ParseError::new(
                                span,
                                format!("a recursive function needs an arrow type, found `{other}`"),
                            ))
                        }
                    }
                } else {
                    None
                };
                self.expect(Tok::Dot, "`.`")?;
                let body = self.term()?;
                Ok(Term::Rec {
                    name,
                    param,
                    annot,
                    body: Box::new(body),
                })
            }
            "if" => {
                let c = self.term()?;
                self.expect_keyword("then")?;
                let t = self.term()?;
                self.expect_keyword("else")?;
                let e = self.term()?;
                Ok(Term::if_(c, t, e))
            }
            "let" | "letdown" => {
                let name = self.ident()?;
                self.expect(Tok::Equals, "`=`")?;
                let bound = self.term()?;
                self.expect_keyword("in")?;
                let body = self.term()?;
                if kw == "let" {
                    Ok(Term::app(Term::lam(name, body), bound))
                } else {
                    Ok(Term::let_down(name, bound, body))
                }
            }
            _ => unreachable!("checked by starts_binder_form"),
        }
    }

    fn operand(&mut self, next: fn(&mut Parser) -> Result<Term, ParseError>) -> Result<Term, ParseError> {
        if self.starts_binder_form() {
            self.binder_form()
        } else {
            next(self)
        }
    }

    fn eq_level(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.operand(Parser::sum_level)?;
        while self.eat(&Tok::EqEq) {
            let rhs = self.operand(Parser::sum_level)?;
            lhs = Term::bin(BinOp::Eq, lhs, rhs);
        }
        Ok(lhs)
    }

    fn sum_level(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.operand(Parser::product_level)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.operand(Parser::product_level)?;
            lhs = Term::bin(op, lhs, rhs);
        }
    }

    fn product_level(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.operand(Parser::app_level)?;
        while self.eat(&Tok::Star) {
            let rhs = self.operand(Parser::app_level)?;
            lhs = Term::bin(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn app_level(&mut self) -> Result<Term, ParseError> {
        let mut f = self.atom()?;
        loop {
            if self.starts_binder_form() {
                let arg = self.binder_form()?;
                return Ok(Term::app(f, arg));
            }
            if !self.starts_atom() {
                return Ok(f);
            }
            let arg = self.atom()?;
            f = Term::app(f, arg);
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Int(n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(n) = self.bump().0 else { unreachable!() };
                Ok(Term::Int(-n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Str(s))
            }
            Tok::QuotedIdent(s) => {
                self.bump();
                Ok(Term::Var(s))
            }
            Tok::Tag(word) => {
                self.bump();
                let name = TagName::from_surface(&word)
                    .ok_or_else(|| ParseError::new(span, format!("unknown tag `#{word}`")))?;
                let annot = self.eval_annotation(name, span)?;
                Ok(Term::TagLit(Tag {
                    name,
                    eval_annot: annot,
                }))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Dollar => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Term::down(t))
            }
            Tok::OpenQuote => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::CloseQuote, "`|]`")?;
                Ok(Term::up(t))
            }
            Tok::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Term::Bool(word == "true"))
                }
                "eval" => {
                    self.bump();
                    let annot = self.eval_annotation(TagName::Eval, span)?;
                    let mut args = self.args()?;
                    if args.len() != 1 {
                        return Err(ParseError::new(span, "`eval` takes exactly one argument"));
                    }
                    Ok(Term::eval(annot, args.remove(0)))
                }
                "lift" => {
                    self.bump();
                    let mut args = self.args()?;
                    if args.len() != 1 {
                        return Err(ParseError::new(span, "`lift` takes exactly one argument"));
                    }
                    Ok(Term::lift(args.remove(0)))
                }
                _ => {
                    if let Some(tag) = TagName::from_ctor_keyword(&word) {
                        self.bump();
                        let annot = self.eval_annotation(tag, span)?;
                        let args = self.args()?;
                        if !signature::check_arity(tag, args.len()) {
                            return Err(ParseError::new(
                                SourceSpan::new(span.start, self.toks[self.pos - 1].1.end),
                                format!(
                                    "`{word}` takes {} argument(s), found {}",
                                    signature::describe_arity(tag),
                                    args.len()
                                ),
                            ));
                        }
                        Ok(Term::Ast(
                            Tag {
                                name: tag,
                                eval_annot: annot,
                            },
                            args,
                        ))
                    } else {
                        Ok(Term::Var(self.ident()?))
                    }
                }
            },
            other => Err(ParseError::expected(span, &other, &["a term"])),
        }
    }

    /// `{T}` after `eval`, `astEval` or `#eval`: required in typed mode and
    /// rejected in untyped mode. Other tags never take one.
    fn eval_annotation(&mut self, tag: TagName, span: SourceSpan) -> Result<Option<TypeExpr>, ParseError> {
        let present = self.peek() == &Tok::LBrace;
        match (tag, present, self.mode) {
            (TagName::Eval, true, Mode::Typed) => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Some(t))
            }
            (TagName::Eval, false, Mode::Typed) => Err(ParseError {
                span,
                message: "`eval` needs a type annotation `{T}` in typed mode".to_string(),
                expected: vec!["`{`".to_string()],
            }),
            (TagName::Eval, true, Mode::Untyped) => Err(ParseError::new(
                self.span(),
                "type annotations on `eval` are only allowed in typed mode",
            )),
            (_, true, _) => Err(ParseError::new(self.span(), "only `eval` takes a type annotation")),
            (_, false, _) => Ok(None),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            return Err(ParseError::expected(self.span(), self.peek(), &["`,`", "`)`"]));
        }
    }

    fn ty(&mut self) -> Result<TypeExpr, ParseError> {
        let from = self.ty_atom()?;
        if self.eat(&Tok::Arrow) {
            let to = self.ty()?;
            Ok(TypeExpr::arrow(from, to))
        } else {
            Ok(from)
        }
    }

    fn ty_atom(&mut self) -> Result<TypeExpr, ParseError> {
        let span = self.span();
        match self.bump().0 {
            Tok::LParen => {
                let t = self.ty()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) => match name.as_str() {
                "Int" => Ok(TypeExpr::Int),
                "Bool" => Ok(TypeExpr::Bool),
                "String" => Ok(TypeExpr::String),
                "Code" => Ok(TypeExpr::Code),
                "Tag" => {
                    let span = self.span();
                    match self.bump().0 {
                        Tok::Tag(word) => TagName::from_surface(&word)
                            .map(TypeExpr::Tag)
                            .ok_or_else(|| ParseError::new(span, format!("unknown tag `#{word}`"))),
                        other => Err(ParseError::expected(span, &other, &["a tag such as `#lam`"])),
                    }
                }
                _ => Err(ParseError {
                    span,
                    message: format!("unknown type `{name}`"),
                    expected: vec!["a type".to_string()],
                }),
            },
            other => Err(ParseError::expected(span, &other, &["a type"])),
        }
    }
}
