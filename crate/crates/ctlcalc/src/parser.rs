//! Text ↔ AST conversion for the s-expression surface syntax.
//!
//! The grammar is unambiguous and line-oriented comments start with `;`.
//! A source file may carry a `;; calculus: mam|del|ac|eff|ref` header
//! comment. `(nat n)` is input sugar for the Peano numeral built from
//! `inj Succ` / `inj Zero`. Runtime labels (`#d0`, `#c0`, ...) have no
//! surface form and cannot be parsed.

use crate::syntax::{
    self, check_calculus, has_labels_comp, pretty_comp, Calculus, Comp, Handler, OpClause, Proj,
    SClause, Value,
};
use std::fmt;

const KEYWORDS: &[&str] = &[
    "pair", "inj", "thunk", "pcase", "case", "force", "return", "let", "lam", "app", "cpair",
    "prj", "shift0", "dollar", "throw", "create", "resume", "yield", "op", "handle", "handler",
    "ret", "on", "ref", "set!", "get", "nat", "labeled",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" | "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrintError {
    #[error("term contains runtime labels and has no surface form")]
    ContainsLabels,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Atom(String),
}

#[derive(Debug, Clone)]
struct Sp {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<Sp>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.chars.peek().copied() {
                None => break,
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('(') => {
                    out.push(Sp {
                        tok: Tok::LParen,
                        line: self.line,
                        col: self.col,
                    });
                    self.bump();
                }
                Some(')') => {
                    out.push(Sp {
                        tok: Tok::RParen,
                        line: self.line,
                        col: self.col,
                    });
                    self.bump();
                }
                Some(c) => {
                    let (line, col) = (self.line, self.col);
                    if c == '#' {
                        return Err(ParseError {
                            line,
                            col,
                            message: "runtime labels cannot be written in source".into(),
                            expected: vec![],
                        });
                    }
                    let mut atom = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                            break;
                        }
                        atom.push(c);
                        self.bump();
                    }
                    out.push(Sp {
                        tok: Tok::Atom(atom),
                        line,
                        col,
                    });
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Sp>,
    pos: usize,
    last_line: usize,
    last_col: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or((self.last_line, self.last_col));
        ParseError {
            line,
            col,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self, expected: &[&str]) -> Result<Tok, ParseError> {
        match self.toks.get(self.pos) {
            Some(sp) => {
                self.pos += 1;
                Ok(sp.tok.clone())
            }
            None => Err(self.err("unexpected end of input", expected)),
        }
    }

    fn expect_lparen(&mut self, what: &str) -> Result<(), ParseError> {
        match self.next(&["("])? {
            Tok::LParen => Ok(()),
            other => Err({
                self.pos -= 1;
                self.err(
                    format!("expected `(` to open {what}, found {other:?}"),
                    &["("],
                )
            }),
        }
    }

    fn expect_rparen(&mut self, what: &str) -> Result<(), ParseError> {
        match self.next(&[")"])? {
            Tok::RParen => Ok(()),
            other => Err({
                self.pos -= 1;
                self.err(
                    format!("expected `)` to close {what}, found {other:?}"),
                    &[")"],
                )
            }),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next(&["identifier"])? {
            Tok::Atom(a) => {
                if KEYWORDS.contains(&a.as_str()) {
                    self.pos -= 1;
                    return Err(self.err(
                        format!("keyword `{a}` cannot be used as {what}"),
                        &["identifier"],
                    ));
                }
                if !valid_ident(&a) {
                    self.pos -= 1;
                    return Err(self.err(format!("invalid identifier `{a}`"), &["identifier"]));
                }
                Ok(a)
            }
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected identifier for {what}"), &["identifier"]))
            }
        }
    }

    /// Constructor tags and operation names live in their own namespace, so
    /// keyword-shaped atoms are fine there (`op shift0` in particular).
    fn name_atom(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next(&["name"])? {
            Tok::Atom(a) => {
                if !valid_ident(&a) {
                    self.pos -= 1;
                    return Err(self.err(format!("invalid name `{a}`"), &["name"]));
                }
                Ok(a)
            }
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected a name for {what}"), &["name"]))
            }
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        match self.peek() {
            Some(Tok::Atom(_)) => {
                let x = self.ident("a variable")?;
                Ok(Value::Var(x))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(Value::Unit)
                    }
                    Some(Tok::Atom(head)) => {
                        let head = head.clone();
                        self.pos += 1;
                        let v = match head.as_str() {
                            "pair" => {
                                let a = self.value()?;
                                let b = self.value()?;
                                Value::Pair(Box::new(a), Box::new(b))
                            }
                            "inj" => {
                                let tag = self.name_atom("a constructor tag")?;
                                let w = self.value()?;
                                Value::Inj(tag, Box::new(w))
                            }
                            "thunk" => Value::Thunk(Box::new(self.comp()?)),
                            "nat" => {
                                let n = self.natural()?;
                                syntax::peano(n)
                            }
                            other => {
                                self.pos -= 1;
                                return Err(self.err(
                                    format!("`{other}` does not begin a value"),
                                    &["pair", "inj", "thunk", "nat", "()"],
                                ));
                            }
                        };
                        self.expect_rparen("value")?;
                        Ok(v)
                    }
                    _ => Err(self.err("expected a value form", &["pair", "inj", "thunk", "nat"])),
                }
            }
            _ => Err(self.err("expected a value", &["identifier", "("])),
        }
    }

    fn natural(&mut self) -> Result<u64, ParseError> {
        match self.next(&["natural number"])? {
            Tok::Atom(a) => a.parse::<u64>().map_err(|_| {
                self.pos -= 1;
                self.err(
                    format!("`{a}` is not a natural number"),
                    &["natural number"],
                )
            }),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a natural number", &["natural number"]))
            }
        }
    }

    fn comp(&mut self) -> Result<Comp, ParseError> {
        self.expect_lparen("a computation")?;
        let head = match self.next(&["computation keyword"])? {
            Tok::Atom(a) => a,
            _ => {
                self.pos -= 1;
                return Err(self.err(
                    "expected a computation keyword",
                    &[
                        "pcase", "case", "force", "return", "let", "lam", "app", "cpair", "prj",
                        "shift0", "dollar", "throw", "create", "resume", "yield", "op", "handle",
                        "ref", "set!", "get",
                    ],
                ));
            }
        };
        let c = match head.as_str() {
            "pcase" => {
                let v = self.value()?;
                self.expect_lparen("pcase binders")?;
                let x1 = self.ident("a binder")?;
                let x2 = self.ident("a binder")?;
                self.expect_rparen("pcase binders")?;
                let body = self.comp()?;
                Comp::PCase(v, x1, x2, Box::new(body))
            }
            "case" => {
                let v = self.value()?;
                let mut clauses = Vec::new();
                while matches!(self.peek(), Some(Tok::LParen)) {
                    self.pos += 1;
                    let tag = self.name_atom("a constructor tag")?;
                    let binder = self.ident("a binder")?;
                    let body = self.comp()?;
                    self.expect_rparen("case clause")?;
                    if clauses.iter().any(|cl: &SClause| cl.tag == tag) {
                        return Err(self.err(format!("duplicate tag `{tag}` in case"), &[]));
                    }
                    clauses.push(SClause { tag, binder, body });
                }
                if clauses.is_empty() {
                    return Err(self.err("case needs at least one clause", &["("]));
                }
                Comp::SCase(v, clauses)
            }
            "force" => Comp::Force(self.value()?),
            "return" => Comp::Return(self.value()?),
            "let" => {
                let x = self.ident("a binder")?;
                let m = self.comp()?;
                let n = self.comp()?;
                Comp::Seq(x, Box::new(m), Box::new(n))
            }
            "lam" => {
                let x = self.ident("a binder")?;
                let m = self.comp()?;
                Comp::Abs(x, Box::new(m))
            }
            "app" => {
                let m = self.comp()?;
                let v = self.value()?;
                Comp::App(Box::new(m), v)
            }
            "cpair" => {
                let m = self.comp()?;
                let n = self.comp()?;
                Comp::CPair(Box::new(m), Box::new(n))
            }
            "prj" => {
                let i = match self.next(&["1", "2"])? {
                    Tok::Atom(a) if a == "1" => Proj::Fst,
                    Tok::Atom(a) if a == "2" => Proj::Snd,
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("projection index must be 1 or 2", &["1", "2"]));
                    }
                };
                Comp::Prj(i, Box::new(self.comp()?))
            }
            "shift0" => {
                let k = self.ident("a binder")?;
                Comp::Shift0(k, Box::new(self.comp()?))
            }
            "dollar" => {
                let m = self.comp()?;
                let x = self.ident("a binder")?;
                let n = self.comp()?;
                Comp::Dollar(Box::new(m), x, Box::new(n))
            }
            "throw" => {
                let v = self.value()?;
                let w = self.value()?;
                Comp::Throw(v, w)
            }
            "create" => Comp::Create(self.value()?),
            "resume" => {
                let v = self.value()?;
                let w = self.value()?;
                Comp::Resume(v, w)
            }
            "yield" => Comp::Yield(self.value()?),
            "op" => {
                let name = self.name_atom("an operation name")?;
                Comp::OpCall(name, self.value()?)
            }
            "handle" => {
                let h = self.handler()?;
                let m = self.comp()?;
                Comp::Handle(Box::new(h), Box::new(m))
            }
            "ref" => Comp::RefCreate(self.value()?),
            "set!" => {
                let v = self.value()?;
                let w = self.value()?;
                Comp::RefSet(v, w)
            }
            "get" => Comp::RefGet(self.value()?),
            other => {
                self.pos -= 1;
                return Err(self.err(
                    format!("`{other}` does not begin a computation"),
                    &[
                        "pcase", "case", "force", "return", "let", "lam", "app", "cpair", "prj",
                        "shift0", "dollar", "throw", "create", "resume", "yield", "op", "handle",
                        "ref", "set!", "get",
                    ],
                ));
            }
        };
        self.expect_rparen("computation")?;
        Ok(c)
    }

    fn handler(&mut self) -> Result<Handler, ParseError> {
        self.expect_lparen("a handler")?;
        match self.next(&["handler"])? {
            Tok::Atom(a) if a == "handler" => {}
            _ => {
                self.pos -= 1;
                return Err(self.err("expected `handler`", &["handler"]));
            }
        }
        self.expect_lparen("the return clause")?;
        match self.next(&["ret"])? {
            Tok::Atom(a) if a == "ret" => {}
            _ => {
                self.pos -= 1;
                return Err(self.err("expected `ret`", &["ret"]));
            }
        }
        let ret_binder = self.ident("a binder")?;
        let ret_body = self.comp()?;
        self.expect_rparen("return clause")?;
        let mut ops: Vec<OpClause> = Vec::new();
        while matches!(self.peek(), Some(Tok::LParen)) {
            self.pos += 1;
            match self.next(&["on"])? {
                Tok::Atom(a) if a == "on" => {}
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected `on`", &["on"]));
                }
            }
            let op = self.name_atom("an operation name")?;
            let param = self.ident("a binder")?;
            let cont = self.ident("a binder")?;
            let body = self.comp()?;
            self.expect_rparen("op clause")?;
            if ops.iter().any(|cl| cl.op == op) {
                return Err(self.err(format!("duplicate op clause `{op}` in handler"), &[]));
            }
            ops.push(OpClause {
                op,
                param,
                cont,
                body,
            });
        }
        self.expect_rparen("handler")?;
        Ok(Handler {
            ret_binder,
            ret_body: Box::new(ret_body),
            ops,
        })
    }
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

/// Parses a closed program of the given calculus. Calculus violations and
/// closedness failures are reported as parse-level errors.
pub fn parse_program(text: &str, calculus: Calculus) -> Result<Comp, ParseError> {
    let c = parse_phrase(text)?;
    if let Err(v) = check_calculus(&c, calculus, true) {
        return Err(ParseError {
            line: 0,
            col: 0,
            message: format!("not a {calculus} program: {v}"),
            expected: vec![],
        });
    }
    Ok(c)
}

/// Parses a computation with no calculus or closedness checks.
pub fn parse_phrase(text: &str) -> Result<Comp, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let (last_line, last_col) = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser {
        toks,
        pos: 0,
        last_line,
        last_col,
    };
    let c = p.comp()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after program", &["end of input"]));
    }
    Ok(c)
}

/// Prints a label-free program; the output re-parses to an alpha-equal term.
pub fn print_program(c: &Comp) -> Result<String, PrintError> {
    if has_labels_comp(c) {
        return Err(PrintError::ContainsLabels);
    }
    Ok(pretty_comp(c))
}

/// A source text together with the calculus it is read as. The calculus
/// comes from an explicit choice (a CLI flag) or the file's
/// `;; calculus:` header comment; the explicit choice wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub text: String,
    pub calculus: Calculus,
}

impl SourceFile {
    pub fn new(text: impl Into<String>, flag: Option<Calculus>) -> Result<Self, ParseError> {
        let text = text.into();
        let calculus = flag.or_else(|| detect_calculus(&text)).ok_or(ParseError {
            line: 1,
            col: 1,
            message: "no calculus given and no `;; calculus:` header found".to_string(),
            expected: vec![],
        })?;
        Ok(SourceFile { text, calculus })
    }

    /// Parses the text as a program of the file's calculus.
    pub fn parse(&self) -> Result<Comp, ParseError> {
        parse_program(&self.text, self.calculus)
    }
}

/// Reads a `;; calculus: <name>` header comment if one is present before any
/// non-comment content.
pub fn detect_calculus(text: &str) -> Option<Calculus> {
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(';') {
            let rest = rest.trim_start_matches(';').trim();
            if let Some(value) = rest.strip_prefix("calculus:") {
                return value.trim().parse().ok();
            }
            continue;
        }
        break;
    }
    None
}
