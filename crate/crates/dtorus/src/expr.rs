//! Scalar expressions of the phase variables.
//!
//! Systems are defined in plain-text config files, so the coefficient
//! functions `a(phi)`, `P(phi)` and `f(phi)` are given as expression
//! strings over the phase variables `phi1..phim` (`phi` is accepted as
//! an alias for `phi1` when `m = 1`).
//!
//! Grammar (precedence low to high):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-(2^2) = -4`.
//! There is no implicit multiplication: `2phi` is a parse error.
//!
//! Functions: `sin cos tan tanh sinh cosh exp log sqrt abs`, with the
//! short forms `th`, `ch`, `sh`, `ln` accepted as aliases.

use std::fmt;

/// Unary functions available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" | "th" => Func::Tanh,
            "sinh" | "sh" => Func::Sinh,
            "cosh" | "ch" => Func::Cosh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Tanh => x.tanh(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    /// Zero-based phase-variable index (`phi1` is index 0).
    Phase(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

/// A parsed, immutable expression. Evaluation is deterministic and
/// thread-safe: the same AST at the same `phi` gives bit-identical
/// results.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    /// Number of phase variables required (highest index used + 1).
    max_phase: usize,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected {}", expected.join(", "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes exactly one argument (at byte {offset})")]
    ArityMismatch { name: String, offset: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("expression references phi{needed} but only {got} phase variables were supplied")]
    DimensionMismatch { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v:?}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    found: format!("`{text}`"),
                    expected: vec!["number".into()],
                })?;
                toks.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    found: format!("`{}`", &src[i..i + 1]),
                    expected: vec!["token".into()],
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.src_len)
    }

    fn found(&self) -> String {
        match self.toks.get(self.pos) {
            Some((t, _)) => t.describe(),
            None => "end of input".into(),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: self.offset(),
                found: self.found(),
                expected: vec![what.into()],
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect(&Tok::LParen, "`(`")?;
                    let arg = self.expr()?;
                    if self.peek() == Some(&Tok::Comma) {
                        return Err(ParseError::ArityMismatch { name, offset });
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(Node::Call(f, Box::new(arg)))
                } else if let Some(idx) = phase_index(&name) {
                    Ok(Node::Phase(idx))
                } else {
                    Err(ParseError::UnknownIdentifier { name, offset })
                }
            }
            other => Err(ParseError::Syntax {
                offset,
                found: other
                    .map(|t| t.describe())
                    .unwrap_or_else(|| "end of input".into()),
                expected: vec!["number".into(), "identifier".into(), "`(`".into(), "`-`".into()],
            }),
        }
    }
}

fn phase_index(name: &str) -> Option<usize> {
    if name == "phi" {
        return Some(0);
    }
    let rest = name.strip_prefix("phi")?;
    if rest.is_empty() || rest.starts_with('0') {
        return None;
    }
    let k: usize = rest.parse().ok()?;
    Some(k - 1)
}

fn max_phase(node: &Node) -> usize {
    match node {
        Node::Const(_) => 0,
        Node::Phase(i) => i + 1,
        Node::Neg(a) | Node::Call(_, a) => max_phase(a),
        Node::Bin(_, a, b) => max_phase(a).max(max_phase(b)),
    }
}

fn eval_node(node: &Node, phi: &[f64]) -> f64 {
    match node {
        Node::Const(v) => *v,
        Node::Phase(i) => phi[*i],
        Node::Neg(a) => -eval_node(a, phi),
        Node::Call(f, a) => f.apply(eval_node(a, phi)),
        Node::Bin(op, a, b) => {
            let x = eval_node(a, phi);
            let y = eval_node(b, phi);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => x.powf(y),
            }
        }
    }
}

impl Expression {
    /// Parse an expression from source text.
    pub fn parse(src: &str) -> Result<Expression, ParseError> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            src_len: src.len(),
        };
        let root = p.expr()?;
        if p.pos != toks.len() {
            return Err(ParseError::Syntax {
                offset: p.offset(),
                found: p.found(),
                expected: vec!["operator".into(), "end of input".into()],
            });
        }
        let max_phase = max_phase(&root);
        Ok(Expression { root, max_phase })
    }

    /// Parse a constant expression (convenience for matrix literals).
    pub fn constant(v: f64) -> Expression {
        Expression {
            root: Node::Const(v),
            max_phase: 0,
        }
    }

    /// Highest phase-variable index used, plus one.
    pub fn phase_dim(&self) -> usize {
        self.max_phase
    }

    /// Evaluate at the given phase point. Non-finite results are
    /// returned as-is; the caller decides what to do with them.
    pub fn eval(&self, phi: &[f64]) -> Result<f64, EvalError> {
        if self.max_phase > phi.len() {
            return Err(EvalError::DimensionMismatch {
                needed: self.max_phase,
                got: phi.len(),
            });
        }
        Ok(eval_node(&self.root, phi))
    }

    /// Evaluate without the dimension check. Panics on out-of-range
    /// phase index; use after validating against the system dimension.
    pub fn eval_unchecked(&self, phi: &[f64]) -> f64 {
        eval_node(&self.root, phi)
    }

    /// True when the expression is a literal constant equal to `v`.
    pub fn is_const(&self, v: f64) -> bool {
        matches!(self.root, Node::Const(c) if c == v)
    }
}

// Precedence levels for printing: must agree with the grammar.
fn prec(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Const(_) | Node::Phase(_) | Node::Call(..) => 5,
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Const(v) => {
            if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                write!(f, "({v:?})")
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::Phase(i) => write!(f, "phi{}", i + 1),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_child(f, a, 3)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ("+", 1, 2),
                // right operand of `-` needs parens at the same level
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                // pow's base must be an atom; its exponent admits unary
                BinOp::Pow => ("^", 5, 3),
            };
            write_child(f, a, lp)?;
            write!(f, "{sym}")?;
            write_child(f, b, rp)
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, node: &Node, min_prec: u8) -> fmt::Result {
    if prec(node) < min_prec {
        write!(f, "(")?;
        write_node(f, node)?;
        write!(f, ")")
    } else {
        write_node(f, node)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root)
    }
}
