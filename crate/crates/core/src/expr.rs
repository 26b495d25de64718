//! A small arithmetic expression language for user-supplied constructions.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/" | "·") unary)*
//! unary := ("-" | "+") unary | power
//! power := atom ("^" unary)?
//! atom  := number | name | func "(" expr ")" | "(" expr ")"
//! name  := u1 | u2 | y1 | y2 | pi
//! func  := sqrt | sin | cos | exp | ln
//! ```
//!
//! Expressions evaluate over any [`Real`], so the same text can be run on
//! plain numbers or on Taylor polynomials.

use crate::error::{FslError, Result};
use crate::taylor::Real;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Ln,
}

/// A parsed expression in the variables `u1, u2, y1, y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

pub const VAR_NAMES: [&str; 4] = ["u1", "u2", "y1", "y2"];

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = fold(p.expr()?);
        if p.pos != p.tokens.len() {
            return Err(FslError::Expression(format!(
                "unexpected trailing input in `{src}` at token {}",
                p.pos
            )));
        }
        Ok(Expr {
            source: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether variable `idx` (0..4 for u1, u2, y1, y2) occurs.
    pub fn uses_var(&self, idx: usize) -> bool {
        fn walk(n: &Node, idx: usize) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(i) => *i == idx,
                Node::Neg(a) | Node::Call(_, a) => walk(a, idx),
                Node::Add(a, b)
                | Node::Sub(a, b)
                | Node::Mul(a, b)
                | Node::Div(a, b)
                | Node::Pow(a, b) => walk(a, idx) || walk(b, idx),
            }
        }
        walk(&self.root, idx)
    }

    /// Evaluate with `vars = [u1, u2, y1, y2]`.
    pub fn eval<R: Real>(&self, vars: &[R; 4]) -> R {
        eval_node(&self.root, vars)
    }
}

/// Constant folding, so that e.g. `2^3^2` keeps an integer exponent.
fn fold(n: Node) -> Node {
    let bin = |a: Box<Node>, b: Box<Node>, k: fn(Box<Node>, Box<Node>) -> Node| {
        k(Box::new(fold(*a)), Box::new(fold(*b)))
    };
    let n = match n {
        Node::Neg(a) => Node::Neg(Box::new(fold(*a))),
        Node::Call(f, a) => Node::Call(f, Box::new(fold(*a))),
        Node::Add(a, b) => bin(a, b, Node::Add),
        Node::Sub(a, b) => bin(a, b, Node::Sub),
        Node::Mul(a, b) => bin(a, b, Node::Mul),
        Node::Div(a, b) => bin(a, b, Node::Div),
        Node::Pow(a, b) => bin(a, b, Node::Pow),
        other => other,
    };
    let constant = match &n {
        Node::Num(_) | Node::Var(_) => None,
        Node::Neg(a) | Node::Call(_, a) => matches!(**a, Node::Num(_)).then_some(()),
        Node::Add(a, b)
        | Node::Sub(a, b)
        | Node::Mul(a, b)
        | Node::Div(a, b)
        | Node::Pow(a, b) => {
            (matches!(**a, Node::Num(_)) && matches!(**b, Node::Num(_))).then_some(())
        }
    };
    match constant {
        Some(()) => Node::Num(eval_node(&n, &[0.0f64; 4])),
        None => n,
    }
}

fn eval_node<R: Real>(n: &Node, vars: &[R; 4]) -> R {
    match n {
        Node::Num(c) => vars[0].lift(*c),
        Node::Var(i) => vars[*i].clone(),
        Node::Neg(a) => -eval_node(a, vars),
        Node::Add(a, b) => eval_node(a, vars) + eval_node(b, vars),
        Node::Sub(a, b) => eval_node(a, vars) - eval_node(b, vars),
        Node::Mul(a, b) => eval_node(a, vars) * eval_node(b, vars),
        Node::Div(a, b) => eval_node(a, vars) / eval_node(b, vars),
        Node::Pow(a, b) => {
            let base = eval_node(a, vars);
            match **b {
                Node::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                Node::Num(e) => base.powf(e),
                _ => (base.ln() * eval_node(b, vars)).exp(),
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, vars);
            match f {
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| FslError::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else if "+-*/^·−".contains(c) {
            let op = match c {
                '·' => '*',
                '−' => '-',
                other => other,
            };
            out.push(Tok::Op(op));
            i += 1;
        } else {
            return Err(FslError::Expression(format!(
                "unexpected character `{c}` in `{src}`"
            )));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(FslError::Expression("missing `)`".into())),
                }
            }
            Some(Tok::Ident(name)) => {
                if let Some(i) = VAR_NAMES.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                let func = match name.as_str() {
                    "sqrt" => Func::Sqrt,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    _ => {
                        return Err(FslError::Expression(format!("unknown name `{name}`")));
                    }
                };
                match self.next() {
                    Some(Tok::LParen) => {}
                    _ => {
                        return Err(FslError::Expression(format!("`{name}` expects `(`")));
                    }
                }
                let arg = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(Node::Call(func, Box::new(arg))),
                    _ => Err(FslError::Expression("missing `)`".into())),
                }
            }
            other => Err(FslError::Expression(format!("unexpected token {other:?}"))),
        }
    }
}
