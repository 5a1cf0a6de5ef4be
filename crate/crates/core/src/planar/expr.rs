//! A small arithmetic language for planar field components.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, the variables
//! `x` and `y`, the constants `pi` and `e`, and the functions `sin`, `cos`,
//! `exp`, `ln`, `sqrt` and `pow(a, b)`. Expressions compile to a stack
//! program that evaluates over any [`Scalar`].

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {col}: {msg}")]
pub struct ExprError {
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X,
    Y,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Powi(i32),
    Powf,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

const MAX_STACK: usize = 64;

/// A compiled expression in x and y.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    ops: Vec<Op>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, ops: Vec::new() };
        p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(ExprError { col: t.col, msg: format!("unexpected {:?}", t.kind) });
        }
        let expr = Self { source: src.to_string(), ops: p.ops };
        if expr.max_depth() > MAX_STACK {
            return Err(ExprError { col: 0, msg: "expression nests too deeply".into() });
        }
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn max_depth(&self) -> usize {
        let mut depth: usize = 0;
        let mut max = 0;
        for op in &self.ops {
            match op {
                Op::Const(_) | Op::X | Op::Y => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Powf => depth -= 1,
                _ => {}
            }
            max = max.max(depth);
        }
        max
    }

    pub fn eval<T: Scalar>(&self, x: T, y: T) -> T {
        let mut stack = [T::cst(0.0); MAX_STACK];
        let mut sp = 0;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    stack[sp] = T::cst(c);
                    sp += 1;
                }
                Op::X => {
                    stack[sp] = x;
                    sp += 1;
                }
                Op::Y => {
                    stack[sp] = y;
                    sp += 1;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Powf => {
                    sp -= 1;
                    let (a, b) = (stack[sp - 1], stack[sp]);
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        _ => a.powf(b),
                    };
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Powi(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::Sin => stack[sp - 1] = stack[sp - 1].sin(),
                Op::Cos => stack[sp - 1] = stack[sp - 1].cos(),
                Op::Exp => stack[sp - 1] = stack[sp - 1].exp(),
                Op::Ln => stack[sp - 1] = stack[sp - 1].ln(),
                Op::Sqrt => stack[sp - 1] = stack[sp - 1].sqrt(),
            }
        }
        stack[0]
    }
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

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    col: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' | '−' => Some(Tok::Minus),
            '*' | '×' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            out.push(Token { kind, col });
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ExprError { col, msg: format!("bad number {text:?}") })?;
            out.push(Token { kind: Tok::Num(v), col });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { kind: Tok::Ident(chars[start..i].iter().collect()), col });
        } else {
            return Err(ExprError { col, msg: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    ops: Vec<Op>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn col(&self) -> usize {
        self.tokens.get(self.pos).map_or_else(
            || self.tokens.last().map_or(1, |t| t.col + 1),
            |t| t.col,
        )
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError { col: self.col(), msg: format!("expected {want:?}") })
        }
    }

    fn expr(&mut self) -> Result<(), ExprError> {
        self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => Op::Add,
                Some(Tok::Minus) => Op::Sub,
                _ => return Ok(()),
            };
            self.pos += 1;
            self.term()?;
            self.ops.push(op);
        }
    }

    fn term(&mut self) -> Result<(), ExprError> {
        self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => Op::Mul,
                Some(Tok::Slash) => Op::Div,
                _ => return Ok(()),
            };
            self.pos += 1;
            self.unary()?;
            self.ops.push(op);
        }
    }

    fn unary(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            self.unary()?;
            self.ops.push(Op::Neg);
            return Ok(());
        }
        self.power()
    }

    fn power(&mut self) -> Result<(), ExprError> {
        self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let mark = self.ops.len();
            self.unary()?;
            self.push_pow(mark);
        }
        Ok(())
    }

    /// Integer literal exponents become `powi` so negative bases work.
    fn push_pow(&mut self, exponent_start: usize) {
        let exponent = &self.ops[exponent_start..];
        let literal = match exponent {
            [Op::Const(c)] => Some(*c),
            [Op::Const(c), Op::Neg] => Some(-*c),
            _ => None,
        };
        match literal {
            Some(n) if n.fract() == 0.0 && n.abs() <= 64.0 => {
                self.ops.truncate(exponent_start);
                self.ops.push(Op::Powi(n as i32));
            }
            _ => self.ops.push(Op::Powf),
        }
    }

    fn atom(&mut self) -> Result<(), ExprError> {
        let col = self.col();
        let Some(tok) = self.tokens.get(self.pos).map(|t| t.kind.clone()) else {
            return Err(ExprError { col, msg: "unexpected end of expression".into() });
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => self.ops.push(Op::Const(v)),
            Tok::LParen => {
                self.expr()?;
                self.expect(Tok::RParen)?;
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    self.call(&name, col)?;
                } else {
                    let op = match name.as_str() {
                        "x" => Op::X,
                        "y" => Op::Y,
                        "pi" => Op::Const(std::f64::consts::PI),
                        "e" => Op::Const(std::f64::consts::E),
                        _ => return Err(ExprError { col, msg: format!("unknown name {name:?}") }),
                    };
                    self.ops.push(op);
                }
            }
            other => return Err(ExprError { col, msg: format!("unexpected {other:?}") }),
        }
        Ok(())
    }

    fn call(&mut self, name: &str, col: usize) -> Result<(), ExprError> {
        if name == "pow" {
            self.expr()?;
            self.expect(Tok::Comma)?;
            let mark = self.ops.len();
            self.expr()?;
            self.expect(Tok::RParen)?;
            self.push_pow(mark);
            return Ok(());
        }
        let op = match name {
            "sin" => Op::Sin,
            "cos" => Op::Cos,
            "exp" => Op::Exp,
            "ln" | "log" => Op::Ln,
            "sqrt" => Op::Sqrt,
            _ => return Err(ExprError { col, msg: format!("unknown function {name:?}") }),
        };
        self.expr()?;
        self.expect(Tok::RParen)?;
        self.ops.push(op);
        Ok(())
    }
}
