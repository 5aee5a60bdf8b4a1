//! Closed-form scalar expressions in the coordinates `x0, x1, ...`.
//!
//! Expressions are parsed once and compiled to a flat postfix program so
//! that evaluation inside the integrator does no allocation. Accepted syntax:
//! numbers, `x0..x9` (aliases `x`, `y`, `z`), `pi`, `+ - * / ^`, unary minus,
//! parentheses, the functions `sin cos tan exp ln log sqrt abs tanh sinh cosh
//! atan` and the two-argument `atan2 min max pow`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const STACK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowI(i32),
    Neg,
    F1(Func1),
    F2(Func2),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Atan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func2 {
    Atan2,
    Min,
    Max,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

/// A compiled scalar expression.
#[derive(Clone)]
pub struct Expr {
    source: String,
    ops: Vec<Op>,
    max_var: Option<usize>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            source,
        };
        let node = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(parser.err("unexpected trailing input"));
        }
        let node = fold(node);
        let mut ops = Vec::new();
        emit(&node, &mut ops);
        let depth = stack_depth(&ops);
        if depth > STACK {
            return Err(Error::Expression {
                source_text: source.to_string(),
                message: format!("expression too deep ({depth} > {STACK})"),
            });
        }
        let max_var = ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(*i),
                _ => None,
            })
            .max();
        Ok(Self {
            source: source.to_string(),
            ops,
            max_var,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        self.max_var
    }

    pub fn is_constant(&self) -> bool {
        self.max_var.is_none()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut stack = [0.0f64; STACK];
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    stack[sp] = c;
                    sp += 1;
                }
                Op::Var(i) => {
                    stack[sp] = x[i];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::PowI(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::F1(f) => {
                    let a = stack[sp - 1];
                    stack[sp - 1] = match f {
                        Func1::Sin => a.sin(),
                        Func1::Cos => a.cos(),
                        Func1::Tan => a.tan(),
                        Func1::Exp => a.exp(),
                        Func1::Ln => a.ln(),
                        Func1::Sqrt => a.sqrt(),
                        Func1::Abs => a.abs(),
                        Func1::Tanh => a.tanh(),
                        Func1::Sinh => a.sinh(),
                        Func1::Cosh => a.cosh(),
                        Func1::Atan => a.atan(),
                    };
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow | Op::F2(_) => {
                    let b = stack[sp - 1];
                    let a = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow | Op::F2(Func2::Pow) => a.powf(b),
                        Op::F2(Func2::Atan2) => a.atan2(b),
                        Op::F2(Func2::Min) => a.min(b),
                        Op::F2(Func2::Max) => a.max(b),
                        _ => unreachable!(),
                    };
                }
            }
        }
        stack[0]
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Number(v) => format!("{v:?}"),
        };
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
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
            let v = text.parse::<f64>().map_err(|_| Error::Expression {
                source_text: src.to_string(),
                message: format!("bad number `{text}`"),
            })?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression {
                source_text: src.to_string(),
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> Error {
        Error::Expression {
            source_text: self.source.to_string(),
            message: format!("{message} (token {})", self.pos),
        }
    }

    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Sym(c) => Err(self.err(&format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                if self.peek_sym() == Some('(') {
                    self.pos += 1;
                    let a = self.expr()?;
                    let node = if let Some(f) = func1(&name) {
                        Node::Call1(f, Box::new(a))
                    } else if let Some(f) = func2(&name) {
                        self.expect(',')?;
                        let b = self.expr()?;
                        Node::Call2(f, Box::new(a), Box::new(b))
                    } else {
                        return Err(self.err(&format!("unknown function `{name}`")));
                    };
                    self.expect(')')?;
                    return Ok(node);
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "x" => Ok(Node::Var(0)),
                    "y" => Ok(Node::Var(1)),
                    "z" => Ok(Node::Var(2)),
                    _ => match name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                        Some(i) => Ok(Node::Var(i)),
                        None => Err(self.err(&format!("unknown identifier `{name}`"))),
                    },
                }
            }
        }
    }
}

fn func1(name: &str) -> Option<Func1> {
    Some(match name {
        "sin" => Func1::Sin,
        "cos" => Func1::Cos,
        "tan" => Func1::Tan,
        "exp" => Func1::Exp,
        "ln" | "log" => Func1::Ln,
        "sqrt" => Func1::Sqrt,
        "abs" => Func1::Abs,
        "tanh" => Func1::Tanh,
        "sinh" => Func1::Sinh,
        "cosh" => Func1::Cosh,
        "atan" => Func1::Atan,
        _ => return None,
    })
}

fn func2(name: &str) -> Option<Func2> {
    Some(match name {
        "atan2" => Func2::Atan2,
        "min" => Func2::Min,
        "max" => Func2::Max,
        "pow" => Func2::Pow,
        _ => return None,
    })
}

/// Constant folding; keeps compiled programs short for coefficient literals.
fn fold(node: Node) -> Node {
    match node {
        Node::Neg(a) => match fold(*a) {
            Node::Num(v) => Node::Num(-v),
            a => Node::Neg(Box::new(a)),
        },
        Node::Bin(op, a, b) => {
            let (a, b) = (fold(*a), fold(*b));
            if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
                let v = match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x / y,
                    _ => x.powf(*y),
                };
                return Node::Num(v);
            }
            Node::Bin(op, Box::new(a), Box::new(b))
        }
        Node::Call1(f, a) => Node::Call1(f, Box::new(fold(*a))),
        Node::Call2(f, a, b) => Node::Call2(f, Box::new(fold(*a)), Box::new(fold(*b))),
        other => other,
    }
}

fn emit(node: &Node, ops: &mut Vec<Op>) {
    match node {
        Node::Num(v) => ops.push(Op::Const(*v)),
        Node::Var(i) => ops.push(Op::Var(*i)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Bin('^', a, b) => {
            emit(a, ops);
            match **b {
                Node::Num(n) if n.fract() == 0.0 && n.abs() <= 64.0 => ops.push(Op::PowI(n as i32)),
                _ => {
                    emit(b, ops);
                    ops.push(Op::Pow);
                }
            }
        }
        Node::Bin(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match op {
                '+' => Op::Add,
                '-' => Op::Sub,
                '*' => Op::Mul,
                _ => Op::Div,
            });
        }
        Node::Call1(f, a) => {
            emit(a, ops);
            ops.push(Op::F1(*f));
        }
        Node::Call2(f, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::F2(*f));
        }
    }
}

fn stack_depth(ops: &[Op]) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for op in ops {
        match op {
            Op::Const(_) | Op::Var(_) => depth += 1,
            Op::Neg | Op::PowI(_) | Op::F1(_) => {}
            _ => depth -= 1,
        }
        max = max.max(depth);
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("(1 - 2) - 3", &[]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        let x = [0.3, -1.2, 2.0];
        assert!((ev("x0^2 + sin(x1) * z", &x) - (0.09 + (-1.2f64).sin() * 2.0)).abs() < 1e-15);
        assert!((ev("atan2(y, x)", &x) - (-1.2f64).atan2(0.3)).abs() < 1e-15);
        assert_eq!(ev("max(x0, x2)", &x), 2.0);
        assert!((ev("1.5e-1 * pi", &x) - 0.15 * std::f64::consts::PI).abs() < 1e-15);
        assert!((ev("x0^0.5", &x) - 0.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn folding_makes_constants() {
        let e = Expr::parse("2 * (3 + 1)").unwrap();
        assert!(e.is_constant());
        assert_eq!(e.ops.len(), 1);
        assert_eq!(Expr::parse("x3 + 1").unwrap().max_variable(), Some(3));
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("q").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }

    #[test]
    fn serde_accepts_numbers_and_strings() {
        let v: Vec<Expr> = serde_json::from_str(r#"["x0*2", 0.5, 0]"#).unwrap();
        assert_eq!(v[0].eval(&[1.5]), 3.0);
        assert_eq!(v[1].eval(&[]), 0.5);
        assert_eq!(v[2].eval(&[]), 0.0);
    }
}
