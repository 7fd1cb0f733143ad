//! Arithmetic expressions in `x`, `y`, `t` for analytic field data.
//!
//! Grammar: numbers, `pi`, `x`, `y`, `t`, `+ - * / ^`, parentheses and the
//! functions `sin cos exp sqrt abs`. `^` binds tighter than unary minus and
//! associates to the right.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{message} at column {column} of {input:?}")]
pub struct ExprError {
    pub message: String,
    pub column: usize,
    pub input: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    T,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: text, chars: text.char_indices().collect(), pos: 0 };
        let root = p.sum()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self { root })
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        eval(&self.root, x, y, t)
    }

    pub fn uses_t(&self) -> bool {
        uses_t(&self.root)
    }
}

fn eval(node: &Node, x: f64, y: f64, t: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::T => t,
        Node::Neg(a) => -eval(a, x, y, t),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y, t), eval(b, x, y, t));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x, y, t);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
    }
}

fn uses_t(node: &Node) -> bool {
    match node {
        Node::T => true,
        Node::Num(_) | Node::X | Node::Y => false,
        Node::Neg(a) | Node::Call(_, a) => uses_t(a),
        Node::Bin(_, a, b) => uses_t(a) || uses_t(b),
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError { message: message.to_string(), column: self.pos + 1, input: self.src.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
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

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn take_while(&mut self, pred: impl Fn(char, Option<char>) -> bool) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() {
            let prev = if self.pos > start { Some(self.chars[self.pos - 1].1) } else { None };
            if !pred(self.chars[self.pos].1, prev) {
                break;
            }
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().map(|c| c.1).collect()
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let text = self.take_while(|c, prev| {
            c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || ((c == '-' || c == '+') && matches!(prev, Some('e' | 'E')))
        });
        text.parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error(&format!("bad number {text:?}"))
        })
    }

    fn word(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let name = self.take_while(|c, _| c.is_ascii_alphanumeric() || c == '_');
        let func = match name.as_str() {
            "x" => return Ok(Node::X),
            "y" => return Ok(Node::Y),
            "t" => return Ok(Node::T),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => {
                self.pos = start;
                return Err(self.error(&format!("unknown name {name:?}")));
            }
        };
        if self.peek() != Some('(') {
            return Err(self.error(&format!("expected '(' after {name}")));
        }
        self.pos += 1;
        let arg = self.sum()?;
        if self.peek() != Some(')') {
            return Err(self.error("expected ')'"));
        }
        self.pos += 1;
        Ok(Node::Call(func, Box::new(arg)))
    }
}
