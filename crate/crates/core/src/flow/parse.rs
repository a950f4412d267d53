//! Recursive-descent parser for coefficient expressions.

use super::ast::{BinOp, Expr, Func, Var};

/// Maximum nesting of `d_s`.
pub const MAX_DERIVATIVE_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, ds_depth: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected '{}'", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ds_depth: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::binary(BinOp::Mul, lhs, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // factor := ('-'|'+') factor | base ('^' signed-number)?
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            // a bare literal after '-' is a negative number unless an exponent follows
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let mark = self.pos;
                let x = self.number()?;
                if self.peek() != Some(b'^') && x != 0.0 {
                    return Ok(Expr::Num(-x));
                }
                self.pos = mark;
            }
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        if self.eat(b'+') {
            return self.factor();
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let negative = self.eat(b'-');
            if !negative {
                self.eat(b'+');
            }
            self.skip_ws();
            let e = self.number()?;
            return Ok(Expr::Pow(Box::new(base), if negative { -e } else { e }));
        }
        Ok(base)
    }

    // base := number | ident | 'd_s' '(' expr ')' | func '(' expr ')' | '(' expr ')'
    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("expected an operand, found end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Num(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident();
                if name == "d_s" {
                    if self.ds_depth == MAX_DERIVATIVE_DEPTH {
                        self.pos = start;
                        return Err(self.error(format!("d_s nested deeper than {MAX_DERIVATIVE_DEPTH}")));
                    }
                    self.expect(b'(')?;
                    self.ds_depth += 1;
                    let inner = self.expr()?;
                    self.ds_depth -= 1;
                    self.expect(b')')?;
                    return Ok(Expr::Ds(Box::new(inner)));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect(b'(')?;
                    let inner = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::Call(func, Box::new(inner)));
                }
                Ok(match name.as_str() {
                    "k" => Expr::Var(Var::K),
                    "tau" => Expr::Var(Var::Tau),
                    "s" => Expr::Var(Var::S),
                    "t" => Expr::Var(Var::T),
                    "pi" => Expr::Num(std::f64::consts::PI),
                    _ => Expr::Const(name),
                })
            }
            Some(c) => Err(self.error(format!("unexpected '{}'", c as char))),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.error("expected a number"));
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map_err(|_| ParseError { offset: start, message: format!("bad number '{text}'") })
    }
}
