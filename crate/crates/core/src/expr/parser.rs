//! Recursive-descent parser for the closed-form expression grammar.

use std::sync::Arc;

use super::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
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

struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                toks.push(Token { tok, offset: i });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent part, e.g. 1.5e-3.
                if i < bytes.len()
                    && matches!(bytes[i] as char, 'e' | 'E')
                    && i + 1 < bytes.len()
                    && matches!(bytes[i + 1] as char, '0'..='9' | '+' | '-')
                {
                    i += 2;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                let lit = &text[start..i];
                let value = lit.parse::<f64>().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number literal `{lit}`"),
                })?;
                toks.push(Token {
                    tok: Tok::Number(value),
                    offset: start,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

pub fn parse(text: &str, num_vars: usize) -> Result<Expr, ExprError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        num_vars,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(ExprError::Syntax {
            offset: p.toks[p.pos].offset,
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
    num_vars: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Arc::new(lhs), Arc::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            Ok(Expr::Neg(Arc::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let mut base = self.atom()?;
        while self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let k = self.integer_exponent()?;
            base = Expr::Pow(Arc::new(base), k);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ExprError> {
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Number(v)) if v.fract() == 0.0 && v.abs() <= f64::from(i32::MAX) => {
                let k = v as i32;
                Ok(if neg { -k } else { k })
            }
            _ => Err(ExprError::Syntax {
                offset,
                message: "exponent must be an integer literal".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Number(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(name, offset),
            _ => Err(ExprError::Syntax {
                offset,
                message: "expected a number, variable, function or `(`".into(),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(func) = unary_func(&name) {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.expr()?;
            if self.peek() == Some(&Tok::Comma) {
                // Count extra arguments for the arity report.
                let mut got = 1;
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    self.expr()?;
                    got += 1;
                }
                self.expect(Tok::RParen, "`)`")?;
                return Err(ExprError::ArityMismatch {
                    name,
                    expected: 1,
                    got,
                });
            }
            self.expect(Tok::RParen, "`)`")?;
            return Ok(func(Arc::new(arg)));
        }
        if name == "pow" {
            self.expect(Tok::LParen, "`(` after `pow`")?;
            let base = self.expr()?;
            if self.peek() != Some(&Tok::Comma) {
                self.expect(Tok::RParen, "`,` or `)`")?;
                return Err(ExprError::ArityMismatch {
                    name,
                    expected: 2,
                    got: 1,
                });
            }
            self.pos += 1;
            let k = self.integer_exponent()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Pow(Arc::new(base), k));
        }
        if let Some(index) = variable_index(&name) {
            if index < self.num_vars {
                return Ok(Expr::Var(index));
            }
            return Err(ExprError::VarOutOfRange {
                index,
                num_vars: self.num_vars,
            });
        }
        Err(ExprError::UnknownIdentifier { name, offset })
    }
}

type UnaryCtor = fn(Arc<Expr>) -> Expr;

fn unary_func(name: &str) -> Option<UnaryCtor> {
    match name {
        "sin" => Some(Expr::Sin),
        "cos" => Some(Expr::Cos),
        "exp" => Some(Expr::Exp),
        "log" => Some(Expr::Log),
        "sqrt" => Some(Expr::Sqrt),
        _ => None,
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x" => return Some(0),
        "y" => return Some(1),
        "z" => return Some(2),
        "w" => return Some(3),
        _ => {}
    }
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = rest.parse().ok()?;
    if k >= 1 {
        Some(k - 1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_aliases() {
        assert_eq!(variable_index("x"), Some(0));
        assert_eq!(variable_index("w"), Some(3));
        assert_eq!(variable_index("x12"), Some(11));
        assert_eq!(variable_index("x0"), None);
        assert_eq!(variable_index("xy"), None);
    }

    #[test]
    fn arity_mismatch_reported() {
        let err = parse("sin(x, y)", 2).unwrap_err();
        match err {
            ExprError::ArityMismatch { name, got, .. } => {
                assert_eq!(name, "sin");
                assert_eq!(got, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pow_function_form() {
        let e = parse("pow(x, 3)", 1).unwrap();
        assert!(matches!(e, Expr::Pow(_, 3)));
    }

    #[test]
    fn scientific_literals() {
        let e = parse("1.5e-3 + 2E2", 1).unwrap();
        match e {
            Expr::Add(a, b) => {
                assert_eq!(*a, Expr::Const(1.5e-3));
                assert_eq!(*b, Expr::Const(200.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
