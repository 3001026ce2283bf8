use super::ast::{BinOp, Expr, Func};
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};

/// Names an expression may legally reference: chart variables up to `dim`
/// plus declared parameters.
#[derive(Debug, Clone, Default)]
pub struct Names {
    pub dim: usize,
    pub params: Vec<String>,
}

impl Names {
    pub fn new(dim: usize, params: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { dim, params: params.into_iter().map(Into::into).collect() }
    }

    pub fn is_chart_variable(&self, name: &str) -> bool {
        chart_index(name).is_some_and(|(_, k)| k >= 1 && k <= self.dim) || name == "t"
    }
}

/// Splits `q3` into `('q', 3)`; `None` for anything else.
pub fn chart_index(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let head = chars.next()?;
    if head != 'q' && head != 'v' {
        return None;
    }
    let rest = chars.as_str();
    if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok().map(|k| (head, k))
}

const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

const EXPECT_OPERAND: &str = "number, identifier, '(' or '-'";

/// Parses with no declared names; every identifier becomes a variable.
pub fn parse(src: &str) -> Result<Expr> {
    Parser::new(src, None)?.parse_all()
}

/// Parses and resolves identifiers against `names`; unknown ones are errors.
pub fn parse_with_names(src: &str, names: &Names) -> Result<Expr> {
    Parser::new(src, Some(names))?.parse_all()
}

struct Parser<'n> {
    toks: Vec<Token>,
    pos: usize,
    names: Option<&'n Names>,
}

impl<'n> Parser<'n> {
    fn new(src: &str, names: Option<&'n Names>) -> Result<Self> {
        Ok(Self { toks: tokenize(src)?, pos: 0, names })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, expected: &str) -> Error {
        Error::Syntax { offset: self.peek().offset, expected: expected.into() }
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr(0)?;
        match self.peek().tok {
            Tok::End => Ok(e),
            _ => Err(self.syntax("operator or end of input")),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                Tok::Op('^') => BinOp::Pow,
                _ => break,
            };
            let (lbp, rbp) = match op {
                BinOp::Add | BinOp::Sub => (BP_ADD, BP_ADD + 1),
                BinOp::Mul | BinOp::Div => (BP_MUL, BP_MUL + 1),
                BinOp::Pow => (BP_POW, BP_POW - 1),
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Op('-') => Ok(Expr::Neg(Box::new(self.expr(BP_NEG)?))),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if matches!(self.peek().tok, Tok::LParen) {
                    self.call(name, tok.offset)
                } else {
                    self.identifier(name, tok.offset)
                }
            }
            _ => Err(Error::Syntax { offset: tok.offset, expected: EXPECT_OPERAND.into() }),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr> {
        let func = Func::from_name(&name).ok_or(Error::UnknownFunction { name, offset })?;
        self.bump();
        let mut args = vec![self.expr(0)?];
        while matches!(self.peek().tok, Tok::Comma) {
            self.bump();
            args.push(self.expr(0)?);
        }
        if args.len() != func.arity() {
            let expected = if args.len() < func.arity() { "','" } else { "')'" };
            return Err(self.syntax(&format!("{expected} ({} takes {} argument(s))", func.name(), func.arity())));
        }
        self.expect_rparen()?;
        Ok(Expr::Call(func, args))
    }

    fn identifier(&self, name: String, offset: usize) -> Result<Expr> {
        let Some(names) = self.names else {
            return Ok(Expr::Var(name));
        };
        if names.is_chart_variable(&name) {
            Ok(Expr::Var(name))
        } else if names.params.iter().any(|p| *p == name) {
            Ok(Expr::Param(name))
        } else {
            Err(Error::UnknownIdentifier { name, offset })
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek().tok {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            _ => Err(self.syntax("')'")),
        }
    }
}
