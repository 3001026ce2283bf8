use std::collections::HashMap;

use super::ast::{BinOp, Expr, Func};
use crate::error::{Error, Result};

pub type Bindings = HashMap<String, f64>;

pub fn evaluate(expr: &Expr, env: &Bindings) -> Result<f64> {
    eval_with(expr, &|name| env.get(name).copied())
}

fn eval_with(expr: &Expr, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
    match expr {
        Expr::Num(x) => Ok(*x),
        Expr::Var(n) | Expr::Param(n) => lookup(n).ok_or_else(|| Error::UnboundVariable(n.clone())),
        Expr::Neg(e) => Ok(-eval_with(e, lookup)?),
        Expr::Binary(op, a, b) => binary(*op, eval_with(a, lookup)?, eval_with(b, lookup)?),
        Expr::Call(f, args) => {
            let a = eval_with(&args[0], lookup)?;
            let b = match args.get(1) {
                Some(e) => eval_with(e, lookup)?,
                None => 0.0,
            };
            call(*f, a, b)
        }
    }
}

fn binary(op: BinOp, a: f64, b: f64) -> Result<f64> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(Error::Domain(format!("division of {a} by zero")))
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => power(a, b),
    }
}

fn power(a: f64, b: f64) -> Result<f64> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(Error::Domain(format!("{a} raised to non-integer power {b}")));
    }
    if a == 0.0 && b < 0.0 {
        return Err(Error::Domain(format!("zero raised to negative power {b}")));
    }
    Ok(a.powf(b))
}

fn call(f: Func, a: f64, b: f64) -> Result<f64> {
    Ok(match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => a.tan(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(Error::Domain(format!("log of {a}")));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(Error::Domain(format!("sqrt of {a}")));
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
        Func::Pow => return power(a, b),
    })
}

/// An expression with names resolved to slots of a flat input slice.
/// Evaluation skips all name lookups, which matters inside finite-difference
/// loops.
#[derive(Debug, Clone)]
pub struct Compiled {
    node: Node,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>, Option<Box<Node>>),
}

impl Compiled {
    /// `resolve` maps each referenced name to its slot.
    pub fn new(expr: &Expr, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Self> {
        Ok(Self { node: lower(expr, resolve)? })
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64> {
        run(&self.node, slots)
    }
}

fn lower(expr: &Expr, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Node> {
    Ok(match expr {
        Expr::Num(x) => Node::Num(*x),
        Expr::Var(n) | Expr::Param(n) => Node::Slot(resolve(n).ok_or_else(|| Error::UnboundVariable(n.clone()))?),
        Expr::Neg(e) => Node::Neg(Box::new(lower(e, resolve)?)),
        Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(lower(a, resolve)?), Box::new(lower(b, resolve)?)),
        Expr::Call(f, args) => Node::Call(
            *f,
            Box::new(lower(&args[0], resolve)?),
            args.get(1).map(|b| lower(b, resolve).map(Box::new)).transpose()?,
        ),
    })
}

fn run(node: &Node, slots: &[f64]) -> Result<f64> {
    match node {
        Node::Num(x) => Ok(*x),
        Node::Slot(i) => Ok(slots[*i]),
        Node::Neg(e) => Ok(-run(e, slots)?),
        Node::Binary(op, a, b) => binary(*op, run(a, slots)?, run(b, slots)?),
        Node::Call(f, a, b) => {
            let a = run(a, slots)?;
            let b = match b {
                Some(b) => run(b, slots)?,
                None => 0.0,
            };
            call(*f, a, b)
        }
    }
}
