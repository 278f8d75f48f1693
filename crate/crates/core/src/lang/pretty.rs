//! Source rendering. Output re-parses to the same program.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::{DistSpec, Expr, Program, RvRef, Stmt, StmtKind};
use crate::gaussian::ArithOp;

fn precedence(op: ArithOp) -> u8 {
    match op {
        ArithOp::Add | ArithOp::Sub => 1,
        ArithOp::Mul | ArithOp::Div => 2,
    }
}

fn expr_precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(_, op, _) => precedence(*op),
        _ => 3,
    }
}

fn write_operand(f: &mut Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Binary(l, op, r) => {
                let p = precedence(*op);
                write_operand(f, l, expr_precedence(l) < p)?;
                write!(f, " {op} ")?;
                write_operand(f, r, expr_precedence(r) <= p)
            }
        }
    }
}

impl Display for RvRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.index {
            None => f.write_str(&self.base),
            Some(i) => write!(f, "{}[{}]", self.base, i),
        }
    }
}

impl Display for DistSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Independent { mean, variance } => write!(f, "Normal({mean}, {variance})"),
            DistSpec::LinearDep {
                coeff,
                dep,
                offset,
                variance,
            } => {
                f.write_str("Normal(")?;
                write_operand(f, coeff, expr_precedence(coeff) < 2)?;
                write!(f, " * {dep} + ")?;
                write_operand(f, offset, expr_precedence(offset) <= 1)?;
                write!(f, ", {variance})")
            }
        }
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) -> fmt::Result {
    let pad = "    ".repeat(depth);
    match &stmt.kind {
        StmtKind::ProbAssign { target, dist } => writeln!(out, "{pad}{target} = {dist}"),
        StmtKind::OpAssign {
            target,
            src,
            op,
            operand,
        } => {
            let parens = expr_precedence(operand) <= precedence(*op);
            if parens {
                writeln!(out, "{pad}{target} = {src} {op} ({operand})")
            } else {
                writeln!(out, "{pad}{target} = {src} {op} {operand}")
            }
        }
        StmtKind::SumAssign { target, lhs, rhs } => writeln!(out, "{pad}{target} = {lhs} + {rhs}"),
        StmtKind::Condition { target, value } => writeln!(out, "{pad}condition({target}, {value})"),
        StmtKind::DetAssign { name, value } => writeln!(out, "{pad}{name} = {value}"),
        StmtKind::For { var, count, body } => {
            writeln!(out, "{pad}for {var} in range({count}):")?;
            if body.is_empty() {
                writeln!(out, "{pad}    pass")?;
            }
            for s in body {
                write_stmt(out, s, depth + 1)?;
            }
            Ok(())
        }
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_stmt(&mut s, self, 0)?;
        f.write_str(s.trim_end())
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for stmt in &self.body {
            write_stmt(&mut s, stmt, 0)?;
        }
        s.push_str("return");
        for (i, r) in self.returns.iter().enumerate() {
            s.push_str(if i == 0 { " " } else { ", " });
            write!(s, "{r}")?;
        }
        s.push('\n');
        f.write_str(&s)
    }
}
