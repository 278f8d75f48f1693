//! Recursive-descent parser.
//!
//! Whether an identifier denotes a random or a deterministic variable is
//! decided by how it was assigned earlier in the text: targets of `Normal`,
//! list literals, `Y op e` and `Y + Z` are random, targets of plain
//! expressions and loop variables are deterministic. Bracketed references
//! (`x[i]`) are always random.

use std::collections::HashSet;

use super::ast::{element_name, DistSpec, Expr, Program, RvRef, Span, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::gaussian::ArithOp;

type PResult<T> = Result<T, ParseError>;

pub fn parse(src: &str) -> PResult<Program> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        random_names: HashSet::new(),
        random_bases: HashSet::new(),
        det_names: HashSet::new(),
    };
    p.program()
}

/// Expression tree before random/deterministic classification.
#[derive(Debug, Clone)]
enum Raw {
    Num(f64),
    Name { rv: RvRef, bracketed: bool, span: Span },
    Bin(Box<Raw>, ArithOp, Box<Raw>),
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Top,
    Def,
    Loop,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    random_names: HashSet<String>,
    random_bases: HashSet<String>,
    det_names: HashSet<String>,
}

const KEYWORDS: &[&str] = &["for", "in", "return", "def", "pass"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(self.span(), msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                self.error(format!("`{s}` is a reserved word"))
            }
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn skip_newlines(&mut self) {
        while self.eat(&Tok::Newline) {}
    }

    fn program(&mut self) -> PResult<Program> {
        self.skip_newlines();
        if self.is_keyword("def") {
            self.bump();
            self.ident()?;
            self.expect(Tok::LParen)?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Colon)?;
            let (body, ret) = self.block_body(Block::Def)?;
            self.skip_newlines();
            if *self.peek() != Tok::Eof {
                return self.error("unexpected statement after function body");
            }
            let (returns, return_span) = ret.unwrap_or((Vec::new(), self.span()));
            return Ok(Program {
                body,
                returns,
                return_span,
            });
        }
        let (body, ret) = self.statements(Block::Top)?;
        let (returns, return_span) = ret.unwrap_or((Vec::new(), self.span()));
        Ok(Program {
            body,
            returns,
            return_span,
        })
    }

    /// Body after a `:`: either an indented block or simple statements on
    /// the same line.
    fn block_body(&mut self, kind: Block) -> PResult<(Vec<Stmt>, Option<(Vec<RvRef>, Span)>)> {
        if self.eat(&Tok::Newline) {
            self.skip_newlines();
            self.expect(Tok::Indent)?;
            let out = self.statements(kind)?;
            self.expect(Tok::Dedent)?;
            Ok(out)
        } else {
            let mut body = Vec::new();
            let mut ret = None;
            loop {
                self.simple_statement(kind, &mut body, &mut ret)?;
                if self.eat(&Tok::Semi) && !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                    continue;
                }
                break;
            }
            if !matches!(self.peek(), Tok::Eof | Tok::Dedent) {
                self.expect(Tok::Newline)?;
            }
            Ok((body, ret))
        }
    }

    fn statements(&mut self, kind: Block) -> PResult<(Vec<Stmt>, Option<(Vec<RvRef>, Span)>)> {
        let mut body = Vec::new();
        let mut ret: Option<(Vec<RvRef>, Span)> = None;
        loop {
            self.skip_newlines();
            match self.peek() {
                Tok::Eof | Tok::Dedent => break,
                _ => {}
            }
            if ret.is_some() {
                return self.error("statements after `return`");
            }
            if self.is_keyword("for") {
                let stmt = self.for_statement()?;
                body.push(stmt);
                continue;
            }
            if self.is_keyword("def") {
                return self.error("`def` is only allowed as the outermost statement");
            }
            loop {
                self.simple_statement(kind, &mut body, &mut ret)?;
                if self.eat(&Tok::Semi) && !matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) {
                    if ret.is_some() {
                        return self.error("statements after `return`");
                    }
                    continue;
                }
                break;
            }
            if !matches!(self.peek(), Tok::Eof | Tok::Dedent) {
                self.expect(Tok::Newline)?;
            }
        }
        Ok((body, ret))
    }

    fn for_statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        self.expect_keyword("for")?;
        let (var, _) = self.ident()?;
        self.expect_keyword("in")?;
        self.expect_keyword("range")?;
        let count_raw = self.expr()?;
        let count = self.to_det(count_raw)?;
        self.expect(Tok::Colon)?;
        self.det_names.insert(var.clone());
        let (body, ret) = self.block_body(Block::Loop)?;
        debug_assert!(ret.is_none());
        Ok(Stmt::new(StmtKind::For { var, count, body }, span))
    }

    fn simple_statement(
        &mut self,
        kind: Block,
        body: &mut Vec<Stmt>,
        ret: &mut Option<(Vec<RvRef>, Span)>,
    ) -> PResult<()> {
        let span = self.span();
        if self.is_keyword("return") {
            if kind == Block::Loop {
                return self.error("`return` is not allowed inside a loop");
            }
            self.bump();
            let mut names = Vec::new();
            if !matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent | Tok::Semi) {
                names.push(self.rv_ref()?);
                while self.eat(&Tok::Comma) {
                    names.push(self.rv_ref()?);
                }
            }
            *ret = Some((names, span));
            return Ok(());
        }
        if self.is_keyword("for") {
            return self.error("a `for` loop must start on its own line");
        }
        if self.is_keyword("pass") {
            self.bump();
            return Ok(());
        }
        if self.is_keyword("condition") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.expect(Tok::LParen)?;
            let target = match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    RvRef::plain(s)
                }
                _ => self.rv_ref()?,
            };
            self.expect(Tok::Comma)?;
            let raw = self.expr()?;
            let value = self.to_det(raw)?;
            self.expect(Tok::RParen)?;
            body.push(Stmt::new(StmtKind::Condition { target, value }, span));
            return Ok(());
        }

        let (name, _) = self.ident()?;
        let index = if self.eat(&Tok::LBracket) {
            let raw = self.expr()?;
            let e = self.to_det(raw)?;
            self.expect(Tok::RBracket)?;
            Some(e)
        } else {
            None
        };
        self.expect(Tok::Assign)?;

        if *self.peek() == Tok::LBracket {
            if index.is_some() {
                return self.error("a list literal must be assigned to a plain name");
            }
            self.bump();
            let mut i = 0u64;
            loop {
                if *self.peek() == Tok::RBracket {
                    break;
                }
                let elem_span = self.span();
                let dist = self.distribution()?;
                let elem = element_name(&name, i);
                self.random_names.insert(elem.clone());
                body.push(Stmt::new(
                    StmtKind::ProbAssign {
                        target: RvRef::plain(elem),
                        dist,
                    },
                    elem_span,
                ));
                i += 1;
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBracket)?;
            if i == 0 {
                return Err(ParseError::new(span, "empty list literal"));
            }
            self.random_bases.insert(name);
            return Ok(());
        }

        let bracketed = index.is_some();
        let target = self.resolve_index(name.clone(), index, span)?;

        if self.is_keyword("Normal") && *self.peek_at(1) == Tok::LParen {
            let dist = self.distribution()?;
            self.mark_random(&target, bracketed);
            body.push(Stmt::new(StmtKind::ProbAssign { target, dist }, span));
            return Ok(());
        }

        let raw = self.expr()?;
        let kind = self.classify_assignment(target.clone(), bracketed, raw, span)?;
        match &kind {
            StmtKind::DetAssign { name, .. } => {
                self.det_names.insert(name.clone());
            }
            _ => self.mark_random(&target, bracketed),
        }
        body.push(Stmt::new(kind, span));
        Ok(())
    }

    fn mark_random(&mut self, target: &RvRef, bracketed: bool) {
        if bracketed {
            self.random_bases.insert(target.base.clone());
        } else {
            self.random_names.insert(target.base.clone());
        }
    }

    fn classify_assignment(&self, target: RvRef, bracketed: bool, raw: Raw, span: Span) -> PResult<StmtKind> {
        let unsupported = || {
            Err(ParseError::new(
                span,
                "unsupported expression over random variables; allowed forms are `Y op e`, `e + Y`, `e * Y` and `Y + Z`",
            ))
        };
        if !self.has_random(&raw, false) {
            if bracketed || target.index.is_some() {
                return Err(ParseError::new(
                    span,
                    "an indexed assignment target must receive a random variable",
                ));
            }
            let value = self.to_det(raw)?;
            return Ok(StmtKind::DetAssign {
                name: target.base,
                value,
            });
        }
        match raw {
            Raw::Name { rv, .. } => Ok(StmtKind::OpAssign {
                target,
                src: rv,
                op: ArithOp::Add,
                operand: Expr::Num(0.0),
            }),
            Raw::Bin(lhs, op, rhs) => {
                let lhs_random = self.has_random(&lhs, false);
                let rhs_random = self.has_random(&rhs, false);
                match (*lhs, lhs_random, *rhs, rhs_random) {
                    (Raw::Name { rv: a, .. }, true, Raw::Name { rv: b, .. }, true) if op == ArithOp::Add => {
                        Ok(StmtKind::SumAssign {
                            target,
                            lhs: a,
                            rhs: b,
                        })
                    }
                    (Raw::Name { rv, .. }, true, e, false) => Ok(StmtKind::OpAssign {
                        target,
                        src: rv,
                        op,
                        operand: self.to_det(e)?,
                    }),
                    (e, false, Raw::Name { rv, .. }, true) if matches!(op, ArithOp::Add | ArithOp::Mul) => {
                        Ok(StmtKind::OpAssign {
                            target,
                            src: rv,
                            op,
                            operand: self.to_det(e)?,
                        })
                    }
                    _ => unsupported(),
                }
            }
            Raw::Num(_) => unreachable!("literals are never random"),
        }
    }

    /// `Normal(mean, variance)` in either of its two forms.
    fn distribution(&mut self) -> PResult<DistSpec> {
        let span = self.span();
        self.expect_keyword("Normal")?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.expr()?);
            while self.eat(&Tok::Comma) {
                args.push(self.expr()?);
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != 2 {
            return Err(ParseError::new(
                span,
                format!("Normal expects 2 arguments (mean, variance), found {}", args.len()),
            ));
        }
        let variance_raw = args.pop().unwrap();
        let mean_raw = args.pop().unwrap();
        let variance = self.to_det(variance_raw)?;
        self.linear_mean(mean_raw, variance, span)
    }

    fn linear_mean(&self, raw: Raw, variance: Expr, span: Span) -> PResult<DistSpec> {
        if !self.has_random(&raw, true) {
            return Ok(DistSpec::Independent {
                mean: self.to_det(raw)?,
                variance,
            });
        }
        let mut terms = Vec::new();
        flatten_sum(raw, false, &mut terms);
        let random: Vec<usize> = (0..terms.len())
            .filter(|&i| self.has_random(&terms[i].1, true))
            .collect();
        if random.len() != 1 {
            return Err(ParseError::new(
                span,
                "a distribution mean may depend on at most one random variable",
            ));
        }
        let (negative, term) = terms.remove(random[0]);
        let bad_form = || {
            ParseError::new(
                span,
                "a dependent mean must have the form `e * X + e`",
            )
        };
        let (coeff, dep) = match term {
            Raw::Name { rv, .. } => (Expr::Num(1.0), rv),
            Raw::Bin(l, op, r) => match (*l, op, *r) {
                (Raw::Name { rv, .. }, ArithOp::Mul, c) if !self.has_random(&c, true) => (self.to_det(c)?, rv),
                (c, ArithOp::Mul, Raw::Name { rv, .. }) if !self.has_random(&c, true) => (self.to_det(c)?, rv),
                (Raw::Name { rv, .. }, ArithOp::Div, c) if !self.has_random(&c, true) => {
                    (Expr::binary(Expr::Num(1.0), ArithOp::Div, self.to_det(c)?), rv)
                }
                (Raw::Num(z), ArithOp::Sub, Raw::Name { rv, .. }) if z == 0.0 => (Expr::Num(-1.0), rv),
                _ => return Err(bad_form()),
            },
            Raw::Num(_) => return Err(bad_form()),
        };
        let coeff = if negative { coeff.negated() } else { coeff };
        let mut offset: Option<Expr> = None;
        for (neg, t) in terms {
            let e = self.to_det(t)?;
            offset = Some(match offset {
                None if neg => e.negated(),
                None => e,
                Some(acc) => Expr::binary(acc, if neg { ArithOp::Sub } else { ArithOp::Add }, e),
            });
        }
        Ok(DistSpec::LinearDep {
            coeff,
            dep,
            offset: offset.unwrap_or(Expr::Num(0.0)),
            variance,
        })
    }

    fn is_random_name(&self, rv: &RvRef, bracketed: bool, default: bool) -> bool {
        if bracketed || rv.index.is_some() {
            return true;
        }
        let name = rv.base.as_str();
        if self.random_names.contains(name) {
            return true;
        }
        if self.det_names.contains(name) {
            return false;
        }
        if let Some((base, digits)) = name.rsplit_once('_') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && self.random_bases.contains(base) {
                return true;
            }
        }
        default
    }

    fn has_random(&self, raw: &Raw, default: bool) -> bool {
        match raw {
            Raw::Num(_) => false,
            Raw::Name { rv, bracketed, .. } => self.is_random_name(rv, *bracketed, default),
            Raw::Bin(l, _, r) => self.has_random(l, default) || self.has_random(r, default),
        }
    }

    fn to_det(&self, raw: Raw) -> PResult<Expr> {
        match raw {
            Raw::Num(v) => Ok(Expr::Num(v)),
            Raw::Name { rv, bracketed, span } => {
                if bracketed {
                    return Err(ParseError::new(
                        span,
                        format!("indexed reference `{}[...]` cannot appear in a deterministic expression", rv.base),
                    ));
                }
                if self.is_random_name(&rv, false, false) {
                    return Err(ParseError::new(
                        span,
                        format!("random variable `{}` cannot appear in a deterministic expression", rv.base),
                    ));
                }
                Ok(Expr::Var(rv.base))
            }
            Raw::Bin(l, op, r) => Ok(Expr::binary(self.to_det(*l)?, op, self.to_det(*r)?)),
        }
    }

    /// Folds a constant index into the element name.
    fn resolve_index(&self, base: String, index: Option<Expr>, span: Span) -> PResult<RvRef> {
        match index {
            None => Ok(RvRef::plain(base)),
            Some(e) if e.is_constant() => {
                let v = e
                    .fold()
                    .ok_or_else(|| ParseError::new(span, "index expression divides by zero"))?;
                match super::ast::loop_count(v) {
                    Some(i) => Ok(RvRef::plain(element_name(&base, i))),
                    None => Err(ParseError::new(
                        span,
                        format!("index must be a non-negative integer, got {v}"),
                    )),
                }
            }
            Some(e) => Ok(RvRef::indexed(base, e)),
        }
    }

    fn rv_ref(&mut self) -> PResult<RvRef> {
        let (name, span) = self.ident()?;
        let index = if self.eat(&Tok::LBracket) {
            let raw = self.expr()?;
            let e = self.to_det(raw)?;
            self.expect(Tok::RBracket)?;
            Some(e)
        } else {
            None
        };
        self.resolve_index(name, index, span)
    }

    fn expr(&mut self) -> PResult<Raw> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Raw::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Raw> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Raw::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Raw> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Raw::Num(v) => Raw::Num(-v),
                other => Raw::Bin(Box::new(Raw::Num(0.0)), ArithOp::Sub, Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Raw> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Raw::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "Normal" && *self.peek_at(1) == Tok::LParen => {
                self.error("`Normal(...)` may only appear as the right-hand side of an assignment")
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident()?;
                if self.eat(&Tok::LBracket) {
                    let raw = self.expr()?;
                    let e = self.to_det(raw)?;
                    self.expect(Tok::RBracket)?;
                    let rv = self.resolve_index(name, Some(e), span)?;
                    Ok(Raw::Name {
                        rv,
                        bracketed: true,
                        span,
                    })
                } else {
                    Ok(Raw::Name {
                        rv: RvRef::plain(name),
                        bracketed: false,
                        span,
                    })
                }
            }
            _ => self.unexpected("an expression"),
        }
    }
}

/// Splits the left spine of `+`/`-` into signed terms; right operands stay
/// whole.
fn flatten_sum(raw: Raw, negative: bool, out: &mut Vec<(bool, Raw)>) {
    match raw {
        Raw::Bin(l, op @ (ArithOp::Add | ArithOp::Sub), r) => {
            flatten_sum(*l, negative, out);
            out.push((negative ^ (op == ArithOp::Sub), *r));
        }
        other => out.push((negative, other)),
    }
}
