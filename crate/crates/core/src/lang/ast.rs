use std::fmt;

use thiserror::Error;

use crate::gaussian::ArithOp;

/// 1-based source position of a statement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("undefined deterministic variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
}

/// Deterministic expression: literals, deterministic variables and the four
/// arithmetic operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Binary(Box<Expr>, ArithOp, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(lhs: Expr, op: ArithOp, rhs: Expr) -> Self {
        Expr::Binary(Box::new(lhs), op, Box::new(rhs))
    }

    /// Arithmetic negation, folding literals.
    pub fn negated(self) -> Self {
        match self {
            Expr::Num(v) => Expr::Num(-v),
            other => Expr::binary(Expr::Num(0.0), ArithOp::Sub, other),
        }
    }

    pub fn eval_with<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Binary(lhs, op, rhs) => {
                let l = lhs.eval_with(lookup)?;
                let r = rhs.eval_with(lookup)?;
                op.apply(l, r).ok_or(EvalError::DivisionByZero)
            }
        }
    }

    /// Value of a variable-free expression.
    pub fn fold(&self) -> Option<f64> {
        self.eval_with(&|_| None).ok()
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Binary(l, _, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Binary(l, _, r) => {
                l.variables(out);
                r.variables(out);
            }
        }
    }

    /// True if the expression contains a division by the literal zero.
    pub fn divides_by_literal_zero(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Binary(l, op, r) => {
                (*op == ArithOp::Div && matches!(**r, Expr::Num(v) if v == 0.0))
                    || l.divides_by_literal_zero()
                    || r.divides_by_literal_zero()
            }
        }
    }
}

/// Reference to a random variable, `name` or `name[index]`.
///
/// Constant indices are folded away by the parser (`x[2]` becomes `x_2`), so
/// an index is only present when it depends on a deterministic variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RvRef {
    pub base: String,
    pub index: Option<Expr>,
}

impl RvRef {
    pub fn plain(name: impl Into<String>) -> Self {
        Self {
            base: name.into(),
            index: None,
        }
    }

    pub fn indexed(base: impl Into<String>, index: Expr) -> Self {
        Self {
            base: base.into(),
            index: Some(index),
        }
    }
}

/// Name of element `index` of a random-variable array.
pub fn element_name(base: &str, index: u64) -> String {
    format!("{base}_{index}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    /// `Normal(mean, variance)`
    Independent { mean: Expr, variance: Expr },
    /// `Normal(coeff * dep + offset, variance)`
    LinearDep {
        coeff: Expr,
        dep: RvRef,
        offset: Expr,
        variance: Expr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `X = d`
    ProbAssign { target: RvRef, dist: DistSpec },
    /// `X = Y op e`
    OpAssign {
        target: RvRef,
        src: RvRef,
        op: ArithOp,
        operand: Expr,
    },
    /// `X = Y + Z`
    SumAssign { target: RvRef, lhs: RvRef, rhs: RvRef },
    /// `condition(X, e)`
    Condition { target: RvRef, value: Expr },
    /// `x = e`
    DetAssign { name: String, value: Expr },
    /// `for var in range(count): body`
    For {
        var: String,
        count: Expr,
        body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Self { kind, span }
    }

    fn without_spans(&self) -> Self {
        let kind = match &self.kind {
            StmtKind::For { var, count, body } => StmtKind::For {
                var: var.clone(),
                count: count.clone(),
                body: body.iter().map(Stmt::without_spans).collect(),
            },
            other => other.clone(),
        };
        Stmt::new(kind, Span::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub body: Vec<Stmt>,
    pub returns: Vec<RvRef>,
    pub return_span: Span,
}

impl Program {
    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> Self {
        Self {
            body: self.body.iter().map(Stmt::without_spans).collect(),
            returns: self.returns.clone(),
            return_span: Span::default(),
        }
    }

    /// Number of atomic statements executed once loops are unrolled, or
    /// `None` if a loop bound is not a non-negative integer constant.
    pub fn unrolled_statement_count(&self) -> Option<u64> {
        count_atomic(&self.body, &|_| true)
    }

    /// Number of random variables the program introduces.
    pub fn random_assignment_count(&self) -> Option<u64> {
        count_atomic(&self.body, &|k| {
            matches!(
                k,
                StmtKind::ProbAssign { .. } | StmtKind::OpAssign { .. } | StmtKind::SumAssign { .. }
            )
        })
    }

    /// The same program with every `condition` statement removed, i.e. the
    /// prior model.
    pub fn without_conditions(&self) -> Self {
        fn strip(stmts: &[Stmt]) -> Vec<Stmt> {
            stmts
                .iter()
                .filter(|s| !matches!(s.kind, StmtKind::Condition { .. }))
                .map(|s| match &s.kind {
                    StmtKind::For { var, count, body } => Stmt::new(
                        StmtKind::For {
                            var: var.clone(),
                            count: count.clone(),
                            body: strip(body),
                        },
                        s.span,
                    ),
                    _ => s.clone(),
                })
                .collect()
        }
        Self {
            body: strip(&self.body),
            returns: self.returns.clone(),
            return_span: self.return_span,
        }
    }

    /// Visits every statement, loop bodies included, in source order.
    pub fn visit(&self, f: &mut impl FnMut(&Stmt)) {
        fn go(stmts: &[Stmt], f: &mut impl FnMut(&Stmt)) {
            for s in stmts {
                f(s);
                if let StmtKind::For { body, .. } = &s.kind {
                    go(body, f);
                }
            }
        }
        go(&self.body, f);
    }
}

/// Loop bound as an iteration count, if it is a non-negative integer.
pub fn loop_count(value: f64) -> Option<u64> {
    (value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64).then_some(value as u64)
}

fn count_atomic(stmts: &[Stmt], counted: &impl Fn(&StmtKind) -> bool) -> Option<u64> {
    let mut total = 0u64;
    for s in stmts {
        match &s.kind {
            StmtKind::For { count, body, .. } => {
                let k = loop_count(count.fold()?)?;
                total = total.checked_add(k.checked_mul(count_atomic(body, counted)?)?)?;
            }
            kind if counted(kind) => total += 1,
            _ => {}
        }
    }
    Some(total)
}
