//! Deterministic unrolling of a program into primitive random actions.
//!
//! The walker evaluates every deterministic expression, unrolls loops,
//! resolves indexed names (`x[i]` becomes `x_3`) and hands the resulting
//! [`Action`]s to a [`Machine`]. The interpreter, the validator and the
//! test oracles are all machines; they differ only in what an action does.

use thiserror::Error;

use super::ast::{element_name, loop_count, DistSpec, EvalError, Expr, RvRef, Span, Stmt, StmtKind};
use crate::gaussian::ArithOp;

/// A fully evaluated random statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Independent {
        target: String,
        mean: f64,
        variance: f64,
    },
    Linear {
        target: String,
        coeff: f64,
        dep: String,
        offset: f64,
        variance: f64,
    },
    ShiftScale {
        target: String,
        src: String,
        op: ArithOp,
        operand: f64,
    },
    Sum {
        target: String,
        lhs: String,
        rhs: String,
    },
    Condition {
        target: String,
        value: f64,
    },
}

impl Action {
    pub fn target(&self) -> &str {
        match self {
            Action::Independent { target, .. }
            | Action::Linear { target, .. }
            | Action::ShiftScale { target, .. }
            | Action::Sum { target, .. }
            | Action::Condition { target, .. } => target,
        }
    }

    /// Random variables read by the action (the condition target included).
    pub fn operands(&self) -> Vec<&str> {
        match self {
            Action::Independent { .. } => vec![],
            Action::Linear { dep, .. } => vec![dep],
            Action::ShiftScale { src, .. } => vec![src],
            Action::Sum { lhs, rhs, .. } => vec![lhs, rhs],
            Action::Condition { target, .. } => vec![target],
        }
    }
}

/// Failure while evaluating the deterministic part of a statement.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("index of `{base}` must be a non-negative integer, got {value}")]
    BadIndex { base: String, value: f64 },
    #[error("loop bound must be a non-negative integer, got {0}")]
    BadLoopCount(f64),
    #[error("`{0}` is a random variable and cannot be assigned a deterministic value")]
    RandomAsDeterministic(String),
}

pub trait Machine {
    type Error;

    /// Value of a deterministic variable.
    fn lookup(&self, name: &str) -> Option<f64>;

    /// Binds a deterministic variable.
    fn assign(&mut self, name: &str, value: f64) -> Result<(), StepError>;

    fn apply(&mut self, action: Action, span: Span) -> Result<(), Self::Error>;

    /// Called when a statement cannot be evaluated; returning `Ok` skips the
    /// statement and carries on.
    fn step_failed(&mut self, err: StepError, span: Span) -> Result<(), Self::Error>;
}

pub fn eval<M: Machine + ?Sized>(e: &Expr, m: &M) -> Result<f64, EvalError> {
    e.eval_with(&|name| m.lookup(name))
}

pub fn resolve<M: Machine + ?Sized>(rv: &RvRef, m: &M) -> Result<String, StepError> {
    match &rv.index {
        None => Ok(rv.base.clone()),
        Some(e) => {
            let v = eval(e, m)?;
            loop_count(v)
                .map(|i| element_name(&rv.base, i))
                .ok_or_else(|| StepError::BadIndex {
                    base: rv.base.clone(),
                    value: v,
                })
        }
    }
}

/// Turns one atomic statement into its action, or `None` for deterministic
/// assignments (which are applied to the machine directly).
fn lower<M: Machine>(kind: &StmtKind, m: &mut M) -> Result<Option<Action>, StepError> {
    let action = match kind {
        StmtKind::ProbAssign { target, dist } => {
            let target = resolve(target, m)?;
            match dist {
                DistSpec::Independent { mean, variance } => Action::Independent {
                    target,
                    mean: eval(mean, m)?,
                    variance: eval(variance, m)?,
                },
                DistSpec::LinearDep {
                    coeff,
                    dep,
                    offset,
                    variance,
                } => Action::Linear {
                    target,
                    coeff: eval(coeff, m)?,
                    dep: resolve(dep, m)?,
                    offset: eval(offset, m)?,
                    variance: eval(variance, m)?,
                },
            }
        }
        StmtKind::OpAssign {
            target,
            src,
            op,
            operand,
        } => Action::ShiftScale {
            target: resolve(target, m)?,
            src: resolve(src, m)?,
            op: *op,
            operand: eval(operand, m)?,
        },
        StmtKind::SumAssign { target, lhs, rhs } => Action::Sum {
            target: resolve(target, m)?,
            lhs: resolve(lhs, m)?,
            rhs: resolve(rhs, m)?,
        },
        StmtKind::Condition { target, value } => Action::Condition {
            target: resolve(target, m)?,
            value: eval(value, m)?,
        },
        StmtKind::DetAssign { name, value } => {
            let v = eval(value, m)?;
            m.assign(name, v)?;
            return Ok(None);
        }
        StmtKind::For { .. } => unreachable!("loops are unrolled by the walker"),
    };
    Ok(Some(action))
}

/// Drives a [`Machine`] through a statement list, counting executed atomic
/// statements.
pub struct Walker<'m, M> {
    machine: &'m mut M,
    executed: u64,
}

impl<'m, M: Machine> Walker<'m, M> {
    pub fn new(machine: &'m mut M) -> Self {
        Self { machine, executed: 0 }
    }

    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn run(&mut self, stmts: &[Stmt]) -> Result<(), M::Error> {
        for stmt in stmts {
            self.step(stmt)?;
        }
        Ok(())
    }

    pub fn step(&mut self, stmt: &Stmt) -> Result<(), M::Error> {
        match &stmt.kind {
            StmtKind::For { var, count, body } => {
                let n = match eval(count, self.machine) {
                    Ok(v) => match loop_count(v) {
                        Some(n) => n,
                        None => return self.machine.step_failed(StepError::BadLoopCount(v), stmt.span),
                    },
                    Err(e) => return self.machine.step_failed(e.into(), stmt.span),
                };
                for i in 0..n {
                    if let Err(e) = self.machine.assign(var, i as f64) {
                        return self.machine.step_failed(e, stmt.span);
                    }
                    self.run(body)?;
                }
                Ok(())
            }
            kind => {
                self.executed += 1;
                match lower(kind, self.machine) {
                    Ok(Some(action)) => self.machine.apply(action, stmt.span),
                    Ok(None) => Ok(()),
                    Err(e) => self.machine.step_failed(e, stmt.span),
                }
            }
        }
    }
}
