//! Exact interpreter: runs a program statement by statement on a
//! [`GaussianState`] and returns the posterior of the returned variables.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gaussian::{GaussianError, GaussianState};
use crate::lang::unroll::{resolve, Action, Machine, StepError, Walker};
use crate::lang::{Program, Span};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeErrorKind {
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("program returns no variables")]
    NothingReturned,
}

/// Failure while executing a statement, with the statement's position.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub span: Span,
    pub kind: RuntimeErrorKind,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.kind)
    }
}

impl std::error::Error for RuntimeError {}

impl RuntimeError {
    fn new(span: Span, kind: impl Into<RuntimeErrorKind>) -> Self {
        Self {
            span,
            kind: kind.into(),
        }
    }
}

/// Joint Gaussian plus the deterministic environment.
#[derive(Debug, Clone, Default)]
pub struct ProgramState {
    pub gaussian: GaussianState,
    pub env: HashMap<String, f64>,
    conditioned: HashSet<String>,
}

impl ProgramState {
    pub fn with_capacity(variables: usize) -> Self {
        Self {
            gaussian: GaussianState::with_capacity(variables),
            ..Self::default()
        }
    }

    /// Applies one primitive action.
    pub fn apply_action(&mut self, action: Action) -> Result<(), GaussianError> {
        if !matches!(action, Action::Condition { .. }) && self.conditioned.contains(action.target()) {
            return Err(GaussianError::DuplicateName(action.target().to_owned()));
        }
        let g = std::mem::take(&mut self.gaussian);
        self.gaussian = match action {
            Action::Independent { target, mean, variance } => g.extend_independent(&target, mean, variance)?,
            Action::Linear {
                target,
                coeff,
                dep,
                offset,
                variance,
            } => g.extend_linear(&target, coeff, &dep, offset, variance)?,
            Action::ShiftScale {
                target,
                src,
                op,
                operand,
            } => g.extend_shift_scale(&target, &src, op, operand)?,
            Action::Sum { target, lhs, rhs } => g.extend_sum(&target, &lhs, &rhs)?,
            Action::Condition { target, value } => {
                let g = g.condition(&target, value)?;
                self.conditioned.insert(target);
                g
            }
        };
        Ok(())
    }
}

impl Machine for ProgramState {
    type Error = RuntimeError;

    fn lookup(&self, name: &str) -> Option<f64> {
        self.env.get(name).copied()
    }

    fn assign(&mut self, name: &str, value: f64) -> Result<(), StepError> {
        if self.gaussian.contains(name) || self.conditioned.contains(name) {
            return Err(StepError::RandomAsDeterministic(name.to_owned()));
        }
        self.env.insert(name.to_owned(), value);
        Ok(())
    }

    fn apply(&mut self, action: Action, span: Span) -> Result<(), RuntimeError> {
        // on error the state is left empty; execution stops anyway
        self.apply_action(action).map_err(|e| RuntimeError::new(span, e))
    }

    fn step_failed(&mut self, err: StepError, span: Span) -> Result<(), RuntimeError> {
        Err(RuntimeError::new(span, err))
    }
}

/// Final state of a run together with bookkeeping.
#[derive(Debug, Clone)]
pub struct Execution {
    pub state: ProgramState,
    /// Names of the returned variables, in `return` order.
    pub returns: Vec<String>,
    pub statement_count: u64,
    pub elapsed: Duration,
}

/// Mean and covariance of the returned variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub names: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub statement_count: u64,
    pub elapsed: Duration,
}

impl PosteriorResult {
    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.mean[i])
    }

    pub fn variance_of(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.cov[(i, i)])
    }
}

/// Runs a program and keeps the full joint state.
pub fn execute(program: &Program) -> Result<Execution, RuntimeError> {
    let start = Instant::now();
    let capacity = program.random_assignment_count().unwrap_or(0).min(1 << 24) as usize;
    let mut state = ProgramState::with_capacity(capacity);
    let mut walker = Walker::new(&mut state);
    walker.run(&program.body)?;
    let statement_count = walker.executed();
    if program.returns.is_empty() {
        return Err(RuntimeError::new(program.return_span, RuntimeErrorKind::NothingReturned));
    }
    let returns = program
        .returns
        .iter()
        .map(|r| resolve(r, &state).map_err(|e| RuntimeError::new(program.return_span, e)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Execution {
        state,
        returns,
        statement_count,
        elapsed: start.elapsed(),
    })
}

/// Runs a program and returns the joint distribution of its return values.
pub fn run_program(program: &Program) -> Result<PosteriorResult, RuntimeError> {
    let exec = execute(program)?;
    let (mean, cov) = exec
        .state
        .gaussian
        .marginal(&exec.returns)
        .map_err(|e| RuntimeError::new(program.return_span, e))?;
    Ok(PosteriorResult {
        names: exec.returns,
        mean,
        cov,
        statement_count: exec.statement_count,
        elapsed: exec.elapsed,
    })
}
