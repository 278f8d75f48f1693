//! Static well-formedness checks.

use std::collections::{HashMap, HashSet};

use super::ast::{Expr, Program, Span, Stmt, StmtKind};
use super::unroll::{resolve, Action, Machine, StepError, Walker};
use super::Diagnostic;
use crate::gaussian::ArithOp;

/// Diagnostics reported per statement; loops would otherwise repeat them.
const MAX_PER_STATEMENT: usize = 3;

/// Checks a program without evaluating any distribution. An empty result
/// means the program is well formed.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut v = Validator::default();
    check_static(&program.body, &mut v);
    if program.returns.is_empty() {
        v.report(program.return_span, "program must return at least one random variable".into());
    }
    Walker::new(&mut v).run(&program.body).ok();

    let mut returned = HashSet::new();
    for r in &program.returns {
        match resolve(r, &v) {
            Ok(name) => {
                if !v.live.contains(&name) {
                    let msg = v.describe_missing(&name, "returned");
                    v.report(program.return_span, msg);
                } else if !returned.insert(name.clone()) {
                    v.report(program.return_span, format!("`{name}` is returned more than once"));
                }
            }
            Err(e) => v.report(program.return_span, e.to_string()),
        }
    }
    v.diagnostics
}

fn check_static(stmts: &[Stmt], v: &mut Validator) {
    for stmt in stmts {
        let mut zero_div = false;
        let mut check = |e: &Expr| zero_div |= e.divides_by_literal_zero();
        match &stmt.kind {
            StmtKind::ProbAssign { dist, .. } => match dist {
                super::DistSpec::Independent { mean, variance } => {
                    check(mean);
                    check(variance);
                }
                super::DistSpec::LinearDep {
                    coeff,
                    offset,
                    variance,
                    ..
                } => {
                    check(coeff);
                    check(offset);
                    check(variance);
                }
            },
            StmtKind::OpAssign { op, operand, .. } => {
                check(operand);
                if *op == ArithOp::Div && operand.fold() == Some(0.0) {
                    zero_div = true;
                }
            }
            StmtKind::Condition { value, .. } => check(value),
            StmtKind::DetAssign { value, .. } => check(value),
            StmtKind::SumAssign { .. } => {}
            StmtKind::For { count, body, .. } => {
                if !count.is_constant() || count.fold().and_then(super::loop_count).is_none() {
                    v.report(stmt.span, "loop bound must be a non-negative integer constant".into());
                }
                check_static(body, v);
            }
        }
        if zero_div {
            v.report(stmt.span, "division by zero".into());
        }
    }
}

#[derive(Default)]
struct Validator {
    env: HashMap<String, f64>,
    live: HashSet<String>,
    assigned: HashSet<String>,
    conditioned: HashSet<String>,
    diagnostics: Vec<Diagnostic>,
    per_span: HashMap<Span, usize>,
}

impl Validator {
    fn report(&mut self, span: Span, message: String) {
        let seen = self.per_span.entry(span).or_default();
        if *seen >= MAX_PER_STATEMENT {
            return;
        }
        let d = Diagnostic::new(span, message);
        if !self.diagnostics.contains(&d) {
            *seen += 1;
            self.diagnostics.push(d);
        }
    }

    fn describe_missing(&self, name: &str, role: &str) -> String {
        if self.conditioned.contains(name) {
            format!("random variable `{name}` is {role} after it was conditioned on")
        } else if self.env.contains_key(name) {
            format!("`{name}` is deterministic but is {role} as a random variable")
        } else {
            format!("undefined random variable `{name}`")
        }
    }
}

impl Machine for Validator {
    type Error = ();

    fn lookup(&self, name: &str) -> Option<f64> {
        self.env.get(name).copied()
    }

    fn assign(&mut self, name: &str, value: f64) -> Result<(), StepError> {
        if self.assigned.contains(name) {
            return Err(StepError::RandomAsDeterministic(name.to_string()));
        }
        self.env.insert(name.to_string(), value);
        Ok(())
    }

    fn apply(&mut self, action: Action, span: Span) -> Result<(), ()> {
        if let Action::Condition { target, .. } = &action {
            if self.live.remove(target) {
                self.conditioned.insert(target.clone());
            } else if self.conditioned.contains(target) {
                self.report(span, format!("random variable `{target}` is conditioned on twice"));
            } else {
                self.report(span, format!("condition on unknown random variable `{target}`"));
            }
            return Ok(());
        }
        for operand in action.operands() {
            if !self.live.contains(operand) {
                let msg = self.describe_missing(operand, "used");
                self.report(span, msg);
            }
        }
        let target = action.target().to_string();
        if self.assigned.contains(&target) {
            self.report(span, format!("duplicate assignment to random variable `{target}`"));
        } else if self.env.contains_key(&target) {
            self.report(span, format!("`{target}` is already a deterministic variable"));
        }
        self.assigned.insert(target.clone());
        self.live.insert(target);
        Ok(())
    }

    fn step_failed(&mut self, err: StepError, span: Span) -> Result<(), ()> {
        self.report(span, err.to_string());
        Ok(())
    }
}
