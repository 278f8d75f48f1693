//! Every random variable as `offset + weights . eps` over independent
//! standard normals `eps`. Covariances are dot products of weight vectors
//! and conditioning is an orthogonal projection of the weights, so no
//! covariance matrix is ever updated.

use std::collections::{HashMap, HashSet};

use gaussi::lang::unroll::{resolve, Action, Machine, StepError, Walker};
use gaussi::lang::{Program, Span};
use gaussi::ArithOp;

use crate::OracleError;

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub offset: f64,
    /// Padded lazily: missing trailing entries are zero.
    pub weights: Vec<f64>,
}

impl Affine {
    fn weight(&self, j: usize) -> f64 {
        self.weights.get(j).copied().unwrap_or(0.0)
    }

    fn dot(&self, other: &Affine) -> f64 {
        self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).sum()
    }

    fn combine(&self, a: f64, other: &Affine, b: f64, shift: f64) -> Affine {
        let k = self.weights.len().max(other.weights.len());
        Affine {
            offset: a * self.offset + b * other.offset + shift,
            weights: (0..k).map(|j| a * self.weight(j) + b * other.weight(j)).collect(),
        }
    }

    fn scaled(&self, a: f64, shift: f64) -> Affine {
        Affine {
            offset: a * self.offset + shift,
            weights: self.weights.iter().map(|w| a * w).collect(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.dot(self)
    }
}

#[derive(Debug, Clone, Default)]
pub struct NoiseBasisModel {
    pub basis_count: usize,
    pub variables: HashMap<String, Affine>,
    order: Vec<String>,
    retired: HashSet<String>,
    env: HashMap<String, f64>,
}

impl NoiseBasisModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Live variables in creation order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<&Affine, OracleError> {
        self.variables
            .get(name)
            .ok_or_else(|| OracleError::UnknownVariable(name.to_owned()))
    }

    pub fn mean(&self, name: &str) -> Result<f64, OracleError> {
        Ok(self.get(name)?.offset)
    }

    pub fn variance(&self, name: &str) -> Result<f64, OracleError> {
        Ok(self.get(name)?.variance())
    }

    pub fn covariance(&self, a: &str, b: &str) -> Result<f64, OracleError> {
        Ok(self.get(a)?.dot(self.get(b)?))
    }

    fn fresh(&self, name: &str) -> Result<(), OracleError> {
        if self.variables.contains_key(name) || self.retired.contains(name) {
            Err(OracleError::Duplicate(name.to_owned()))
        } else {
            Ok(())
        }
    }

    fn insert(&mut self, name: String, value: Affine) {
        self.order.push(name.clone());
        self.variables.insert(name, value);
    }

    fn largest_variance(&self) -> f64 {
        self.variables.values().map(Affine::variance).fold(0.0, f64::max)
    }

    pub fn apply(&mut self, action: &Action) -> Result<(), OracleError> {
        match action {
            Action::Independent { target, mean, variance } => {
                self.fresh(target)?;
                if *variance < 0.0 {
                    return Err(OracleError::NegativeVariance(target.clone()));
                }
                let j = self.basis_count;
                self.basis_count += 1;
                let mut weights = vec![0.0; j + 1];
                weights[j] = variance.sqrt();
                self.insert(target.clone(), Affine { offset: *mean, weights });
            }
            Action::Linear {
                target,
                coeff,
                dep,
                offset,
                variance,
            } => {
                let base = self.get(dep)?.scaled(*coeff, *offset);
                self.fresh(target)?;
                if *variance < 0.0 {
                    return Err(OracleError::NegativeVariance(target.clone()));
                }
                let j = self.basis_count;
                self.basis_count += 1;
                let mut weights = base.weights;
                weights.resize(j + 1, 0.0);
                weights[j] = variance.sqrt();
                self.insert(
                    target.clone(),
                    Affine {
                        offset: base.offset,
                        weights,
                    },
                );
            }
            Action::ShiftScale {
                target,
                src,
                op,
                operand,
            } => {
                let s = self.get(src)?;
                let value = match op {
                    ArithOp::Add => s.scaled(1.0, *operand),
                    ArithOp::Sub => s.scaled(1.0, -operand),
                    ArithOp::Mul => s.scaled(*operand, 0.0),
                    ArithOp::Div => {
                        if *operand == 0.0 {
                            return Err(OracleError::DivisionByZero);
                        }
                        s.scaled(1.0 / operand, 0.0)
                    }
                };
                self.fresh(target)?;
                self.insert(target.clone(), value);
            }
            Action::Sum { target, lhs, rhs } => {
                let value = self.get(lhs)?.combine(1.0, self.get(rhs)?, 1.0, 0.0);
                self.fresh(target)?;
                self.insert(target.clone(), value);
            }
            Action::Condition { target, value } => self.observe(target, *value)?,
        }
        Ok(())
    }

    /// Exact conditioning on `name = value`: with `y = o + w . eps`, the
    /// component of `eps` along `w` is pinned and every weight vector loses
    /// its projection onto `w`.
    pub fn observe(&mut self, name: &str, value: f64) -> Result<(), OracleError> {
        let y = self.get(name)?.clone();
        let ww = y.dot(&y);
        let innovation = value - y.offset;
        if ww <= 1e-12 * (1.0 + self.largest_variance()) {
            if innovation.abs() > 1e-9 * (1.0 + y.offset.abs()) {
                return Err(OracleError::OutsideSupport(name.to_owned()));
            }
        } else {
            for (n, x) in self.variables.iter_mut() {
                if n == name {
                    continue;
                }
                let g = x.dot(&y) / ww;
                if g == 0.0 {
                    continue;
                }
                x.offset += g * innovation;
                if x.weights.len() < y.weights.len() {
                    x.weights.resize(y.weights.len(), 0.0);
                }
                for (xw, yw) in x.weights.iter_mut().zip(&y.weights) {
                    *xw -= g * yw;
                }
            }
        }
        self.variables.remove(name);
        self.order.retain(|n| n != name);
        self.retired.insert(name.to_owned());
        Ok(())
    }
}

impl Machine for NoiseBasisModel {
    type Error = OracleError;

    fn lookup(&self, name: &str) -> Option<f64> {
        self.env.get(name).copied()
    }

    fn assign(&mut self, name: &str, value: f64) -> Result<(), StepError> {
        if self.variables.contains_key(name) || self.retired.contains(name) {
            return Err(StepError::RandomAsDeterministic(name.to_owned()));
        }
        self.env.insert(name.to_owned(), value);
        Ok(())
    }

    fn apply(&mut self, action: Action, _span: Span) -> Result<(), OracleError> {
        NoiseBasisModel::apply(self, &action)
    }

    fn step_failed(&mut self, err: StepError, _span: Span) -> Result<(), OracleError> {
        Err(OracleError::Step(err))
    }
}

/// Executes `program` on the noise basis. Returns the model and the
/// resolved names of the returned variables.
pub fn build_noise_basis(program: &Program) -> Result<(NoiseBasisModel, Vec<String>), OracleError> {
    let mut model = NoiseBasisModel::new();
    Walker::new(&mut model).run(&program.body)?;
    let returns = program
        .returns
        .iter()
        .map(|r| resolve(r, &model).map_err(OracleError::Step))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((model, returns))
}

/// Mean vector and covariance matrix of `targets`.
pub fn oracle_moments<S: AsRef<str>>(
    model: &NoiseBasisModel,
    targets: &[S],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), OracleError> {
    let vars = targets
        .iter()
        .map(|t| model.get(t.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = vars.iter().map(|v| v.offset).collect();
    let cov = vars
        .iter()
        .map(|a| vars.iter().map(|b| a.dot(b)).collect())
        .collect();
    Ok((mean, cov))
}

/// Runs `program` and returns the moments of its return values.
pub fn program_moments(program: &Program) -> Result<(Vec<String>, Vec<f64>, Vec<Vec<f64>>), OracleError> {
    let (model, returns) = build_noise_basis(program)?;
    let (mean, cov) = oracle_moments(&model, &returns)?;
    Ok((returns, mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaussi::parse;

    #[test]
    fn single_variable() {
        let (m, r) = build_noise_basis(&parse("X = Normal(3, 4)\nreturn X").unwrap()).unwrap();
        let x = m.get(&r[0]).unwrap();
        assert_eq!(x.offset, 3.0);
        assert_eq!(x.weights, vec![2.0]);
    }

    #[test]
    fn disjoint_bases_are_uncorrelated() {
        let (m, _) = build_noise_basis(&parse("X = Normal(0, 1)\nY = Normal(0, 2)\nreturn X, Y").unwrap()).unwrap();
        assert_eq!(m.covariance("X", "Y").unwrap(), 0.0);
    }

    #[test]
    fn point_mass_support() {
        let p = parse("X = Normal(1, 0)\ncondition(X, 2)\nY = Normal(0, 1)\nreturn Y").unwrap();
        assert!(matches!(build_noise_basis(&p), Err(OracleError::OutsideSupport(_))));
    }
}
