//! Multivariate Gaussian state and its closed-form updates.
//!
//! A [`GaussianState`] is an ordered list of named random variables together
//! with their mean vector and covariance matrix. Every statement of the
//! language reduces to one of the operations here: appending a variable
//! (independent, linearly dependent, shifted/scaled copy, sum of two),
//! conditioning on an observed value, marginalising, or applying an affine
//! map.
//!
//! The covariance matrix is symmetric, so only its lower triangle is stored,
//! packed row after row. Appending a variable pushes one row and never
//! touches existing entries, which keeps extension linear in the current
//! dimension. Operations consume `self` and return the successor state; keep
//! a clone if the previous state is still needed.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance for the positive semi-definite check, scaled by
/// `1 + max diagonal`.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Relative tolerance for the symmetry check, scaled by `1 + max |cov|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Observed variances at or below `ZERO_VARIANCE_TOLERANCE * (1 + max
/// diagonal)` are treated as exactly zero when conditioning.
pub const ZERO_VARIANCE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance used by [`GaussianState::is_independent`].
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("variable `{0}` is already defined")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variance of `{name}` must be non-negative, got {variance}")]
    NegativeVariance { name: String, variance: f64 },
    #[error("division of `{0}` by zero")]
    DivisionByZero(String),
    #[error("non-finite parameter for `{0}`")]
    NonFinite(String),
    #[error(
        "observed value {value} for `{name}` is outside its support: the variable is a point mass at {mean}"
    )]
    OutsideSupport { name: String, value: f64, mean: f64 },
    #[error("variable `{0}` requested twice")]
    DuplicateTarget(String),
    #[error("independence query needs two distinct variables, got `{0}` twice")]
    SameVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),
    #[error("covariance matrix is not positive semi-definite (smallest eigenvalue {0:e})")]
    NotPositiveSemiDefinite(f64),
}

pub type Result<T> = std::result::Result<T, GaussianError>;

/// Map from variable name to its position in a [`GaussianState`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableIndex {
    positions: HashMap<String, usize>,
}

impl VariableIndex {
    fn with_capacity(capacity: usize) -> Self {
        Self {
            positions: HashMap::with_capacity(capacity),
        }
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.positions.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.positions.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn insert(&mut self, name: String, position: usize) {
        self.positions.insert(name, position);
    }

    fn rebuild(names: &[String]) -> Self {
        let mut index = Self::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            index.insert(name.clone(), i);
        }
        index
    }
}

#[inline]
fn packed_offset(row: usize) -> usize {
    row * (row + 1) / 2
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    if i >= j {
        packed_offset(i) + j
    } else {
        packed_offset(j) + i
    }
}

/// Joint Gaussian distribution over named variables.
#[derive(Clone, Default, PartialEq)]
pub struct GaussianState {
    names: Vec<String>,
    index: VariableIndex,
    mean: Vec<f64>,
    /// Lower triangle of the covariance, row-major packed.
    cov: Vec<f64>,
}

impl fmt::Debug for GaussianState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaussianState")
            .field("names", &self.names)
            .field("mean", &self.mean)
            .field("cov", &self.covariance_matrix())
            .finish()
    }
}

impl GaussianState {
    /// The empty state over zero variables.
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty state with storage reserved for `variables` variables.
    pub fn with_capacity(variables: usize) -> Self {
        Self {
            names: Vec::with_capacity(variables),
            index: VariableIndex::with_capacity(variables),
            mean: Vec::with_capacity(variables),
            cov: Vec::with_capacity(packed_offset(variables)),
        }
    }

    /// Builds a state from explicit parameters, checking every invariant.
    pub fn from_parts(names: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = names.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(GaussianError::DimensionMismatch(format!(
                "{} names, mean of length {}, covariance {}x{}",
                n,
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let mut index = VariableIndex::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.contains(name) {
                return Err(GaussianError::DuplicateName(name.clone()));
            }
            index.insert(name.clone(), i);
        }
        let scale = 1.0 + cov.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((cov[(i, j)] - cov[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOLERANCE * scale {
            return Err(GaussianError::NotSymmetric(asym));
        }
        let mut packed = Vec::with_capacity(packed_offset(n));
        for i in 0..n {
            for j in 0..=i {
                packed.push(0.5 * (cov[(i, j)] + cov[(j, i)]));
            }
        }
        let state = Self {
            names,
            index,
            mean: mean.iter().copied().collect(),
            cov: packed,
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self) -> &VariableIndex {
        &self.index
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains(name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .ok_or_else(|| GaussianError::UnknownVariable(name.to_owned()))
    }

    pub fn mean_vector(&self) -> &[f64] {
        &self.mean
    }

    pub fn mean_of(&self, name: &str) -> Result<f64> {
        Ok(self.mean[self.position(name)?])
    }

    pub fn variance_of(&self, name: &str) -> Result<f64> {
        let i = self.position(name)?;
        Ok(self.entry(i, i))
    }

    pub fn covariance_of(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.entry(self.position(a)?, self.position(b)?))
    }

    /// Covariance between the variables at positions `i` and `j`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.cov[packed_index(i, j)]
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn mean_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    fn max_diagonal(&self) -> f64 {
        (0..self.len())
            .map(|i| self.entry(i, i))
            .fold(0.0_f64, f64::max)
    }

    /// Verifies symmetry (structural here), non-negative diagonal and
    /// positive semi-definiteness within [`PSD_TOLERANCE`].
    ///
    /// Costs an eigen-decomposition; meant for tests and for validating
    /// externally supplied states.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        if self.mean.len() != n || self.cov.len() != packed_offset(n) || self.index.len() != n {
            return Err(GaussianError::DimensionMismatch(format!(
                "{} names, {} means, {} packed covariance entries",
                n,
                self.mean.len(),
                self.cov.len()
            )));
        }
        if self.mean.iter().chain(&self.cov).any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite("state".into()));
        }
        let tol = PSD_TOLERANCE * (1.0 + self.max_diagonal());
        if let Some(d) = (0..n).map(|i| self.entry(i, i)).find(|&d| d < 0.0) {
            return Err(GaussianError::NotPositiveSemiDefinite(d));
        }
        if n > 0 {
            let eig = self.covariance_matrix().symmetric_eigenvalues();
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -tol {
                return Err(GaussianError::NotPositiveSemiDefinite(min));
            }
        }
        Ok(())
    }

    fn ensure_fresh(&self, name: &str) -> Result<()> {
        if self.contains(name) {
            Err(GaussianError::DuplicateName(name.to_owned()))
        } else {
            Ok(())
        }
    }

    fn check_variance(name: &str, variance: f64) -> Result<()> {
        if !variance.is_finite() {
            return Err(GaussianError::NonFinite(name.to_owned()));
        }
        if variance < 0.0 {
            return Err(GaussianError::NegativeVariance {
                name: name.to_owned(),
                variance,
            });
        }
        Ok(())
    }

    /// Appends a variable with mean `mean`, covariances `row` against the
    /// existing variables, and variance `variance`.
    fn push(&mut self, name: &str, mean: f64, row: impl IntoIterator<Item = f64>, variance: f64) {
        let n = self.len();
        self.cov.reserve(n + 1);
        self.cov.extend(row);
        debug_assert_eq!(self.cov.len(), packed_offset(n) + n);
        self.cov.push(variance);
        self.mean.push(mean);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), n);
    }

    /// Column `k` of the covariance as an iterator over the first `n` rows.
    fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.entry(j, k))
    }

    /// `name ~ N(mean, variance)`, independent of everything else.
    pub fn extend_independent(mut self, name: &str, mean: f64, variance: f64) -> Result<Self> {
        self.ensure_fresh(name)?;
        Self::check_variance(name, variance)?;
        if !mean.is_finite() {
            return Err(GaussianError::NonFinite(name.to_owned()));
        }
        let n = self.len();
        self.push(name, mean, std::iter::repeat(0.0).take(n), variance);
        Ok(self)
    }

    /// `name | dep ~ N(coeff * dep + offset, variance)`.
    pub fn extend_linear(
        mut self,
        name: &str,
        coeff: f64,
        dep: &str,
        offset: f64,
        variance: f64,
    ) -> Result<Self> {
        let d = self.position(dep)?;
        self.ensure_fresh(name)?;
        Self::check_variance(name, variance)?;
        if !coeff.is_finite() || !offset.is_finite() {
            return Err(GaussianError::NonFinite(name.to_owned()));
        }
        let mean = coeff * self.mean[d] + offset;
        let var = coeff * coeff * self.entry(d, d) + variance;
        let row: Vec<f64> = self.column(d).map(|c| coeff * c).collect();
        self.push(name, mean, row, var);
        Ok(self)
    }

    /// `name = src op operand` for a constant operand.
    pub fn extend_shift_scale(mut self, name: &str, src: &str, op: ArithOp, operand: f64) -> Result<Self> {
        let s = self.position(src)?;
        self.ensure_fresh(name)?;
        if !operand.is_finite() {
            return Err(GaussianError::NonFinite(name.to_owned()));
        }
        let (scale, shift) = match op {
            ArithOp::Add => (1.0, operand),
            ArithOp::Sub => (1.0, -operand),
            ArithOp::Mul => (operand, 0.0),
            ArithOp::Div => {
                if operand == 0.0 {
                    return Err(GaussianError::DivisionByZero(src.to_owned()));
                }
                (1.0 / operand, 0.0)
            }
        };
        let (mean, var, row): (f64, f64, Vec<f64>) = if matches!(op, ArithOp::Add | ArithOp::Sub) {
            (self.mean[s] + shift, self.entry(s, s), self.column(s).collect())
        } else {
            (
                scale * self.mean[s],
                scale * scale * self.entry(s, s),
                self.column(s).map(|c| scale * c).collect(),
            )
        };
        self.push(name, mean, row, var);
        Ok(self)
    }

    /// `name = a + b`; `a` and `b` may be the same variable.
    pub fn extend_sum(mut self, name: &str, a: &str, b: &str) -> Result<Self> {
        let ia = self.position(a)?;
        let ib = self.position(b)?;
        self.ensure_fresh(name)?;
        let mean = self.mean[ia] + self.mean[ib];
        let var = self.entry(ia, ia) + self.entry(ib, ib) + self.entry(ia, ib) + self.entry(ib, ia);
        let row: Vec<f64> = (0..self.len())
            .map(|j| self.entry(j, ia) + self.entry(j, ib))
            .collect();
        self.push(name, mean, row, var);
        Ok(self)
    }

    /// Conditions on `obs = value` and removes `obs` from the state.
    ///
    /// Equivalent to permuting `obs` to the last position and applying the
    /// Schur-complement update with the scalar generalized inverse
    /// (`1/s` for `s > 0`, otherwise `0`).
    pub fn condition(mut self, obs: &str, value: f64) -> Result<Self> {
        let k = self.position(obs)?;
        if !value.is_finite() {
            return Err(GaussianError::NonFinite(obs.to_owned()));
        }
        let n = self.len();
        let max_diag = self.max_diagonal();
        let s = self.entry(k, k);
        let mu_k = self.mean[k];
        let gain_scale = if s > ZERO_VARIANCE_TOLERANCE * (1.0 + max_diag) {
            1.0 / s
        } else {
            if (value - mu_k).abs() > 1e-9 * (1.0 + mu_k.abs()) {
                return Err(GaussianError::OutsideSupport {
                    name: obs.to_owned(),
                    value,
                    mean: mu_k,
                });
            }
            0.0
        };
        let column: Vec<f64> = self.column(k).collect();
        let innovation = value - mu_k;
        let clamp = PSD_TOLERANCE * (1.0 + max_diag);

        // Compact the packed triangle in place: the write cursor never
        // overtakes the read cursor because entries are only removed.
        let mut w = 0;
        for i in 0..n {
            if i == k {
                continue;
            }
            let gi = column[i] * gain_scale;
            let row = packed_offset(i);
            for j in 0..=i {
                if j == k {
                    continue;
                }
                let mut v = self.cov[row + j] - gi * column[j];
                if i == j && v < 0.0 && v >= -clamp {
                    v = 0.0;
                }
                self.cov[w] = v;
                w += 1;
            }
        }
        self.cov.truncate(w);
        for (i, m) in self.mean.iter_mut().enumerate() {
            *m += column[i] * gain_scale * innovation;
        }
        self.mean.remove(k);
        self.names.remove(k);
        self.index = VariableIndex::rebuild(&self.names);
        Ok(self)
    }

    /// Mean and covariance restricted to `targets`, in the given order.
    pub fn marginal<S: AsRef<str>>(&self, targets: &[S]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let positions = self.positions_of(targets)?;
        let m = positions.len();
        let mean = DVector::from_fn(m, |i, _| self.mean[positions[i]]);
        let cov = DMatrix::from_fn(m, m, |i, j| self.entry(positions[i], positions[j]));
        Ok((mean, cov))
    }

    /// Marginal as a new state over `targets` only.
    pub fn marginal_state<S: AsRef<str>>(&self, targets: &[S]) -> Result<Self> {
        let positions = self.positions_of(targets)?;
        let mut out = Self::with_capacity(positions.len());
        for (i, &p) in positions.iter().enumerate() {
            let row: Vec<f64> = positions[..i].iter().map(|&q| self.entry(p, q)).collect();
            out.push(&self.names[p], self.mean[p], row, self.entry(p, p));
        }
        Ok(out)
    }

    fn positions_of<S: AsRef<str>>(&self, targets: &[S]) -> Result<Vec<usize>> {
        let mut seen = std::collections::HashSet::with_capacity(targets.len());
        targets
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if !seen.insert(t) {
                    return Err(GaussianError::DuplicateTarget(t.to_owned()));
                }
                self.position(t)
            })
            .collect()
    }

    /// Zero covariance test, relative to `1 + sqrt(var_a * var_b)`.
    pub fn is_independent(&self, a: &str, b: &str) -> Result<bool> {
        let ia = self.position(a)?;
        let ib = self.position(b)?;
        if ia == ib {
            return Err(GaussianError::SameVariable(a.to_owned()));
        }
        let scale = 1.0 + (self.entry(ia, ia) * self.entry(ib, ib)).sqrt();
        Ok(self.entry(ia, ib).abs() <= INDEPENDENCE_TOLERANCE * scale)
    }

    /// `Y = A X + b`, producing a state over `new_names`.
    pub fn affine_transform<S: AsRef<str>>(
        &self,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        new_names: &[S],
    ) -> Result<Self> {
        let n = self.len();
        let m = a.nrows();
        if a.ncols() != n || b.len() != m || new_names.len() != m {
            return Err(GaussianError::DimensionMismatch(format!(
                "A is {}x{}, b has {} entries, {} names, state has {} variables",
                a.nrows(),
                a.ncols(),
                b.len(),
                new_names.len(),
                n
            )));
        }
        let mean = a * self.mean_dvector() + b;
        let a_sigma = a * self.covariance_matrix();
        let mut out = Self::with_capacity(m);
        for i in 0..m {
            let name = new_names[i].as_ref();
            out.ensure_fresh(name)?;
            let row: Vec<f64> = (0..i).map(|j| a_sigma.row(i).dot(&a.row(j))).collect();
            let var = a_sigma.row(i).dot(&a.row(i)).max(0.0);
            out.push(name, mean[i], row, var);
        }
        Ok(out)
    }
}

/// The four arithmetic operators of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> Option<f64> {
        match self {
            ArithOp::Add => Some(lhs + rhs),
            ArithOp::Sub => Some(lhs - rhs),
            ArithOp::Mul => Some(lhs * rhs),
            ArithOp::Div if rhs == 0.0 => None,
            ArithOp::Div => Some(lhs / rhs),
        }
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_state(state: &GaussianState, mean: &[f64], cov: &[&[f64]]) {
        assert_eq!(state.len(), mean.len());
        for (i, m) in mean.iter().enumerate() {
            assert_abs_diff_eq!(state.mean_vector()[i], *m, epsilon = 1e-9);
        }
        for (i, row) in cov.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                assert_abs_diff_eq!(state.entry(i, j), *c, epsilon = 1e-9);
            }
        }
        state.check_invariants().unwrap();
    }

    fn example_one() -> GaussianState {
        GaussianState::new()
            .extend_independent("X1", 50.0, 2.0)
            .and_then(|s| s.extend_linear("X2", 2.0, "X1", -5.0, 1.0))
            .and_then(|s| s.extend_linear("X3", 1.0, "X2", -10.0, 4.0))
            .unwrap()
    }

    fn example_five() -> GaussianState {
        GaussianState::new()
            .extend_independent("X", 15.0, 2.0)
            .and_then(|s| s.extend_independent("Y", 2.0, 1.0))
            .and_then(|s| s.extend_sum("Z", "X", "Y"))
            .unwrap()
    }

    #[test]
    fn independent_assignments() {
        let s = GaussianState::new().extend_independent("X", 15.0, 2.0).unwrap();
        assert_state(&s, &[15.0], &[&[2.0]]);
        let s = s.extend_independent("Y", 20.0, 1.0).unwrap();
        assert_state(&s, &[15.0, 20.0], &[&[2.0, 0.0], &[0.0, 1.0]]);
        let s = s.extend_independent("Z", 0.0, 0.0).unwrap();
        assert_eq!(s.variance_of("Z").unwrap(), 0.0);
        assert_eq!(s.covariance_of("Z", "X").unwrap(), 0.0);
    }

    #[test]
    fn independent_rejects_bad_input() {
        let s = GaussianState::new().extend_independent("X", 0.0, 1.0).unwrap();
        assert_eq!(
            s.clone().extend_independent("X", 0.0, 1.0).unwrap_err(),
            GaussianError::DuplicateName("X".into())
        );
        assert!(matches!(
            s.extend_independent("Y", 0.0, -1.0),
            Err(GaussianError::NegativeVariance { .. })
        ));
    }

    #[test]
    fn linear_dependence_chain() {
        let s = example_one();
        assert_state(
            &s,
            &[50.0, 95.0, 85.0],
            &[&[2.0, 4.0, 4.0], &[4.0, 9.0, 9.0], &[4.0, 9.0, 13.0]],
        );
        let s = GaussianState::new()
            .extend_independent("X", 15.0, 2.0)
            .and_then(|s| s.extend_independent("Y", 20.0, 1.0))
            .and_then(|s| s.extend_linear("Z", 2.0, "X", 0.0, 1.0))
            .unwrap();
        assert_state(
            &s,
            &[15.0, 20.0, 30.0],
            &[&[2.0, 0.0, 4.0], &[0.0, 1.0, 0.0], &[4.0, 0.0, 9.0]],
        );
    }

    #[test]
    fn linear_copy_and_errors() {
        let s = GaussianState::new()
            .extend_independent("X", 3.0, 5.0)
            .and_then(|s| s.extend_linear("Y", 1.0, "X", 0.0, 0.0))
            .unwrap();
        assert_eq!(s.mean_of("Y").unwrap(), 3.0);
        assert_eq!(s.covariance_of("X", "Y").unwrap(), 5.0);
        assert_eq!(
            s.clone().extend_linear("W", 1.0, "Q", 0.0, 1.0).unwrap_err(),
            GaussianError::UnknownVariable("Q".into())
        );
        assert!(s.extend_linear("X", 1.0, "Y", 0.0, 1.0).is_err());
    }

    #[test]
    fn shift_and_scale() {
        let s = GaussianState::new()
            .extend_independent("X", 1.0, 1.0)
            .and_then(|s| s.extend_shift_scale("Y", "X", ArithOp::Add, 2.0))
            .unwrap();
        assert_state(&s, &[1.0, 3.0], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let s = s.extend_shift_scale("Z", "Y", ArithOp::Mul, 2.0).unwrap();
        assert_state(
            &s,
            &[1.0, 3.0, 6.0],
            &[&[1.0, 1.0, 2.0], &[1.0, 1.0, 2.0], &[2.0, 2.0, 4.0]],
        );
        let s = s.extend_shift_scale("W", "X", ArithOp::Mul, 1.0).unwrap();
        assert_eq!(s.covariance_of("W", "X").unwrap(), 1.0);
        let s = s.extend_shift_scale("V", "Z", ArithOp::Div, 4.0).unwrap();
        assert_abs_diff_eq!(s.mean_of("V").unwrap(), 1.5);
        assert_abs_diff_eq!(s.variance_of("V").unwrap(), 0.25);
        let s = s.extend_shift_scale("U", "Z", ArithOp::Sub, 6.0).unwrap();
        assert_abs_diff_eq!(s.mean_of("U").unwrap(), 0.0);
        assert_eq!(
            s.extend_shift_scale("T", "X", ArithOp::Div, 0.0).unwrap_err(),
            GaussianError::DivisionByZero("X".into())
        );
    }

    #[test]
    fn sums() {
        let s = example_five();
        assert_state(
            &s,
            &[15.0, 2.0, 17.0],
            &[&[2.0, 0.0, 2.0], &[0.0, 1.0, 1.0], &[2.0, 1.0, 3.0]],
        );
        let s = GaussianState::new()
            .extend_independent("X", 4.0, 3.0)
            .and_then(|s| s.extend_sum("Z", "X", "X"))
            .unwrap();
        assert_eq!(s.mean_of("Z").unwrap(), 8.0);
        assert_eq!(s.variance_of("Z").unwrap(), 12.0);
    }

    #[test]
    fn conditioning_examples() {
        let s = example_five().condition("Z", 1.0).unwrap();
        assert_state(
            &s,
            &[13.0 / 3.0, -10.0 / 3.0],
            &[&[2.0 / 3.0, -2.0 / 3.0], &[-2.0 / 3.0, 2.0 / 3.0]],
        );
        assert_eq!(s.names(), &["X".to_string(), "Y".to_string()]);

        let s = example_one().condition("X3", 85.0).unwrap();
        assert_state(
            &s,
            &[50.0, 95.0],
            &[&[10.0 / 13.0, 16.0 / 13.0], &[16.0 / 13.0, 36.0 / 13.0]],
        );
    }

    #[test]
    fn conditioning_middle_variable() {
        let s = example_one().condition("X2", 97.0).unwrap();
        assert_eq!(s.names(), &["X1".to_string(), "X3".to_string()]);
        // X1 | X2: gain 4/9, X3 | X2 = X2 - 10 + noise(4)
        assert_abs_diff_eq!(s.mean_of("X1").unwrap(), 50.0 + 4.0 / 9.0 * 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mean_of("X3").unwrap(), 87.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.variance_of("X3").unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.covariance_of("X1", "X3").unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(s.position("X3").unwrap(), 1);
    }

    #[test]
    fn conditioning_independent_variable_is_a_no_op() {
        let base = example_one();
        let s = base.clone().extend_independent("W", 7.0, 3.0).unwrap();
        let c = s.condition("W", 123.0).unwrap();
        assert_eq!(c.mean_vector(), base.mean_vector());
        assert_eq!(c.covariance_matrix(), base.covariance_matrix());
    }

    #[test]
    fn conditioning_point_mass() {
        let s = GaussianState::new()
            .extend_independent("X", 1.0, 2.0)
            .and_then(|s| s.extend_independent("P", 5.0, 0.0))
            .unwrap();
        let ok = s.clone().condition("P", 5.0).unwrap();
        assert_eq!(ok.mean_vector(), &[1.0]);
        assert!(matches!(
            s.clone().condition("P", 6.0),
            Err(GaussianError::OutsideSupport { .. })
        ));
        assert_eq!(
            s.condition("Q", 0.0).unwrap_err(),
            GaussianError::UnknownVariable("Q".into())
        );
    }

    #[test]
    fn conditioning_clamps_tiny_negative_variance() {
        // Y = 2X exactly, so after observing X the variance of Y is zero up
        // to rounding.
        let s = GaussianState::new()
            .extend_independent("X", 0.1, 0.3)
            .and_then(|s| s.extend_shift_scale("Y", "X", ArithOp::Mul, 3.0))
            .and_then(|s| s.condition("X", 0.7))
            .unwrap();
        assert!(s.variance_of("Y").unwrap() >= 0.0);
        s.check_invariants().unwrap();
        // a zero-variance Y can still be observed at its mean
        let mean = s.mean_of("Y").unwrap();
        assert!(s.condition("Y", mean).is_ok());
    }

    #[test]
    fn marginals() {
        let s = example_one();
        let (m, c) = s.marginal(&["X2"]).unwrap();
        assert_eq!(m.as_slice(), &[95.0]);
        assert_eq!(c[(0, 0)], 9.0);
        let (m, c) = s.marginal(s.names()).unwrap();
        assert_eq!(m.as_slice(), s.mean_vector());
        assert_eq!(c, s.covariance_matrix());
        let (m, c) = s.marginal(&["X3", "X1"]).unwrap();
        assert_eq!(m.as_slice(), &[85.0, 50.0]);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[13.0, 4.0, 4.0, 2.0]));
        assert_eq!(
            s.marginal(&["X1", "X1"]).unwrap_err(),
            GaussianError::DuplicateTarget("X1".into())
        );
        assert!(s.marginal(&["nope"]).is_err());
    }

    #[test]
    fn independence() {
        let s = GaussianState::new()
            .extend_independent("X", 15.0, 2.0)
            .and_then(|s| s.extend_independent("Y", 20.0, 1.0))
            .and_then(|s| s.extend_linear("Z", 2.0, "X", 0.0, 1.0))
            .unwrap();
        assert!(s.is_independent("Y", "Z").unwrap());
        assert!(!s.is_independent("X", "Z").unwrap());
        assert!(s.is_independent("X", "Y").unwrap());
        assert_eq!(
            s.is_independent("X", "X").unwrap_err(),
            GaussianError::SameVariable("X".into())
        );
    }

    #[test]
    fn affine_identity_and_permutation() {
        let s = example_one();
        let id = DMatrix::identity(3, 3);
        let zero = DVector::zeros(3);
        let t = s.affine_transform(&id, &zero, &["A", "B", "C"]).unwrap();
        assert_eq!(t.mean_vector(), s.mean_vector());
        assert_eq!(t.covariance_matrix(), s.covariance_matrix());

        let perm = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = s.affine_transform(&perm, &zero, &["X3", "X1", "X2"]).unwrap();
        assert_eq!(p.mean_vector(), &[85.0, 50.0, 95.0]);
        assert_eq!(p.covariance_of("X3", "X1").unwrap(), 4.0);
        assert_eq!(p.variance_of("X3").unwrap(), 13.0);
        assert!(s
            .affine_transform(&DMatrix::identity(2, 2), &DVector::zeros(2), &["a", "b"])
            .is_err());
    }

    #[test]
    fn conditioning_matches_permute_then_condition_last() {
        let s = example_one();
        let perm = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let moved = s
            .affine_transform(&perm, &DVector::zeros(3), &["X1", "X3", "X2"])
            .unwrap();
        let direct = s.clone().condition("X2", 90.0).unwrap();
        let via_perm = moved.condition("X2", 90.0).unwrap();
        for name in ["X1", "X3"] {
            assert_abs_diff_eq!(
                direct.mean_of(name).unwrap(),
                via_perm.mean_of(name).unwrap(),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            direct.covariance_of("X1", "X3").unwrap(),
            via_perm.covariance_of("X1", "X3").unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn from_parts_validates() {
        let names = vec!["a".to_string(), "b".to_string()];
        let mean = DVector::from_vec(vec![0.0, 1.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianState::from_parts(names.clone(), mean.clone(), bad),
            Err(GaussianError::NotPositiveSemiDefinite(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            GaussianState::from_parts(names.clone(), mean.clone(), asym),
            Err(GaussianError::NotSymmetric(_))
        ));
        let good = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let s = GaussianState::from_parts(names, mean, good.clone()).unwrap();
        assert_eq!(s.covariance_matrix(), good);
    }

    #[test]
    fn marginal_state_keeps_requested_order() {
        let s = example_one().marginal_state(&["X3", "X2"]).unwrap();
        assert_eq!(s.names(), &["X3".to_string(), "X2".to_string()]);
        assert_eq!(s.covariance_of("X3", "X2").unwrap(), 9.0);
        assert_eq!(s.variance_of("X3").unwrap(), 13.0);
    }
}
