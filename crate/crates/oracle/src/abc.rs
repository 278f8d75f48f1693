//! Rejection sampler: forward-simulate the program without its conditions
//! and keep runs whose observed variables all land within a bandwidth of
//! the observed values.

use std::collections::{HashMap, HashSet};

use gaussi::lang::unroll::{resolve, Action, Machine, StepError, Walker};
use gaussi::lang::{Program, Span};
use gaussi::ArithOp;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::OracleError;

const CHUNK: usize = 1 << 16;
const PILOT_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Draw { slot: usize, mean: f64, sd: f64 },
    Linear { slot: usize, coeff: f64, dep: usize, offset: f64, sd: f64 },
    Affine { slot: usize, src: usize, scale: f64, shift: f64 },
    Sum { slot: usize, a: usize, b: usize },
}

/// Straight-line sampling program.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    ops: Vec<Op>,
    slots: usize,
    /// (slot, observed value)
    observations: Vec<(usize, f64)>,
    outputs: Vec<usize>,
    pub output_names: Vec<String>,
}

#[derive(Default)]
struct TapeBuilder {
    tape: Tape,
    live: HashMap<String, usize>,
    retired: HashSet<String>,
    env: HashMap<String, f64>,
}

impl TapeBuilder {
    fn slot_of(&self, name: &str) -> Result<usize, OracleError> {
        self.live
            .get(name)
            .copied()
            .ok_or_else(|| OracleError::UnknownVariable(name.to_owned()))
    }

    fn define(&mut self, name: &str) -> Result<usize, OracleError> {
        if self.live.contains_key(name) || self.retired.contains(name) {
            return Err(OracleError::Duplicate(name.to_owned()));
        }
        let slot = self.tape.slots;
        self.tape.slots += 1;
        self.live.insert(name.to_owned(), slot);
        Ok(slot)
    }
}

fn sd_of(name: &str, variance: f64) -> Result<f64, OracleError> {
    if variance < 0.0 {
        Err(OracleError::NegativeVariance(name.to_owned()))
    } else {
        Ok(variance.sqrt())
    }
}

impl Machine for TapeBuilder {
    type Error = OracleError;

    fn lookup(&self, name: &str) -> Option<f64> {
        self.env.get(name).copied()
    }

    fn assign(&mut self, name: &str, value: f64) -> Result<(), StepError> {
        if self.live.contains_key(name) || self.retired.contains(name) {
            return Err(StepError::RandomAsDeterministic(name.to_owned()));
        }
        self.env.insert(name.to_owned(), value);
        Ok(())
    }

    fn apply(&mut self, action: Action, _span: Span) -> Result<(), OracleError> {
        let op = match action {
            Action::Independent { target, mean, variance } => Op::Draw {
                sd: sd_of(&target, variance)?,
                slot: self.define(&target)?,
                mean,
            },
            Action::Linear {
                target,
                coeff,
                dep,
                offset,
                variance,
            } => Op::Linear {
                dep: self.slot_of(&dep)?,
                sd: sd_of(&target, variance)?,
                slot: self.define(&target)?,
                coeff,
                offset,
            },
            Action::ShiftScale {
                target,
                src,
                op,
                operand,
            } => {
                let (scale, shift) = match op {
                    ArithOp::Add => (1.0, operand),
                    ArithOp::Sub => (1.0, -operand),
                    ArithOp::Mul => (operand, 0.0),
                    ArithOp::Div if operand == 0.0 => return Err(OracleError::DivisionByZero),
                    ArithOp::Div => (1.0 / operand, 0.0),
                };
                Op::Affine {
                    src: self.slot_of(&src)?,
                    slot: self.define(&target)?,
                    scale,
                    shift,
                }
            }
            Action::Sum { target, lhs, rhs } => Op::Sum {
                a: self.slot_of(&lhs)?,
                b: self.slot_of(&rhs)?,
                slot: self.define(&target)?,
            },
            Action::Condition { target, value } => {
                let slot = self.slot_of(&target)?;
                self.live.remove(&target);
                self.retired.insert(target);
                self.tape.observations.push((slot, value));
                return Ok(());
            }
        };
        self.tape.ops.push(op);
        Ok(())
    }

    fn step_failed(&mut self, err: StepError, _span: Span) -> Result<(), OracleError> {
        Err(OracleError::Step(err))
    }
}

impl Tape {
    pub fn compile(program: &Program) -> Result<Self, OracleError> {
        let mut b = TapeBuilder::default();
        Walker::new(&mut b).run(&program.body)?;
        for r in &program.returns {
            let name = resolve(r, &b).map_err(OracleError::Step)?;
            b.tape.outputs.push(b.slot_of(&name)?);
            b.tape.output_names.push(name);
        }
        Ok(b.tape)
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    fn simulate(&self, rng: &mut ChaCha8Rng, buf: &mut [f64]) {
        for op in &self.ops {
            match *op {
                Op::Draw { slot, mean, sd } => {
                    let z: f64 = StandardNormal.sample(rng);
                    buf[slot] = mean + sd * z;
                }
                Op::Linear {
                    slot,
                    coeff,
                    dep,
                    offset,
                    sd,
                } => {
                    let z: f64 = StandardNormal.sample(rng);
                    buf[slot] = coeff * buf[dep] + offset + sd * z;
                }
                Op::Affine { slot, src, scale, shift } => buf[slot] = scale * buf[src] + shift,
                Op::Sum { slot, a, b } => buf[slot] = buf[a] + buf[b],
            }
        }
    }
}

/// Streaming mean and co-moment accumulator.
#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; k],
            m2: vec![0.0; k * k],
        }
    }

    fn push(&mut self, x: &[f64], delta: &mut [f64]) {
        let k = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        for i in 0..k {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..k {
            for j in 0..k {
                self.m2[i * k + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn merge(mut self, other: Moments) -> Moments {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let k = self.mean.len();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..k).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..k {
            for j in 0..k {
                self.m2[i * k + j] += other.m2[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..k {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += other.n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Absolute(f64),
    /// Multiple of each observed variable's forward standard deviation.
    Relative(f64),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Relative(0.05)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcEstimate {
    pub names: Vec<String>,
    /// Moments of the accepted draws.
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// Moments after local-linear regression of the outputs on the
    /// discrepancies `s - s_obs` of the accepted draws. For linear-Gaussian
    /// models this removes the bias of a finite acceptance window.
    pub adjusted_mean: Vec<f64>,
    pub adjusted_cov: Vec<Vec<f64>>,
    pub accepted: u64,
    pub samples: u64,
    /// Half-width of the acceptance window of each observation.
    pub bandwidths: Vec<f64>,
}

impl AbcEstimate {
    pub fn mean_standard_error(&self, i: usize) -> f64 {
        (self.cov[i][i] / self.accepted as f64).sqrt()
    }

    /// Standard error of the sample variance under normality.
    pub fn variance_standard_error(&self, i: usize) -> f64 {
        self.cov[i][i] * (2.0 / (self.accepted.saturating_sub(1).max(1)) as f64).sqrt()
    }

    fn residual_dof(&self) -> f64 {
        (self.accepted as f64 - 1.0 - self.bandwidths.len() as f64).max(1.0)
    }

    pub fn adjusted_mean_standard_error(&self, i: usize) -> f64 {
        (self.adjusted_cov[i][i].max(0.0) / self.residual_dof()).sqrt()
    }

    pub fn adjusted_variance_standard_error(&self, i: usize) -> f64 {
        self.adjusted_cov[i][i].max(0.0) * (2.0 / self.residual_dof()).sqrt()
    }
}

fn run_chunks(
    tape: &Tape,
    samples: usize,
    seed: u64,
    stream_base: u64,
    windows: &[f64],
    k: usize,
    select: impl Fn(&[f64], &mut [f64]) + Sync,
) -> Moments {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + c as u64);
            let mut buf = vec![0.0; tape.slots];
            let mut x = vec![0.0; k];
            let mut delta = vec![0.0; k];
            let mut acc = Moments::new(k);
            let count = CHUNK.min(samples - c * CHUNK);
            for _ in 0..count {
                tape.simulate(&mut rng, &mut buf);
                let accept = tape
                    .observations
                    .iter()
                    .zip(windows)
                    .all(|(&(slot, value), &h)| (buf[slot] - value).abs() <= h);
                if accept {
                    select(&buf, &mut x);
                    acc.push(&x, &mut delta);
                }
            }
            acc
        })
        .reduce(|| Moments::new(k), Moments::merge)
}

/// Approximate posterior moments of the program's return values.
pub fn abc_posterior(program: &Program, samples: usize, bandwidth: Bandwidth, seed: u64) -> Result<AbcEstimate, OracleError> {
    let tape = Tape::compile(program)?;
    abc_on_tape(&tape, samples, bandwidth, seed)
}

pub fn abc_on_tape(tape: &Tape, samples: usize, bandwidth: Bandwidth, seed: u64) -> Result<AbcEstimate, OracleError> {
    let obs = tape.observations.len();
    let windows: Vec<f64> = match bandwidth {
        Bandwidth::Absolute(h) => vec![h; obs],
        Bandwidth::Relative(f) => {
            // pilot run on a separate stream, no rejection
            let slots: Vec<usize> = tape.observations.iter().map(|o| o.0).collect();
            let pilot = run_chunks(tape, PILOT_SAMPLES, seed, 1 << 40, &[], obs, |buf, x| {
                for (xi, &s) in x.iter_mut().zip(&slots) {
                    *xi = buf[s];
                }
            });
            let sds: Vec<f64> = (0..obs)
                .map(|i| (pilot.m2[i * obs + i] / (pilot.n - 1) as f64).sqrt())
                .collect();
            sds.iter().map(|sd| f * sd).collect()
        }
    };
    let k = tape.outputs.len();
    let width = k + obs;
    let acc = run_chunks(tape, samples, seed, 0, &windows, width, |buf, x| {
        for (xi, &s) in x.iter_mut().zip(&tape.outputs) {
            *xi = buf[s];
        }
        for (xi, &(s, value)) in x[k..].iter_mut().zip(&tape.observations) {
            *xi = buf[s] - value;
        }
    });
    if acc.n < 2 {
        return Err(OracleError::NoAcceptance {
            samples,
            accepted: acc.n,
        });
    }
    let denom = (acc.n - 1) as f64;
    let full = DMatrix::from_fn(width, width, |i, j| acc.m2[i * width + j] / denom);
    let means = DVector::from_column_slice(&acc.mean);
    let c_tt = full.view((0, 0), (k, k)).into_owned();
    let (adj_mean, adj_cov) = if obs == 0 {
        (means.rows(0, k).into_owned(), c_tt.clone())
    } else {
        let c_ts = full.view((0, k), (k, obs)).into_owned();
        let c_ss = full.view((k, k), (obs, obs)).into_owned();
        let tol = 1e-12 * (1.0 + c_ss.amax());
        let c_ss_inv = c_ss
            .pseudo_inverse(tol)
            .expect("pseudo-inverse of a symmetric matrix");
        let beta = &c_ts * c_ss_inv;
        let mean = means.rows(0, k) - &beta * means.rows(k, obs);
        let cov = &c_tt - &beta * c_ts.transpose();
        (mean, cov)
    };
    let rows = |m: &DMatrix<f64>| (0..k).map(|i| (0..k).map(|j| m[(i, j)]).collect()).collect();
    Ok(AbcEstimate {
        names: tape.output_names.clone(),
        mean: acc.mean[..k].to_vec(),
        cov: rows(&c_tt),
        adjusted_mean: adj_mean.iter().copied().collect(),
        adjusted_cov: rows(&adj_cov),
        accepted: acc.n,
        samples: samples as u64,
        bandwidths: windows,
    })
}
