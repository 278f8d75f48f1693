//! Scalability benchmark: the sum of `n` independent standard normals,
//! optionally followed by a condition on the sum.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::interp::{run_program, RuntimeError};
use crate::lang::{parse, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BenchKind {
    Sum,
    SumCond,
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchKind::Sum => "sum",
            BenchKind::SumCond => "sum-cond",
        })
    }
}

impl FromStr for BenchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sum" => Ok(BenchKind::Sum),
            "sum-cond" => Ok(BenchKind::SumCond),
            other => Err(format!("unknown benchmark `{other}` (expected sum or sum-cond)")),
        }
    }
}

/// Source of the benchmark program over `n >= 1` variables.
pub fn benchmark_source(kind: BenchKind, n: usize) -> String {
    assert!(n >= 1, "benchmark needs at least one variable");
    let mut s = format!("for i in range({n}):\n    X[i] = Normal(0, 1)\n");
    match n {
        1 => s.push_str("O = X[0] + 0\n"),
        2 => s.push_str("O = X[0] + X[1]\n"),
        _ => {
            s.push_str("S[1] = X[0] + X[1]\n");
            s.push_str(&format!("for i in range({}):\n    S[i + 2] = S[i + 1] + X[i + 2]\n", n - 3));
            s.push_str(&format!("O = S[{}] + X[{}]\n", n - 2, n - 1));
        }
    }
    match kind {
        BenchKind::Sum => s.push_str("return O\n"),
        BenchKind::SumCond => s.push_str("condition(O, 1)\nreturn X[0]\n"),
    }
    s
}

pub fn benchmark_program(kind: BenchKind, n: usize) -> Program {
    parse(&benchmark_source(kind, n)).expect("benchmark source parses")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kind: BenchKind,
    pub n: usize,
    pub repetitions: usize,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
}

/// Times `run_program` on the benchmark for each size.
pub fn run_bench(kind: BenchKind, sizes: &[usize], repetitions: usize, parallel: bool) -> Result<Vec<BenchRow>, RuntimeError> {
    let repetitions = repetitions.max(1);
    sizes
        .iter()
        .map(|&n| {
            let program = benchmark_program(kind, n);
            let time_one = |_| -> Result<f64, RuntimeError> {
                let start = Instant::now();
                run_program(&program)?;
                Ok(start.elapsed().as_secs_f64())
            };
            let times: Vec<f64> = if parallel {
                (0..repetitions).into_par_iter().map(time_one).collect::<Result<_, _>>()?
            } else {
                (0..repetitions).map(time_one).collect::<Result<_, _>>()?
            };
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64
            } else {
                0.0
            };
            Ok(BenchRow {
                kind,
                n,
                repetitions,
                mean_seconds: mean,
                stddev_seconds: var.sqrt(),
            })
        })
        .collect()
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "n", "repetitions", "mean_seconds", "stddev_seconds"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.kind.to_string(),
            r.n.to_string(),
            r.repetitions.to_string(),
            crate::report::fmt_g(r.mean_seconds),
            crate::report::fmt_g(r.stddev_seconds),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn fit_exponent(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(n, t)| n == 0 || !(t > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::validate;

    #[test]
    fn sum_of_three() {
        let r = run_program(&benchmark_program(BenchKind::Sum, 3)).unwrap();
        assert_eq!(r.mean[0], 0.0);
        assert_eq!(r.cov[(0, 0)], 3.0);
    }

    #[test]
    fn small_sizes_are_valid() {
        for n in 1..6 {
            for kind in [BenchKind::Sum, BenchKind::SumCond] {
                let p = benchmark_program(kind, n);
                assert!(validate(&p).is_empty(), "{kind} {n}");
                let r = run_program(&p).unwrap();
                let expected = if kind == BenchKind::Sum { n as f64 } else { 1.0 - 1.0 / n as f64 };
                assert!((r.cov[(0, 0)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exponent_of_exact_power_law() {
        let pts: Vec<(usize, f64)> = [10, 100, 1000].iter().map(|&n| (n, 3e-9 * (n as f64).powi(2))).collect();
        assert!((fit_exponent(&pts).unwrap() - 2.0).abs() < 1e-12);
    }
}
