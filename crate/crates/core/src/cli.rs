//! Command-line interface: `gaussi run|check|casestudy|bench`.
//!
//! Exit codes: 0 on success, 1 for parse or validation errors, 2 for
//! runtime and I/O errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{fit_exponent, rows_to_csv, run_bench, BenchKind};
use crate::casestudy::{generate, run_case, CaseStudyConfig, Dataset, DEFAULT_EPSILON};
use crate::interp::{execute, PosteriorResult};
use crate::lang::{parse, validate};
use crate::metrics::{density_curve, interval_probability, kl_divergence_mixed, kl_divergence_nats, mutual_information};
use crate::report::{fmt_g, DensityCurve, Format, IntervalQuery, KlEntry, MetricsBlock, MiEntry, PosteriorReport};

#[derive(Debug, Parser)]
#[command(name = "gaussi", version, about = "Exact inference for linear-Gaussian programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program and report the posterior of its return values.
    Run(RunArgs),
    /// Parse and validate programs without running them.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Released-statistics scenario on the income dataset.
    Casestudy(CaseArgs),
    /// Time the sum benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub output: Output,
    /// Density curve, `VAR:LO:HI:N`. Repeatable.
    #[arg(long, value_parser = parse_density)]
    pub density: Vec<DensitySpec>,
    /// Interval probability, `VAR:LO:HI`. Repeatable.
    #[arg(long, value_parser = parse_prob)]
    pub prob: Vec<ProbSpec>,
    /// KL between prior and posterior of each returned variable and mutual
    /// information between returned pairs.
    #[arg(long)]
    pub metrics: bool,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,
    /// Release the averages through the Gaussian mechanism.
    #[arg(long)]
    pub dp: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Victim index within the first group.
    #[arg(long, default_value_t = 0)]
    pub victim: usize,
    /// Income CSV; the bundled table by default.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Print the generated program and exit.
    #[arg(long)]
    pub print_program: bool,
    /// Run every case with and without DP and print the leakage table.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "sum")]
    pub kind: BenchKind,
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Run repetitions concurrently (throughput rather than latency).
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub var: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbSpec {
    pub var: String,
    pub lo: f64,
    pub hi: f64,
}

fn parse_bound(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| format!("invalid number `{s}`")),
    }
}

fn parse_density(s: &str) -> Result<DensitySpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [var, lo, hi, n] = parts[..] else {
        return Err("expected VAR:LO:HI:N".into());
    };
    Ok(DensitySpec {
        var: var.to_string(),
        lo: parse_bound(lo)?,
        hi: parse_bound(hi)?,
        points: n.parse().map_err(|_| format!("invalid point count `{n}`"))?,
    })
}

fn parse_prob(s: &str) -> Result<ProbSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [var, lo, hi] = parts[..] else {
        return Err("expected VAR:LO:HI".into());
    };
    Ok(ProbSpec {
        var: var.to_string(),
        lo: parse_bound(lo)?,
        hi: parse_bound(hi)?,
    })
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

fn read_source(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::runtime(e.to_string()))
        }
    }
}

fn load_program(path: &Path) -> Result<crate::lang::Program, Failure> {
    let src = read_source(path)?;
    let program = parse(&src).map_err(|e| Failure::usage(format!("{}:{e}", path.display())))?;
    let diags = validate(&program);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        return Err(Failure::usage(lines.join("\n")));
    }
    Ok(program)
}

/// Builds the report for `gaussi run`.
pub fn run_report(args: &RunArgs) -> Result<PosteriorReport, Failure> {
    let program = load_program(&args.file)?;
    let exec = execute(&program).map_err(|e| Failure::runtime(format!("{}:{e}", args.file.display())))?;
    let state = &exec.state.gaussian;
    let (mean, cov) = state
        .marginal(&exec.returns)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let result = PosteriorResult {
        names: exec.returns.clone(),
        mean,
        cov,
        statement_count: exec.statement_count,
        elapsed: exec.elapsed,
    };
    let mut report = PosteriorReport::from_result(Some(args.file.display().to_string()), &result);

    if args.metrics {
        let prior = execute(&program.without_conditions())
            .map_err(|e| Failure::runtime(format!("{}: prior: {e}", args.file.display())))?;
        let prior = &prior.state.gaussian;
        let mut block = MetricsBlock::default();
        for name in &exec.returns {
            let (pm, pv) = (state.mean_of(name), state.variance_of(name));
            let (qm, qv) = (prior.mean_of(name), prior.variance_of(name));
            let (Ok(pm), Ok(pv), Ok(qm), Ok(qv)) = (pm, pv, qm, qv) else {
                continue;
            };
            match (kl_divergence_mixed(pm, pv, qm, qv), kl_divergence_nats(pm, pv, qm, qv)) {
                (Ok(mixed), Ok(nats)) => block.kl.push(KlEntry {
                    name: name.clone(),
                    prior_mean: qm,
                    prior_variance: qv,
                    posterior_mean: pm,
                    posterior_variance: pv,
                    kl_mixed: mixed,
                    kl_nats: nats,
                }),
                (Err(e), _) | (_, Err(e)) => eprintln!("warning: no KL for `{name}`: {e}"),
            }
        }
        for (i, a) in exec.returns.iter().enumerate() {
            for b in &exec.returns[i + 1..] {
                let (bits, note) = match mutual_information(state, a, b) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                block.mutual_information.push(MiEntry {
                    a: a.clone(),
                    b: b.clone(),
                    bits,
                    note,
                });
            }
        }
        report.metrics = Some(block);
    }
    for q in &args.prob {
        let p = interval_probability(state, &q.var, q.lo, q.hi).map_err(|e| Failure::runtime(format!("--prob {}: {e}", q.var)))?;
        report.intervals.push(IntervalQuery {
            name: q.var.clone(),
            lo: q.lo,
            hi: q.hi,
            probability: p,
        });
    }
    for d in &args.density {
        let points = density_curve(state, &d.var, d.lo, d.hi, d.points)
            .map_err(|e| Failure::runtime(format!("--density {}: {e}", d.var)))?;
        report.densities.push(DensityCurve {
            name: d.var.clone(),
            points,
        });
    }
    Ok(report)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let report = run_report(&args)?;
    emit(&report.render(args.output.format.into()), args.output.out.as_deref())
}

fn cmd_check(files: &[PathBuf]) -> Result<(), Failure> {
    let mut problems = Vec::new();
    for f in files {
        if let Err(e) = load_program(f) {
            if e.code != 1 {
                return Err(e);
            }
            problems.push(e.message);
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::usage(problems.join("\n")))
    }
}

fn cmd_casestudy(args: CaseArgs) -> Result<(), Failure> {
    let dataset = match &args.dataset {
        Some(p) => Dataset::load(p).map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))?,
        None => Dataset::bundled(),
    };
    let epsilon = args.dp.then_some(args.epsilon);
    let config = CaseStudyConfig {
        case: args.case,
        epsilon,
        victim: args.victim,
    };
    if args.print_program {
        let generated = generate(&dataset, &config).map_err(|e| Failure::runtime(e.to_string()))?;
        return emit(&generated.source, args.output.out.as_deref());
    }
    let format: Format = args.output.format.into();
    if args.all {
        let mut reports = Vec::new();
        for eps in [None, Some(args.epsilon)] {
            for case in 1..=3 {
                let cfg = CaseStudyConfig {
                    case,
                    epsilon: eps,
                    victim: args.victim,
                };
                let outcome = run_case(&dataset, &cfg).map_err(|e| Failure::runtime(e.to_string()))?;
                reports.push(outcome.to_report());
            }
        }
        let text = match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&reports).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::from("label,posterior_mean,posterior_variance,kl_mixed,kl_nats,mutual_information\n");
                for r in &reports {
                    let l = &r.leakage[0];
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        l.label,
                        fmt_g(r.mean[0]),
                        fmt_g(r.cov[0][0]),
                        fmt_g(l.kl_prior_posterior),
                        fmt_g(l.kl_nats),
                        l.mutual_information.map(fmt_g).unwrap_or_default()
                    ));
                }
                s
            }
            Format::Text => {
                let mut s = format!(
                    "{:<10} {:>20} {:>20} {:>20} {:>20} {:>20}\n",
                    "scenario", "posterior mean", "posterior var", "KL (mixed)", "KL (nats)", "MI (bits)"
                );
                for r in &reports {
                    let l = &r.leakage[0];
                    s.push_str(&format!(
                        "{:<10} {:>20} {:>20} {:>20} {:>20} {:>20}\n",
                        l.label,
                        fmt_g(r.mean[0]),
                        fmt_g(r.cov[0][0]),
                        fmt_g(l.kl_prior_posterior),
                        fmt_g(l.kl_nats),
                        l.mutual_information.map(fmt_g).unwrap_or_else(|| "unbounded".into())
                    ));
                }
                s
            }
        };
        return emit(&text, args.output.out.as_deref());
    }
    let outcome = run_case(&dataset, &config).map_err(|e| Failure::runtime(e.to_string()))?;
    let mut report = outcome.to_report();
    if format == Format::Text {
        let mut text = String::new();
        for r in &outcome.program.releases {
            text.push_str(&format!("release {}: average of {} = {}", r.label, r.size, fmt_g(r.observed)));
            if let (Some(dp), Some(v)) = (r.dp, r.noise_variance) {
                text.push_str(&format!(
                    " (epsilon {}, delta {}, sensitivity {}, noise variance {})",
                    fmt_g(dp.epsilon),
                    fmt_g(dp.delta),
                    fmt_g(dp.sensitivity),
                    fmt_g(v)
                ));
            }
            text.push('\n');
        }
        text.push_str(&report.to_text());
        return emit(&text, args.output.out.as_deref());
    }
    report.program = Some(format!("case {}{}", args.case, if args.dp { " dp" } else { "" }));
    emit(&report.render(format), args.output.out.as_deref())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    if args.sizes.iter().any(|&n| n == 0) {
        return Err(Failure::usage("sizes must be positive"));
    }
    let rows = run_bench(args.kind, &args.sizes, args.repetitions, args.parallel)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.mean_seconds)).collect();
    if let Some(k) = fit_exponent(&pts) {
        eprintln!("fitted cost exponent: {}", fmt_g_short(k));
    }
    emit(&rows_to_csv(&rows), args.out.as_deref())
}

fn fmt_g_short(v: f64) -> String {
    crate::report::fmt_g_digits(v, 4)
}

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check { files } => cmd_check(&files),
        Command::Casestudy(a) => cmd_casestudy(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap uses exit code 2 for usage errors; 2 is reserved for runtime failures here
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
