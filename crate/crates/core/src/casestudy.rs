//! Released-statistics scenario: an attacker learns group income averages
//! and tries to infer one individual's income.
//!
//! The dataset is a CSV with header
//! `age_group,gender,income,prior_mean,prior_variance`. Rows keep their file
//! order within each (age group, gender) group; the victim is an index into
//! the first group of males.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::interp::{execute, run_program, PosteriorResult, RuntimeError};
use crate::lang::{parse, validate, Diagnostic, ParseError, Program};
use crate::metrics::{kl_divergence_mixed, kl_divergence_nats, mutual_information, DpParameters, LeakageReport, MetricError};
use crate::report::{KlEntry, MetricsBlock, PosteriorReport};

/// The bundled income table.
pub const BUNDLED_DATASET: &str = include_str!("../data/incomes.csv");

pub const DEFAULT_EPSILON: f64 = 0.9;

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("dataset: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset: {0}")]
    Data(String),
    #[error("generated program does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("generated program is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Record {
    pub age_group: String,
    pub gender: String,
    pub income: f64,
    pub prior_mean: f64,
    pub prior_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_DATASET.as_bytes()).expect("bundled dataset is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CaseStudyError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CaseStudyError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let expected = ["age_group", "gender", "income", "prior_mean", "prior_variance"];
        let headers = r.headers()?.clone();
        if headers.iter().ne(expected) {
            return Err(CaseStudyError::Data(format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = r.deserialize().collect::<Result<Vec<Record>, _>>()?;
        for (i, rec) in records.iter().enumerate() {
            if !(rec.prior_variance > 0.0) || !rec.income.is_finite() || !rec.prior_mean.is_finite() {
                return Err(CaseStudyError::Data(format!("row {}: invalid numbers", i + 2)));
            }
            if rec.age_group.is_empty() || rec.gender.is_empty() {
                return Err(CaseStudyError::Data(format!("row {}: empty group label", i + 2)));
            }
        }
        if records.is_empty() {
            return Err(CaseStudyError::Data("no rows".into()));
        }
        Ok(Self { records })
    }

    fn age_groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.age_group.as_str()) {
                out.push(&r.age_group);
            }
        }
        out
    }

    pub fn group(&self, age_group: &str, gender: &str) -> Vec<&Record> {
        self.records
            .iter()
            .filter(|r| r.age_group == age_group && r.gender == gender)
            .collect()
    }
}

fn identifier(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn group_var(gender: &str, age_group: &str) -> String {
    format!("{}_{}", identifier(gender), identifier(age_group))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseStudyConfig {
    /// 1: average of the victim's group; 2: also the whole age group;
    /// 3: also all individuals of the victim's gender.
    pub case: u8,
    /// Privacy budget of the Gaussian mechanism; `None` releases exact
    /// averages.
    pub epsilon: Option<f64>,
    /// Index of the victim within its group.
    pub victim: usize,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            case: 1,
            epsilon: None,
            victim: 0,
        }
    }
}

/// One released statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub label: String,
    /// Program variable the observation is conditioned on.
    pub variable: String,
    pub size: usize,
    pub observed: f64,
    pub dp: Option<DpParameters>,
    pub noise_variance: Option<f64>,
}

/// Generated program for one scenario.
#[derive(Debug, Clone)]
pub struct CaseProgram {
    pub source: String,
    pub victim: String,
    pub releases: Vec<Release>,
}

struct GroupSpec<'a> {
    var: String,
    members: Vec<&'a Record>,
}

/// Sensitivity and failure probability of an average over `incomes`:
/// `(max - min) / n` and `1 / n^2`.
pub fn average_dp_parameters(incomes: &[f64], epsilon: f64) -> Result<DpParameters, MetricError> {
    let n = incomes.len() as f64;
    let max = incomes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = incomes.iter().copied().fold(f64::INFINITY, f64::min);
    DpParameters::new(epsilon, 1.0 / (n * n), (max - min) / n)
}

pub fn generate(dataset: &Dataset, config: &CaseStudyConfig) -> Result<CaseProgram, CaseStudyError> {
    if !(1..=3).contains(&config.case) {
        return Err(CaseStudyError::Data(format!("case must be 1, 2 or 3, got {}", config.case)));
    }
    let first = &dataset.records[0];
    let (age, gender) = (first.age_group.clone(), first.gender.clone());
    let other_gender = dataset
        .records
        .iter()
        .find(|r| r.gender != gender)
        .map(|r| r.gender.clone());

    let victim_group = dataset.group(&age, &gender);
    if config.victim >= victim_group.len() {
        return Err(CaseStudyError::Data(format!(
            "victim index {} out of range for a group of {}",
            config.victim,
            victim_group.len()
        )));
    }

    let mut groups = vec![GroupSpec {
        var: group_var(&gender, &age),
        members: victim_group,
    }];
    if config.case >= 2 {
        let other = other_gender
            .as_deref()
            .ok_or_else(|| CaseStudyError::Data("case 2 needs a second gender".into()))?;
        groups.push(GroupSpec {
            var: group_var(other, &age),
            members: dataset.group(&age, other),
        });
    }
    if config.case >= 3 {
        for a in dataset.age_groups().into_iter().filter(|a| *a != age) {
            groups.push(GroupSpec {
                var: group_var(&gender, a),
                members: dataset.group(a, &gender),
            });
        }
    }
    if let Some(g) = groups.iter().find(|g| g.members.is_empty()) {
        return Err(CaseStudyError::Data(format!("group `{}` has no rows", g.var)));
    }

    let mut src = String::new();
    for g in &groups {
        let priors: Vec<String> = g
            .members
            .iter()
            .map(|r| format!("Normal({}, {})", r.prior_mean, r.prior_variance))
            .collect();
        src.push_str(&format!("{} = [{}]\n", g.var, priors.join(", ")));
    }
    for g in &groups {
        let n = g.members.len();
        src.push_str(&format!("{v}_sum[0] = {v}[0] + 0\n", v = g.var));
        if n > 1 {
            src.push_str(&format!(
                "for i in range({}):\n    {v}_sum[i + 1] = {v}_sum[i] + {v}[i + 1]\n",
                n - 1,
                v = g.var
            ));
        }
        src.push_str(&format!("{v}_total = {v}_sum[{}]\n", n - 1, v = g.var));
    }

    // (label, program name, groups summed)
    let mut queries: Vec<(String, String, Vec<usize>)> = vec![(
        format!("{gender} {age}"),
        groups[0].var.clone(),
        vec![0],
    )];
    if config.case >= 2 {
        queries.push((format!("all {age}"), format!("all_{}", identifier(&age)), vec![0, 1]));
    }
    if config.case >= 3 {
        let mut members = vec![0];
        members.extend(2..groups.len());
        queries.push((format!("all {gender}"), format!("{}_all", identifier(&gender)), members));
    }

    let mut releases = Vec::new();
    for (label, name, members) in queries {
        if members.len() > 1 {
            let mut acc = format!("{}_total", groups[members[0]].var);
            for (k, &m) in members.iter().enumerate().skip(1) {
                let next = if k + 1 == members.len() {
                    format!("{name}_total")
                } else {
                    format!("{name}_partial_{k}")
                };
                src.push_str(&format!("{next} = {acc} + {}_total\n", groups[m].var));
                acc = next;
            }
        }
        let incomes: Vec<f64> = members
            .iter()
            .flat_map(|&m| groups[m].members.iter().map(|r| r.income))
            .collect();
        let size = incomes.len();
        let observed = incomes.iter().sum::<f64>() / size as f64;
        src.push_str(&format!("{name}_average = {name}_total / {size}\n"));
        let (variable, dp, noise_variance) = match config.epsilon {
            None => (format!("{name}_average"), None, None),
            Some(eps) => {
                let params = average_dp_parameters(&incomes, eps)?;
                let var = params.noise_variance()?;
                src.push_str(&format!("{name}_noise = Normal(0, {var})\n"));
                src.push_str(&format!("{name}_average_dp = {name}_average + {name}_noise\n"));
                (format!("{name}_average_dp"), Some(params), Some(var))
            }
        };
        releases.push(Release {
            label,
            variable,
            size,
            observed,
            dp,
            noise_variance,
        });
    }
    for r in &releases {
        src.push_str(&format!("condition(\"{}\", {})\n", r.variable, r.observed));
    }
    let victim = format!("{}_{}", groups[0].var, config.victim);
    src.push_str(&format!("return {}[{}]\n", groups[0].var, config.victim));
    Ok(CaseProgram {
        source: src,
        victim,
        releases,
    })
}

#[derive(Debug, Clone)]
pub struct CaseStudyOutcome {
    pub config: CaseStudyConfig,
    pub program: CaseProgram,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub posterior: PosteriorResult,
    pub leakage: LeakageReport,
}

impl CaseStudyOutcome {
    pub fn posterior_mean(&self) -> f64 {
        self.posterior.mean[0]
    }

    pub fn posterior_variance(&self) -> f64 {
        self.posterior.cov[(0, 0)]
    }

    pub fn to_report(&self) -> PosteriorReport {
        let mut report = PosteriorReport::from_result(Some(format!("case {}", self.config.case)), &self.posterior);
        report.metrics = Some(MetricsBlock {
            kl: vec![KlEntry {
                name: self.program.victim.clone(),
                prior_mean: self.prior_mean,
                prior_variance: self.prior_variance,
                posterior_mean: self.posterior_mean(),
                posterior_variance: self.posterior_variance(),
                kl_mixed: self.leakage.kl_prior_posterior,
                kl_nats: self.leakage.kl_nats,
            }],
            mutual_information: Vec::new(),
        });
        report.leakage.push(self.leakage.clone());
        report
    }
}

fn checked_program(source: &str) -> Result<Program, CaseStudyError> {
    let program = parse(source)?;
    let diags = validate(&program);
    if !diags.is_empty() {
        return Err(CaseStudyError::Invalid(diags));
    }
    Ok(program)
}

/// Runs one scenario. Mutual information is taken between the victim and
/// the last released statistic under the prior joint distribution.
pub fn run_case(dataset: &Dataset, config: &CaseStudyConfig) -> Result<CaseStudyOutcome, CaseStudyError> {
    let generated = generate(dataset, config)?;
    let program = checked_program(&generated.source)?;
    let posterior = run_program(&program)?;
    let prior = execute(&program.without_conditions())?.state.gaussian;

    let victim = &generated.victim;
    let prior_mean = prior.mean_of(victim).map_err(MetricError::from)?;
    let prior_variance = prior.variance_of(victim).map_err(MetricError::from)?;
    let (post_mean, post_var) = (posterior.mean[0], posterior.cov[(0, 0)]);
    let output = &generated.releases.last().expect("at least one release").variable;
    let (mutual, note) = match mutual_information(&prior, victim, output) {
        Ok(v) => (Some(v), None),
        Err(e @ MetricError::SingularMarginal { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let label = format!(
        "case {}{}",
        config.case,
        if config.epsilon.is_some() { " dp" } else { "" }
    );
    let leakage = LeakageReport {
        label,
        kl_prior_posterior: kl_divergence_mixed(post_mean, post_var, prior_mean, prior_variance)?,
        kl_nats: kl_divergence_nats(post_mean, post_var, prior_mean, prior_variance)?,
        mutual_information: mutual,
        note,
    };
    Ok(CaseStudyOutcome {
        config: *config,
        program: generated,
        prior_mean,
        prior_variance,
        posterior,
        leakage,
    })
}
