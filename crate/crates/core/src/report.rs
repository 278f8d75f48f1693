//! Posterior reports in text, JSON and long-form CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::interp::PosteriorResult;
use crate::metrics::LeakageReport;

/// Formats like C's `%.12g`.
pub fn fmt_g(v: f64) -> String {
    fmt_g_digits(v, 12)
}

pub fn fmt_g_digits(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Non-finite floats as strings, since JSON numbers cannot hold them.
mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid number `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEntry {
    pub name: String,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub posterior_mean: f64,
    pub posterior_variance: f64,
    pub kl_mixed: f64,
    pub kl_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEntry {
    pub a: String,
    pub b: String,
    /// Bits; `None` when the pair is perfectly correlated.
    pub bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalQuery {
    pub name: String,
    #[serde(with = "extended_float")]
    pub lo: f64,
    #[serde(with = "extended_float")]
    pub hi: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub kl: Vec<KlEntry>,
    pub mutual_information: Vec<MiEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub statements: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Row-major.
    pub cov: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<IntervalQuery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<DensityCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leakage: Vec<LeakageReport>,
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl PosteriorReport {
    pub fn from_result(program: Option<String>, r: &PosteriorResult) -> Self {
        let n = r.names.len();
        Self {
            program,
            names: r.names.clone(),
            mean: r.mean.iter().copied().collect(),
            cov: (0..n).map(|i| (0..n).map(|j| r.cov[(i, j)]).collect()).collect(),
            metrics: None,
            intervals: Vec::new(),
            densities: Vec::new(),
            leakage: Vec::new(),
            timing: Timing {
                statements: r.statement_count,
                seconds: r.elapsed.as_secs_f64(),
            },
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.program {
            writeln!(out, "program: {p}").unwrap();
        }
        let width = self.names.iter().map(String::len).max().unwrap_or(0);
        writeln!(out, "mean:").unwrap();
        for (name, m) in self.names.iter().zip(&self.mean) {
            writeln!(out, "  {name:<width$}  {}", fmt_g(*m)).unwrap();
        }
        writeln!(out, "covariance:").unwrap();
        let cells: Vec<Vec<String>> = self
            .cov
            .iter()
            .map(|row| row.iter().map(|v| fmt_g(*v)).collect())
            .collect();
        let cell = cells.iter().flatten().map(String::len).max().unwrap_or(1).max(width);
        write!(out, "  {:<width$}", "").unwrap();
        for name in &self.names {
            write!(out, "  {name:>cell$}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&cells) {
            write!(out, "  {name:<width$}").unwrap();
            for c in row {
                write!(out, "  {c:>cell$}").unwrap();
            }
            out.push('\n');
        }
        if let Some(m) = &self.metrics {
            for k in &m.kl {
                writeln!(
                    out,
                    "kl {}: prior N({}, {}) posterior N({}, {}) mixed {} nats {}",
                    k.name,
                    fmt_g(k.prior_mean),
                    fmt_g(k.prior_variance),
                    fmt_g(k.posterior_mean),
                    fmt_g(k.posterior_variance),
                    fmt_g(k.kl_mixed),
                    fmt_g(k.kl_nats)
                )
                .unwrap();
            }
            for e in &m.mutual_information {
                match e.bits {
                    Some(b) => writeln!(out, "mi {} {}: {} bits", e.a, e.b, fmt_g(b)).unwrap(),
                    None => writeln!(
                        out,
                        "mi {} {}: unbounded ({})",
                        e.a,
                        e.b,
                        e.note.as_deref().unwrap_or("singular covariance")
                    )
                    .unwrap(),
                }
            }
        }
        for q in &self.intervals {
            writeln!(
                out,
                "P({} <= {} <= {}) = {}",
                fmt_g(q.lo),
                q.name,
                fmt_g(q.hi),
                fmt_g(q.probability)
            )
            .unwrap();
        }
        for d in &self.densities {
            writeln!(out, "density {} ({} points):", d.name, d.points.len()).unwrap();
            for (x, y) in &d.points {
                writeln!(out, "  {} {}", fmt_g(*x), fmt_g(*y)).unwrap();
            }
        }
        for l in &self.leakage {
            let mi = match l.mutual_information {
                Some(v) => fmt_g(v),
                None => "unbounded".into(),
            };
            writeln!(
                out,
                "leakage {}: kl {} kl_nats {} mi {}",
                l.label,
                fmt_g(l.kl_prior_posterior),
                fmt_g(l.kl_nats),
                mi
            )
            .unwrap();
            if let Some(n) = &l.note {
                writeln!(out, "  note: {n}").unwrap();
            }
        }
        writeln!(out, "statements: {}", self.timing.statements).unwrap();
        writeln!(out, "seconds: {}", fmt_g(self.timing.seconds)).unwrap();
        out
    }

    /// Long form, one value per row: `kind,name,index,x,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["kind", "name", "index", "x", "value"])
            .expect("in-memory write");
        let mut row = |kind: &str, name: &str, index: &str, x: Option<f64>, value: Option<f64>| {
            let x = x.map(fmt_g).unwrap_or_default();
            let value = value.map(fmt_g).unwrap_or_default();
            w.write_record([kind, name, index, x.as_str(), value.as_str()])
                .expect("in-memory write");
        };
        for (i, name) in self.names.iter().enumerate() {
            row("mean", name, "", None, Some(self.mean[i]));
        }
        for (i, a) in self.names.iter().enumerate() {
            for (j, b) in self.names.iter().enumerate() {
                row("cov", a, b, None, Some(self.cov[i][j]));
            }
        }
        if let Some(m) = &self.metrics {
            for k in &m.kl {
                row("kl_mixed", &k.name, "", None, Some(k.kl_mixed));
                row("kl_nats", &k.name, "", None, Some(k.kl_nats));
            }
            for e in &m.mutual_information {
                row("mi", &e.a, &e.b, None, e.bits);
            }
        }
        for q in &self.intervals {
            row("prob", &q.name, &format!("{}:{}", fmt_g(q.lo), fmt_g(q.hi)), None, Some(q.probability));
        }
        for d in &self.densities {
            for (i, (x, y)) in d.points.iter().enumerate() {
                row("density", &d.name, &i.to_string(), Some(*x), Some(*y));
            }
        }
        for l in &self.leakage {
            row("leakage_kl", &l.label, "", None, Some(l.kl_prior_posterior));
            row("leakage_kl_nats", &l.label, "", None, Some(l.kl_nats));
            row("leakage_mi", &l.label, "", None, l.mutual_information);
        }
        row("statements", "", "", None, Some(self.timing.statements as f64));
        row("seconds", "", "", None, Some(self.timing.seconds));
        drop(row);
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
