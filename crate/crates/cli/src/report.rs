//! Report documents and CSV emission.

use cocycle_lab::classify::{
    BunchingVerdict, DominationReport, Ellipticity, PhReport, SpectrumBunching, TrivialOrDominated,
    UniformBunching,
};
use cocycle_lab::flatten::{FlatteningCertificate, FlatteningResult};
use cocycle_lab::gallery::{ProductModelReport, RemarkReport};
use cocycle_lab::katok::KatokDiagnostics;
use cocycle_lab::spectral::LyapunovReport;
use cocycle_lab::Tolerances;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub artifact: String,
    pub artifact_version: String,
    pub schema_version: u32,
    pub scenario: Option<String>,
    pub seed: u64,
    pub horizon_override: Option<usize>,
    pub tol_scale: f64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    ThetaSeries {
        start: usize,
        /// `log Θ(start, n)` for `n = 1, 2, …`.
        log_theta: Vec<f64>,
        /// Least-squares slope of `log Θ(start, n)` against `n`.
        slope: f64,
    },
    Witness(BunchingVerdict),
    Ph(PhReport),
    Lyapunov(LyapunovReport),
    SpectrumBunching {
        exponents: Vec<f64>,
        verdict: SpectrumBunching,
    },
    UniformBunching(UniformBunching),
    Domination(DominationReport),
    TrivialOrDominated(TrivialOrDominated),
    Ellipticity(Ellipticity),
    Flatten {
        result: FlatteningResult,
        certificate: FlatteningCertificate,
    },
    Remark(RemarkReport),
    ProductModel(ProductModelReport),
    Katok(KatokDiagnostics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectationCheck {
    pub key: String,
    pub expected: bool,
    /// `None` when no analysis decided the key.
    pub actual: Option<bool>,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub provenance: Provenance,
    pub analyses: Vec<Outcome>,
    pub expectations: Vec<ExpectationCheck>,
    pub status: Status,
}

/// Least-squares slope of `y` against `x = 1, 2, …`.
pub fn slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let mx = (n + 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = (i + 1) as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// A named CSV table. Floats use Rust's shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Data series carried by an outcome, if any.
pub fn series(index: usize, outcome: &Outcome) -> Option<Table> {
    match outcome {
        Outcome::ThetaSeries { log_theta, .. } => Some(Table {
            name: format!("theta_series_{index}.csv"),
            header: vec!["n".into(), "log_theta".into()],
            rows: log_theta
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
                .collect(),
        }),
        Outcome::Lyapunov(r) => Some(Table {
            name: format!("lyapunov_{index}.csv"),
            header: vec!["i".into(), "exponent".into(), "partial_sum".into()],
            rows: r
                .exponents
                .iter()
                .zip(&r.partial_sums)
                .enumerate()
                .map(|(i, (e, p))| vec![(i + 1).to_string(), e.to_string(), p.to_string()])
                .collect(),
        }),
        Outcome::Witness(v) => v.witness.as_ref().map(|w| Table {
            name: format!("witness_{index}.csv"),
            header: vec!["i_k".into(), "i_k_next".into(), "log_theta".into()],
            rows: w
                .indices
                .windows(2)
                .zip(&w.window_log_theta)
                .map(|(p, t)| vec![p[0].to_string(), p[1].to_string(), t.to_string()])
                .collect(),
        }),
        Outcome::Domination(d) => Some(Table {
            name: format!("domination_{index}.csv"),
            header: vec!["m".into(), "margin".into()],
            rows: d
                .margins
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
                .collect(),
        }),
        _ => None,
    }
}

fn flatten_value(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_value(&p, x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten_value(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// The report as `field,value` rows with dotted paths.
pub fn report_table(report: &Report) -> Table {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut rows = Vec::new();
    flatten_value("", &value, &mut rows);
    Table {
        name: "report.csv".into(),
        header: vec!["field".into(), "value".into()],
        rows: rows
            .into_iter()
            .map(|(k, v)| vec![quote(&k), quote(&v)])
            .collect(),
    }
}
