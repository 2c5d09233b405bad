//! Report documents and their text, CSV and JSON renderings.
//!
//! JSON is `{metadata, kind, ...payload}`; a risk report therefore carries
//! `rows[]` and `benchmarks{naive, n_bayes}` at the top level. CSV writes
//! the metadata and payload scalars as leading `# key=value` lines, then a
//! header row and one row per table entry.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cv::{CvResult, CvRow};
use crate::error::{invalid, Result};
use crate::sim::{Benchmarks, RiskReport, RiskRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: String,
}

impl Metadata {
    pub fn now(command: impl Into<String>, seed: Option<u64>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.into(),
            seed,
            timestamp,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRow {
    pub y: u64,
    pub lambda_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub index: usize,
    pub y: u64,
    pub lambda_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Risk {
        rows: Vec<RiskRow>,
        benchmarks: Benchmarks,
    },
    Rule {
        estimator: String,
        parameter: Option<f64>,
        rule: Vec<RuleRow>,
        observations: Vec<ObservationRow>,
    },
    Cv {
        estimator: String,
        p: f64,
        k: usize,
        h_star: f64,
        rows: Vec<CvRow>,
    },
    Scalar {
        name: String,
        value: f64,
    },
}

impl Payload {
    pub fn risk(report: RiskReport) -> Self {
        Payload::Risk {
            rows: report.rows,
            benchmarks: report.benchmarks,
        }
    }

    pub fn cv(estimator: impl Into<String>, result: CvResult) -> Self {
        Payload::Cv {
            estimator: estimator.into(),
            p: result.p,
            k: result.k,
            h_star: result.h_star,
            rows: result.rows,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Payload::Risk { .. } => "risk",
            Payload::Rule { .. } => "rule",
            Payload::Cv { .. } => "cv",
            Payload::Scalar { .. } => "scalar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metadata: Metadata,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RuleCsvRow {
    table: String,
    index: Option<usize>,
    y: u64,
    lambda_hat: f64,
}

#[derive(Serialize, Deserialize)]
struct ScalarCsvRow {
    name: String,
    value: f64,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportDocument {
    pub fn new(metadata: Metadata, payload: Payload) -> Self {
        Self { metadata, payload }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.to_text()),
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn csv_preamble(&self) -> Vec<(&'static str, String)> {
        let m = &self.metadata;
        let mut out = vec![
            ("kind", self.payload.kind().to_string()),
            ("command", m.command.clone()),
            ("seed", m.seed.map(|s| s.to_string()).unwrap_or_default()),
            ("timestamp", m.timestamp.to_string()),
            ("version", m.version.clone()),
        ];
        match &self.payload {
            Payload::Risk { benchmarks, .. } => {
                out.push(("naive", benchmarks.naive.to_string()));
                out.push(("n_bayes", benchmarks.n_bayes.to_string()));
            }
            Payload::Rule {
                estimator,
                parameter,
                ..
            } => {
                out.push(("estimator", estimator.clone()));
                out.push(("parameter", opt_f64(*parameter)));
            }
            Payload::Cv {
                estimator,
                p,
                k,
                h_star,
                ..
            } => {
                out.push(("estimator", estimator.clone()));
                out.push(("p", p.to_string()));
                out.push(("k", k.to_string()));
                out.push(("h_star", h_star.to_string()));
            }
            Payload::Scalar { .. } => {}
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut head = String::new();
        for (k, v) in self.csv_preamble() {
            if v.contains('\n') {
                return Err(invalid(format!("metadata field {k} contains a newline")));
            }
            writeln!(head, "# {k}={v}").expect("writing to a String");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.payload {
            Payload::Risk { rows, .. } => rows.iter().try_for_each(|r| w.serialize(r))?,
            Payload::Cv { rows, .. } => rows.iter().try_for_each(|r| w.serialize(r))?,
            Payload::Rule {
                rule, observations, ..
            } => {
                for r in rule {
                    w.serialize(RuleCsvRow {
                        table: "rule".into(),
                        index: None,
                        y: r.y,
                        lambda_hat: r.lambda_hat,
                    })?;
                }
                for o in observations {
                    w.serialize(RuleCsvRow {
                        table: "observation".into(),
                        index: Some(o.index),
                        y: o.y,
                        lambda_hat: o.lambda_hat,
                    })?;
                }
            }
            Payload::Scalar { name, value } => w.serialize(ScalarCsvRow {
                name: name.clone(),
                value: *value,
            })?,
        }
        let body = w.into_inner().map_err(|e| e.into_error())?;
        head.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        Ok(head)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta: BTreeMap<String, String> = BTreeMap::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
        }
        let field = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| invalid(format!("CSV report is missing '# {k}='")))
        };
        let num = |k: &str| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| invalid(format!("bad number for '{k}'")))
        };
        let seed = match field("seed")?.as_str() {
            "" => None,
            s => Some(s.parse().map_err(|_| invalid("bad seed"))?),
        };
        let metadata = Metadata {
            command: field("command")?,
            seed,
            timestamp: field("timestamp")?
                .parse()
                .map_err(|_| invalid("bad timestamp"))?,
            version: field("version")?,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let payload = match field("kind")?.as_str() {
            "risk" => Payload::Risk {
                rows: reader
                    .deserialize()
                    .collect::<std::result::Result<_, _>>()?,
                benchmarks: Benchmarks {
                    naive: num("naive")?,
                    n_bayes: num("n_bayes")?,
                },
            },
            "cv" => Payload::Cv {
                estimator: field("estimator")?,
                p: num("p")?,
                k: field("k")?.parse().map_err(|_| invalid("bad k"))?,
                h_star: num("h_star")?,
                rows: reader
                    .deserialize()
                    .collect::<std::result::Result<_, _>>()?,
            },
            "rule" => {
                let parameter = match field("parameter")?.as_str() {
                    "" => None,
                    s => Some(s.parse().map_err(|_| invalid("bad parameter"))?),
                };
                let mut rule = Vec::new();
                let mut observations = Vec::new();
                for row in reader.deserialize::<RuleCsvRow>() {
                    let row = row?;
                    match (row.table.as_str(), row.index) {
                        ("rule", None) => rule.push(RuleRow {
                            y: row.y,
                            lambda_hat: row.lambda_hat,
                        }),
                        ("observation", Some(index)) => observations.push(ObservationRow {
                            index,
                            y: row.y,
                            lambda_hat: row.lambda_hat,
                        }),
                        _ => return Err(invalid("malformed rule CSV row")),
                    }
                }
                Payload::Rule {
                    estimator: field("estimator")?,
                    parameter,
                    rule,
                    observations,
                }
            }
            "scalar" => {
                let row: ScalarCsvRow = reader
                    .deserialize()
                    .next()
                    .ok_or_else(|| invalid("scalar CSV report has no row"))??;
                Payload::Scalar {
                    name: row.name,
                    value: row.value,
                }
            }
            other => return Err(invalid(format!("unknown report kind '{other}'"))),
        };
        Ok(Self { metadata, payload })
    }

    /// Human-readable aligned tables. In risk and CV tables the smallest
    /// value of each estimator family is marked with `*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        match &self.payload {
            Payload::Risk { rows, benchmarks } => {
                let mut best: BTreeMap<&str, f64> = BTreeMap::new();
                for r in rows {
                    let e = best.entry(r.estimator.as_str()).or_insert(f64::INFINITY);
                    *e = e.min(r.mean_loss);
                }
                let _ = writeln!(
                    w,
                    "{:<18} {:>10} {:>14} {:>12}",
                    "estimator", "parameter", "mean_loss", "std_error"
                );
                for r in rows {
                    let family_has_many =
                        rows.iter().filter(|o| o.estimator == r.estimator).count() > 1;
                    let mark = if family_has_many && best[r.estimator.as_str()] == r.mean_loss {
                        " *"
                    } else {
                        ""
                    };
                    let param = r
                        .parameter
                        .map(|p| p.to_string())
                        .unwrap_or_else(|| "-".into());
                    let _ = writeln!(
                        w,
                        "{:<18} {:>10} {:>14.2} {:>12.2}{mark}",
                        r.estimator, param, r.mean_loss, r.std_error
                    );
                }
                let _ = writeln!(
                    w,
                    "\nbenchmarks: naive = {:.2}, nB(lambda) = {:.2}",
                    benchmarks.naive, benchmarks.n_bayes
                );
            }
            Payload::Rule {
                estimator,
                parameter,
                rule,
                observations,
            } => {
                let param = parameter.map(|p| format!(" [{p}]")).unwrap_or_default();
                let _ = writeln!(w, "rule: {estimator}{param}");
                let _ = writeln!(w, "{:>8} {:>14}", "y", "lambda_hat");
                for r in rule {
                    let _ = writeln!(w, "{:>8} {:>14.6}", r.y, r.lambda_hat);
                }
                let _ = writeln!(w, "\nobservations:");
                let _ = writeln!(w, "{:>8} {:>8} {:>14}", "index", "y", "lambda_hat");
                for o in observations {
                    let _ = writeln!(w, "{:>8} {:>8} {:>14.6}", o.index, o.y, o.lambda_hat);
                }
            }
            Payload::Cv {
                estimator,
                p,
                k,
                h_star,
                rows,
            } => {
                let _ = writeln!(w, "cross-validation: {estimator}, p = {p}, K = {k}");
                let _ = writeln!(w, "{:>10} {:>16} {:>16}", "h", "criterion", "scaled");
                for r in rows {
                    let mark = if r.h == *h_star { " *" } else { "" };
                    let _ = writeln!(
                        w,
                        "{:>10} {:>16.6} {:>16.6}{mark}",
                        r.h, r.criterion, r.scaled
                    );
                }
                let _ = writeln!(w, "\nselected h = {h_star}");
            }
            Payload::Scalar { name, value } => {
                let _ = writeln!(w, "{name} = {value}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Metadata {
        Metadata {
            command: "simulate --table 3 --seed=7".into(),
            seed: Some(7),
            timestamp: 1_700_000_000,
            version: "0.1.0".into(),
        }
    }

    fn risk_doc() -> ReportDocument {
        ReportDocument::new(
            meta(),
            Payload::Risk {
                rows: vec![
                    RiskRow {
                        estimator: "naive".into(),
                        parameter: None,
                        mean_loss: 1999.873,
                        std_error: 6.1,
                    },
                    RiskRow {
                        estimator: "adjusted".into(),
                        parameter: Some(0.2),
                        mean_loss: 121.0 / 3.0,
                        std_error: 0.1 + 0.2,
                    },
                    RiskRow {
                        estimator: "adjusted".into(),
                        parameter: Some(3.0),
                        mean_loss: 28.000000000000004,
                        std_error: 1e-7,
                    },
                ],
                benchmarks: Benchmarks {
                    naive: 2000.0,
                    n_bayes: 0.0,
                },
            },
        )
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::from_str(&risk_doc().to_json().unwrap()).unwrap();
        assert!(v["metadata"]["seed"].is_u64());
        assert!(v["rows"].is_array());
        assert_eq!(v["benchmarks"]["naive"], 2000.0);
        assert_eq!(v["kind"], "risk");
    }

    #[test]
    fn csv_layout() {
        let csv = risk_doc().to_csv().unwrap();
        assert!(csv.contains("estimator,parameter,mean_loss,std_error\n"));
        assert!(csv.contains("\nnaive,,1999.873,6.1\n"));
        assert!(csv.starts_with("# kind=risk\n"));
    }

    #[test]
    fn text_marks_family_minimum() {
        let text = risk_doc().to_text();
        let marked: Vec<&str> = text.lines().filter(|l| l.ends_with(" *")).collect();
        assert_eq!(marked.len(), 1);
        assert!(marked[0].starts_with("adjusted"));
        assert!(marked[0].contains(" 3 "));
    }

    #[test]
    fn unknown_format() {
        assert!("xml".parse::<Format>().is_err());
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    }
}
