use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{delta_metric, SessionMetrics};
use crate::error::{bail, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::FscilError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(crate::FscilError::Parameter(format!("unknown report format {other}"))),
        }
    }
}

/// Hex SHA-256 of the compact JSON encoding (object keys sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("json values always serialise");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Provenance attached to every emitted table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub hyper: serde_json::Value,
}

/// One table row: per-session accuracies (fractions) averaged over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub accuracies: Vec<f64>,
    /// Sample standard deviation over runs; absent for a single run.
    pub std: Option<Vec<f64>>,
    /// Mean final-session Δ in percent, when defined.
    pub delta: Option<f64>,
}

impl MethodRow {
    /// Aggregates runs (each a session-ordered list of metrics).
    pub fn from_runs(method: impl Into<String>, runs: &[Vec<SessionMetrics>]) -> Result<Self> {
        let Some(first) = runs.first() else {
            bail!(Parameter, "no runs to aggregate");
        };
        let sessions = first.len();
        if sessions == 0 {
            bail!(Parameter, "empty metrics");
        }
        for run in runs {
            if run.len() != sessions || run.iter().enumerate().any(|(i, m)| m.session != i) {
                bail!(Parameter, "runs must cover sessions 0..{sessions} in order");
            }
        }
        let per_session: Vec<Vec<f64>> =
            (0..sessions).map(|t| runs.iter().map(|r| r[t].joint_accuracy).collect()).collect();
        let accuracies = per_session.iter().map(|v| mean(v)).collect();
        let std = (runs.len() > 1).then(|| per_session.iter().map(|v| sample_std(v)).collect());
        let deltas: Option<Vec<f64>> = runs
            .iter()
            .map(|r| r[sessions - 1].delta_inputs().map(|d| delta_metric(&d)))
            .collect();
        Ok(Self {
            method: method.into(),
            accuracies,
            std,
            delta: deltas.map(|d| mean(&d)),
        })
    }

    pub fn final_accuracy(&self) -> f64 {
        *self.accuracies.last().expect("rows are never empty")
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard deviation with the `n − 1` denominator.
pub(crate) fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn typographic(s: String) -> String {
    match s.strip_prefix('-') {
        Some(rest) => format!("\u{2212}{rest}"),
        None => s,
    }
}

/// A table of method rows with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Header of the first column, e.g. `Method` or `K`.
    pub label_column: String,
    pub rows: Vec<MethodRow>,
    /// Row the improvement column is measured against.
    pub reference: Option<usize>,
    pub metadata: RunMetadata,
}

impl Report {
    fn sessions(&self) -> Result<usize> {
        let Some(first) = self.rows.first() else {
            bail!(Parameter, "report has no rows");
        };
        let n = first.accuracies.len();
        if n == 0 || self.rows.iter().any(|r| r.accuracies.len() != n) {
            bail!(Parameter, "rows must share a non-empty session count");
        }
        if let Some(r) = self.reference {
            if r >= self.rows.len() {
                bail!(Parameter, "reference row {r} out of range");
            }
        }
        for row in &self.rows {
            if row.method.is_empty() || row.method.contains([',', '\n', '|', '"']) {
                bail!(Format, "method label {:?} cannot be tabulated", row.method);
            }
        }
        Ok(n)
    }

    /// Final-session accuracy of the reference row minus this row's, in points.
    fn improvement(&self, i: usize) -> Option<f64> {
        let r = self.reference?;
        (r != i).then(|| (self.rows[r].final_accuracy() - self.rows[i].final_accuracy()) * 100.0)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        let n = self.sessions()?;
        Ok(match format {
            ReportFormat::Csv => self.csv(n),
            ReportFormat::Markdown => self.markdown(n),
        })
    }

    fn csv(&self, n: usize) -> String {
        let mut out = String::new();
        if n == 1 {
            out.push_str("method,accuracy,std,delta\n");
            for row in &self.rows {
                let std = row.std.as_ref().map(|s| fixed2(s[0] * 100.0)).unwrap_or_default();
                let delta = row.delta.map(fixed2).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", row.method, fixed2(row.accuracies[0] * 100.0), std, delta));
            }
            return out;
        }
        out.push_str("method");
        for t in 0..n {
            out.push_str(&format!(",session_{t}"));
        }
        out.push_str(",improvement\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&row.method);
            for a in &row.accuracies {
                out.push(',');
                out.push_str(&fixed2(a * 100.0));
            }
            out.push(',');
            out.push_str(&self.improvement(i).map(fixed2).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    fn cell(row: &MethodRow, t: usize) -> String {
        let acc = fixed2(row.accuracies[t] * 100.0);
        match &row.std {
            Some(s) => format!("{acc} ± {}", fixed2(s[t] * 100.0)),
            None => acc,
        }
    }

    fn markdown(&self, n: usize) -> String {
        let meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serialises");
        let mut out = format!("---\n{meta}\n---\n\n");
        if n == 1 {
            out.push_str(&format!("| {} | Accuracy | Δ |\n|---|---:|---:|\n", self.label_column));
            for row in &self.rows {
                let delta = row.delta.map(|d| typographic(fixed2(d)) + "%").unwrap_or_else(|| "n/a".into());
                out.push_str(&format!("| {} | {} | {} |\n", row.method, Self::cell(row, 0), delta));
            }
            return out;
        }
        let with_improvement = self.reference.is_some();
        out.push_str(&format!("| {} / Session No. |", self.label_column));
        for t in 0..n {
            out.push_str(&format!(" {t} |"));
        }
        if with_improvement {
            out.push_str(" Improvement |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(n + usize::from(with_improvement)));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("| {} |", row.method));
            for t in 0..n {
                out.push_str(&format!(" {} |", Self::cell(row, t)));
            }
            if with_improvement {
                let imp = self.improvement(i).map(|v| typographic(fixed2(v))).unwrap_or_default();
                out.push_str(&format!(" {imp} |"));
            }
            out.push('\n');
        }
        out
    }

    /// Metadata plus full-precision rows, written next to a CSV table.
    pub fn metadata_json(&self) -> String {
        let doc = serde_json::json!({ "metadata": self.metadata, "label_column": self.label_column, "rows": self.rows, "reference": self.reference });
        serde_json::to_string_pretty(&doc).expect("metadata serialises") + "\n"
    }
}

/// A CSV row read back: the label and one optional value per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub method: String,
    pub values: Vec<Option<f64>>,
}

/// Reads a table produced by [`Report::render`] in CSV form.
pub fn parse_csv_report(text: &str) -> Result<(Vec<String>, Vec<ParsedRow>)> {
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        bail!(Format, "empty report");
    };
    let header: Vec<String> = header.split(',').map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("method") || header.len() < 2 {
        bail!(Format, "report header must start with method");
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            bail!(Format, "row {} has {} cells, expected {}", n + 1, cells.len(), header.len());
        }
        let values = cells[1..]
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|_| crate::FscilError::Format(format!("bad number {c:?} in row {}", n + 1)))
                }
            })
            .collect::<Result<_>>()?;
        rows.push(ParsedRow { method: cells[0].to_string(), values });
    }
    Ok((header, rows))
}
