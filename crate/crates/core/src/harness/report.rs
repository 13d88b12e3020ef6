use super::{Experiment, Format, LabConfig};
use crate::error::{LabError, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub dt: f64,
    pub tree_steps: usize,
}

/// Serialized run. Wall-clock time is left out so that identical
/// `(config, seed)` give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: String,
    pub config: ConfigEcho,
    /// Decimal string: JSON numbers cannot carry a u128 exactly.
    pub seed: String,
    pub experiments: Vec<Experiment>,
}

impl Report {
    pub fn new(config: &LabConfig, experiments: Vec<Experiment>) -> Self {
        Report {
            version: env!("CARGO_PKG_VERSION").into(),
            config: ConfigEcho {
                n: config.n,
                dt: config.dt,
                tree_steps: config.tree_steps,
            },
            seed: config.seed.to_string(),
            experiments,
        }
    }
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Flattened `experiment,metric,value` rows.
pub fn report_csv(report: &Report) -> String {
    let mut out = String::from("experiment,metric,value\n");
    let mut row = |e: &str, m: &str, v: &str| {
        let _ = writeln!(out, "{},{},{}", csv_field(e), csv_field(m), csv_field(v));
    };
    row("", "version", &report.version);
    row("", "seed", &report.seed);
    row("", "config.n", &report.config.n.to_string());
    row("", "config.dt", &report.config.dt.to_string());
    row(
        "",
        "config.tree_steps",
        &report.config.tree_steps.to_string(),
    );
    for e in &report.experiments {
        let id = e.id.as_str();
        row(id, "anchor", &e.anchor);
        row(id, "verdict", e.verdict.as_str());
        for (k, v) in &e.parameters {
            row(id, &format!("param.{k}"), v);
        }
        for c in &e.checks {
            row(id, &format!("check.{}.value", c.name), &c.value.to_string());
            row(
                id,
                &format!("check.{}.bound", c.name),
                &format!("{} {}", c.relation.symbol(), c.bound),
            );
            row(id, &format!("check.{}.pass", c.name), &c.pass.to_string());
        }
        for (k, v) in &e.values {
            row(id, k, &v.to_string());
        }
        for (k, m) in &e.estimates {
            row(id, &format!("{k}.mean"), &m.mean.to_string());
            row(id, &format!("{k}.stderr"), &m.stderr.to_string());
            row(id, &format!("{k}.n"), &m.n.to_string());
        }
        for (k, r) in &e.ks {
            row(id, &format!("{k}.ks_statistic"), &r.statistic.to_string());
            row(id, &format!("{k}.ks_p_value"), &r.p_value.to_string());
            row(id, &format!("{k}.ks_n"), &r.n.to_string());
        }
        for (i, n) in e.notes.iter().enumerate() {
            row(id, &format!("note.{i}"), n);
        }
    }
    out
}

/// Writes the report in `format` to `path`.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Json => report_json(report),
        Format::Csv => report_csv(report),
    };
    std::fs::write(path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

pub fn raw_samples_csv(rows: &[(u64, String, f64)]) -> String {
    let mut out = String::from("path_id,functional,value\n");
    for (id, k, v) in rows {
        let _ = writeln!(out, "{id},{k},{v}");
    }
    out
}
