use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionKind;
use crate::error::{Error, Result};

use super::config::ReportFormat;

pub const CSV_HEADER: &str =
    "kind,severity,seed,rpe_trans_m,rpe_rot_deg,drift_percent,flagged,wall_s";

/// One sweep cell. `kind == None` is the clean baseline (severity 0).
/// Metrics are `None` when the cell failed; `failure` then says why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(with = "kind_or_clean")]
    pub kind: Option<CorruptionKind>,
    pub severity: u8,
    pub seed: u64,
    /// Meters.
    pub rpe_trans: Option<f64>,
    /// Radians.
    pub rpe_rot: Option<f64>,
    pub drift_percent: Option<f64>,
    pub flagged_frames: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

mod kind_or_clean {
    use super::CorruptionKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        kind: &Option<CorruptionKind>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.serialize_str(kind.map_or("clean", |k| k.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<CorruptionKind>, D::Error> {
        let name = String::deserialize(d)?;
        if name == "clean" {
            Ok(None)
        } else {
            name.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

impl ReportRow {
    pub fn kind_name(&self) -> &'static str {
        self.kind.map_or("clean", |k| k.name())
    }

    pub fn is_baseline(&self) -> bool {
        self.kind.is_none()
    }

    /// Ordering key: baseline first, then kinds in canonical order.
    pub fn sort_key(&self) -> (u64, u8, u64) {
        (
            self.kind.map_or(0, |k| k.ordinal() + 1),
            self.severity,
            self.seed,
        )
    }

    /// Copy with the timing zeroed, for schedule-independent comparisons.
    pub fn without_timing(&self) -> ReportRow {
        ReportRow {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl ExperimentReport {
    pub fn baseline(&self, seed: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.is_baseline() && r.seed == seed)
    }

    pub fn row(&self, kind: CorruptionKind, severity: u8, seed: u64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.kind == Some(kind) && r.severity == severity && r.seed == seed)
    }

    pub fn rows_without_timing(&self) -> Vec<ReportRow> {
        self.rows.iter().map(ReportRow::without_timing).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.kind_name(),
                r.severity,
                r.seed,
                cell(r.rpe_trans),
                cell(r.rpe_rot.map(f64::to_degrees)),
                cell(r.drift_percent),
                r.flagged_frames,
                r.wall_time_s
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid report: {e}")))
    }

    /// One whitespace-separated table per kind: severity against the mean of
    /// each metric across seeds. Severity 0 is the clean baseline. Tables are
    /// separated by blank lines so gnuplot's `index` can address them.
    pub fn plot_data(&self) -> String {
        let mean = |rows: &[&ReportRow], f: fn(&ReportRow) -> Option<f64>| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            if vals.is_empty() {
                "nan".to_string()
            } else {
                format!("{}", vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let baseline: Vec<&ReportRow> = self.rows.iter().filter(|r| r.is_baseline()).collect();
        let mut by_kind: BTreeMap<CorruptionKind, BTreeMap<u8, Vec<&ReportRow>>> = BTreeMap::new();
        for r in &self.rows {
            if let Some(kind) = r.kind {
                by_kind
                    .entry(kind)
                    .or_default()
                    .entry(r.severity)
                    .or_default()
                    .push(r);
            }
        }
        let mut out = String::new();
        for (kind, severities) in &by_kind {
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# {kind}");
            out.push_str("severity rpe_trans_m rpe_rot_deg drift_percent\n");
            let levels = (!baseline.is_empty())
                .then_some((0u8, baseline.clone()))
                .into_iter()
                .chain(severities.iter().map(|(s, rows)| (*s, rows.clone())));
            for (severity, rows) in levels {
                let _ = writeln!(
                    out,
                    "{severity} {} {} {}",
                    mean(&rows, |r| r.rpe_trans),
                    mean(&rows, |r| r.rpe_rot.map(f64::to_degrees)),
                    mean(&rows, |r| r.drift_percent)
                );
            }
        }
        out
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(
    report: &ExperimentReport,
    path: impl AsRef<Path>,
    format: &ReportFormat,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    write_text(path.as_ref(), &text)
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentReport::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn emit_plot_data(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &report.plot_data())
}
