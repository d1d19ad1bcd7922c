use std::fmt::Write as _;

use serde::Serialize;

use super::{DeviationReport, RunResult};

/// `step,participant,coordinate,value` with one-based agent and coordinate
/// numbers and exact decimal values.
pub fn trajectory_csv(run: &RunResult) -> String {
    let mut out = String::from("step,participant,coordinate,value\n");
    for k in 0..run.trajectory.len() {
        for (i, _) in run.dims.iter().enumerate() {
            for (l, v) in run.agent_state(k, i).iter().enumerate() {
                writeln!(out, "{k},{},{},{v}", i + 1, l + 1).unwrap();
            }
        }
    }
    out
}

pub fn deviation_csv(report: &DeviationReport) -> String {
    let mut out = String::from("step,squared_deviation,norm\n");
    for (k, (sq, norm)) in report.squared.iter().zip(&report.norms).enumerate() {
        writeln!(out, "{k},{sq},{norm}").unwrap();
    }
    out
}

/// Average and maximum time per iteration per agent, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub label: String,
    pub samples: usize,
    pub avg_seconds: f64,
    pub max_seconds: f64,
}

impl TimingRow {
    /// Summarises the per-agent iteration totals of `run`.
    pub fn from_run(label: impl Into<String>, run: &RunResult) -> Self {
        let totals: Vec<u64> = run.timings.iter().flatten().map(|p| p.total()).collect();
        let samples = totals.len();
        let sum: u64 = totals.iter().sum();
        let max = totals.iter().copied().max().unwrap_or(0);
        TimingRow {
            label: label.into(),
            samples,
            avg_seconds: if samples == 0 {
                0.0
            } else {
                sum as f64 / samples as f64 / 1e9
            },
            max_seconds: max as f64 / 1e9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimingSummary {
    pub header: String,
    pub rows: Vec<TimingRow>,
}

impl TimingSummary {
    pub fn new(header: impl Into<String>) -> Self {
        TimingSummary {
            header: header.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: TimingRow) {
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>26} {:>26}\n",
            self.header, "samples", "avg time/iter./agent (s)", "max time/iter./agent (s)"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<12} {:>8} {:>26.6} {:>26.6}",
                r.label, r.samples, r.avg_seconds, r.max_seconds
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},samples,avg_seconds,max_seconds\n", self.header);
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.label, r.samples, r.avg_seconds, r.max_seconds).unwrap();
        }
        out
    }
}

/// Single-row timing table for one run.
pub fn timing_summary(run: &RunResult) -> TimingSummary {
    let mut t = TimingSummary::new("scheme");
    t.push(TimingRow::from_run(run.scheme.to_string(), run));
    t
}
