//! Paired comparison of a controller-on and a controller-off run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::log::RunLog;
use super::metrics::{compute_metrics, Attribution, MetricsReport, StructureMetrics};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub on: Option<f64>,
    pub off: Option<f64>,
    /// `on − off`.
    pub delta: Option<f64>,
    /// `(off − on) / off`.
    pub relative_reduction: Option<f64>,
}

impl MetricDelta {
    fn new(on: Option<f64>, off: Option<f64>) -> Self {
        let delta = on.zip(off).map(|(a, b)| a - b);
        let relative_reduction = on.zip(off).and_then(|(a, b)| (b != 0.0).then(|| (b - a) / b));
        MetricDelta {
            on,
            off,
            delta,
            relative_reduction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub index: u8,
    pub name: String,
    pub mean_force: MetricDelta,
    pub max_force: MetricDelta,
    pub high_samples: MetricDelta,
    pub undesired_samples: MetricDelta,
    pub proportion: MetricDelta,
}

impl ComparisonRow {
    pub fn improved(&self) -> bool {
        self.proportion.delta.is_some_and(|d| d < 0.0)
    }

    pub fn worsened(&self) -> bool {
        self.proportion.delta.is_some_and(|d| d > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub on: MetricsReport,
    pub off: MetricsReport,
    pub rows: Vec<ComparisonRow>,
}

fn row(a: &StructureMetrics, b: &StructureMetrics) -> ComparisonRow {
    let count = |m: &StructureMetrics, n: usize| (m.contact_samples > 0).then_some(n as f64);
    ComparisonRow {
        index: a.index,
        name: a.name.clone(),
        mean_force: MetricDelta::new(a.mean_force, b.mean_force),
        max_force: MetricDelta::new(a.max_force, b.max_force),
        high_samples: MetricDelta::new(count(a, a.high_samples), count(b, b.high_samples)),
        undesired_samples: MetricDelta::new(count(a, a.undesired_samples), count(b, b.undesired_samples)),
        proportion: MetricDelta::new(a.proportion, b.proportion),
    }
}

/// Per-structure deltas between two runs of the same scenario and seed.
pub fn compare_runs(on: &RunLog, off: &RunLog) -> Result<Comparison> {
    if on.header.comparison_hash != off.header.comparison_hash {
        return Err(Error::Mismatch("scenarios differ beyond the controller switch".into()));
    }
    if on.header.seed != off.header.seed {
        return Err(Error::Mismatch(format!(
            "seeds differ ({} vs {})",
            on.header.seed, off.header.seed
        )));
    }
    if on.header.structures != off.header.structures {
        return Err(Error::Mismatch("structure tables differ".into()));
    }
    compare_reports(
        compute_metrics(on, &on.header.structures, Attribution::Controller)?,
        compute_metrics(off, &off.header.structures, Attribution::Controller)?,
    )
}

/// Compares two metric reports over the same structures (no run checks).
pub fn compare_reports(on: MetricsReport, off: MetricsReport) -> Result<Comparison> {
    if on.rows.len() != off.rows.len() || on.rows.iter().zip(&off.rows).any(|(a, b)| a.index != b.index) {
        return Err(Error::Mismatch("reports cover different structures".into()));
    }
    let rows = on.rows.iter().zip(&off.rows).map(|(a, b)| row(a, b)).collect();
    Ok(Comparison { on, off, rows })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>9} {:>9} {:>9} {:>9} {:>9}  result",
            "structure", "prop_on", "prop_off", "max_on", "max_off", "reduction"
        );
        for r in &self.rows {
            let verdict = if r.improved() {
                "improved"
            } else if r.worsened() {
                "worsened"
            } else {
                "unchanged"
            };
            let _ = writeln!(
                s,
                "{:<22} {:>9} {:>9} {:>9} {:>9} {:>9}  {}",
                format!("{} {}", r.index, r.name),
                f(r.proportion.on),
                f(r.proportion.off),
                f(r.max_force.on),
                f(r.max_force.off),
                f(r.proportion.relative_reduction),
                verdict
            );
        }
        s
    }
}
