//! Safety metrics over a run log.
//!
//! A record is in contact when the true tip force exceeds the contact
//! threshold C, high-force when it exceeds the structure's activation
//! threshold λ, and undesired when it exceeds the safety limit λ + margin.
//! Each record's time goes to one structure: the controller's operating
//! structure, or the nearest one in post-hoc mode.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::log::RunLog;
use crate::twin::{nearest_structure, StructureSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// The structure the controller was acting on.
    #[default]
    Controller,
    /// The structure nearest the tip, recomputed from logged distances.
    Nearest,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub index: u8,
    pub name: String,
    pub lambda: f64,
    pub safety_limit: f64,
    pub contact_samples: usize,
    pub contact_time: f64,
    pub mean_force: Option<f64>,
    pub max_force: Option<f64>,
    pub high_samples: usize,
    pub high_mean: Option<f64>,
    pub high_max: Option<f64>,
    pub undesired_samples: usize,
    pub undesired_mean: Option<f64>,
    pub undesired_max: Option<f64>,
    /// Time above the safety limit over contact time.
    pub proportion: Option<f64>,
    /// Time above the safety limit over the whole run.
    pub proportion_of_run: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub attribution: Attribution,
    pub record_dt: f64,
    pub total_time: f64,
    pub contact_time: f64,
    /// Contact samples the controller had not attributed; they were
    /// assigned to the nearest structure.
    pub reattributed_samples: usize,
    pub breaches: usize,
    pub rows: Vec<StructureMetrics>,
}

#[derive(Clone, Default)]
struct Acc {
    n: usize,
    sum: f64,
    max: f64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.max = if self.n == 1 { v } else { self.max.max(v) };
    }
    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
    fn maximum(&self) -> Option<f64> {
        (self.n > 0).then_some(self.max)
    }
}

pub fn compute_metrics(log: &RunLog, specs: &[StructureSpec], attribution: Attribution) -> Result<MetricsReport> {
    if specs.is_empty() || log.header.structures.is_empty() {
        return Err(Error::Config("log carries no structure annotations".into()));
    }
    let n = log.header.structures.len();
    if let Some((i, _)) = log.records.iter().enumerate().find(|(_, r)| r.distances.len() != n) {
        return Err(Error::Format(format!(
            "record {i} has {} distances for {n} structures",
            log.records[i].distances.len()
        )));
    }
    let c = log.header.contact_threshold;
    let margin = log.header.safety_margin;
    let dt = log.header.record_dt;
    let table = &log.header.structures;
    let mut contact = vec![Acc::default(); specs.len()];
    let mut high = vec![Acc::default(); specs.len()];
    let mut undesired = vec![Acc::default(); specs.len()];
    let mut reattributed = 0;
    let row_of = |index: u8| specs.iter().position(|s| s.index == index);
    for r in &log.records {
        let f = r.true_force();
        if !(f > c) {
            continue;
        }
        let nearest =
            || nearest_structure(&r.distances, |i| (table[i].critical, table[i].index)).map(|i| table[i].index);
        let index = match attribution {
            Attribution::Controller => match r.structure {
                Some(s) => Some(s),
                None => {
                    reattributed += 1;
                    nearest()
                }
            },
            Attribution::Nearest => nearest(),
        };
        let Some(row) = index.and_then(row_of) else {
            continue;
        };
        let lambda = specs[row].lambda;
        contact[row].add(f);
        if f > lambda {
            high[row].add(f);
        }
        if f > lambda + margin {
            undesired[row].add(f);
        }
    }
    let total_time = log.records.len() as f64 * dt;
    let rows: Vec<StructureMetrics> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| StructureMetrics {
            index: s.index,
            name: s.name.clone(),
            lambda: s.lambda,
            safety_limit: s.lambda + margin,
            contact_samples: contact[i].n,
            contact_time: contact[i].n as f64 * dt,
            mean_force: contact[i].mean(),
            max_force: contact[i].maximum(),
            high_samples: high[i].n,
            high_mean: high[i].mean(),
            high_max: high[i].maximum(),
            undesired_samples: undesired[i].n,
            undesired_mean: undesired[i].mean(),
            undesired_max: undesired[i].maximum(),
            proportion: (contact[i].n > 0).then(|| undesired[i].n as f64 / contact[i].n as f64),
            proportion_of_run: if log.records.is_empty() {
                0.0
            } else {
                undesired[i].n as f64 / log.records.len() as f64
            },
        })
        .collect();
    Ok(MetricsReport {
        attribution,
        record_dt: dt,
        total_time,
        contact_time: rows.iter().map(|r| r.contact_time).sum(),
        reattributed_samples: reattributed,
        breaches: log.breaches().len(),
        rows,
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

impl MetricsReport {
    pub fn row(&self, index: u8) -> Option<&StructureMetrics> {
        self.rows.iter().find(|r| r.index == index)
    }

    /// Fixed-width table, one line per structure.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>9} {:>8} {:>8} {:>7} {:>7} {:>10}",
            "structure", "contact_s", "mean_N", "max_N", ">lam", ">limit", "proportion"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<22} {:>9.3} {:>8} {:>8} {:>7} {:>7} {:>10}",
                format!("{} {}", r.index, r.name),
                r.contact_time,
                opt(r.mean_force, 3),
                opt(r.max_force, 3),
                r.high_samples,
                r.undesired_samples,
                opt(r.proportion, 3)
            );
        }
        let _ = writeln!(
            s,
            "total {:.3} s, contact {:.3} s, breaches {}",
            self.total_time, self.contact_time, self.breaches
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "index,name,lambda,safety_limit,contact_samples,contact_time,mean_force,max_force,high_samples,high_mean,high_max,undesired_samples,undesired_mean,undesired_max,proportion,proportion_of_run\n",
        );
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.name,
                r.lambda,
                r.safety_limit,
                r.contact_samples,
                r.contact_time,
                o(r.mean_force),
                o(r.max_force),
                r.high_samples,
                o(r.high_mean),
                o(r.high_max),
                r.undesired_samples,
                o(r.undesired_mean),
                o(r.undesired_max),
                o(r.proportion),
                r.proportion_of_run
            );
        }
        s
    }
}
