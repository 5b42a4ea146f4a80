//! Reference logs reproducing the published per-structure proportions of
//! contact time spent above the safety limit, without and with the adaptive
//! controller.
//!
//! The logs are synthetic: each structure gets 1000 contact records of which
//! exactly `round(1000·p)` exceed the safety limit, spread evenly, separated
//! by short free-air gaps. They exercise the metrics pipeline, not the
//! simulator.

use super::log::{LogHeader, LogRecord, RunLog, LOG_VERSION};
use crate::controller::Regime;
use crate::twin::{StructureSpec, SAFETY_MARGIN};

/// `(structure index, proportion)` without assistance.
pub const TABLE2_WITHOUT: [(u8, f64); 5] = [(1, 0.726), (2, 0.549), (3, 0.567), (4, 0.372), (5, 0.209)];
/// `(structure index, proportion)` with the adaptive controller.
pub const TABLE2_WITH: [(u8, f64); 5] = [(1, 0.322), (2, 0.370), (3, 0.382), (4, 0.243), (5, 0.042)];

const CONTACT_RECORDS: usize = 1000;
const GAP_RECORDS: usize = 50;
const RECORD_DT: f64 = 0.002;
const CONTACT_THRESHOLD: f64 = 0.3;

/// Low-discrepancy fraction in [0, 1).
fn frac(i: usize) -> f64 {
    (i as f64 * 0.618_033_988_749_895).fract()
}

pub fn table2_fixture(with_controller: bool) -> RunLog {
    let specs = StructureSpec::temporal_bone();
    let table = if with_controller { TABLE2_WITH } else { TABLE2_WITHOUT };
    let mut records = Vec::new();
    let mut push = |force: f64, structure: Option<&StructureSpec>, regime: Regime| {
        let t = records.len() as f64 * RECORD_DT;
        let distances = specs
            .iter()
            .map(|s| {
                if Some(s.index) == structure.map(|x| x.index) {
                    -0.1
                } else {
                    3.0
                }
            })
            .collect();
        let sigma = match (with_controller, regime) {
            (false, _) => 1.0,
            (true, Regime::Free) => 1.7,
            (true, Regime::Contact) => 0.7,
            (true, Regime::Overforce) => 0.5,
        };
        records.push(LogRecord {
            t,
            q: Vec::new(),
            tip: [0.0; 3],
            f_h: [0.0; 6],
            f_t_true: [0.0, 0.0, force],
            f_t_est: [0.0, 0.0, force],
            distances,
            sigma,
            regime,
            structure: structure.map(|s| s.index),
            power: false,
            stale: false,
            fallback: false,
            out_of_bounds: false,
        });
    };
    for (index, p) in table {
        let spec = specs.iter().find(|s| s.index == index).expect("known structure");
        for _ in 0..GAP_RECORDS {
            push(0.1, None, Regime::Free);
        }
        let above = (p * CONTACT_RECORDS as f64).round() as usize;
        let limit = spec.lambda + SAFETY_MARGIN;
        for i in 0..CONTACT_RECORDS {
            // Bresenham spread of the above-limit records.
            let is_above = (i + 1) * above / CONTACT_RECORDS > i * above / CONTACT_RECORDS;
            let force = if is_above {
                limit + 0.02 + 0.4 * frac(i)
            } else {
                CONTACT_THRESHOLD + 0.02 + (limit - CONTACT_THRESHOLD - 0.04) * frac(i)
            };
            let regime = if force >= spec.lambda {
                Regime::Overforce
            } else {
                Regime::Contact
            };
            push(force, Some(spec), regime);
        }
    }
    for _ in 0..GAP_RECORDS {
        push(0.1, None, Regime::Free);
    }
    RunLog {
        header: LogHeader {
            version: LOG_VERSION,
            name: if with_controller {
                "table2-with"
            } else {
                "table2-without"
            }
            .into(),
            source: "fixture".into(),
            seed: 0,
            config_hash: format!("table2-{}", if with_controller { "with" } else { "without" }),
            comparison_hash: "table2".into(),
            controller_enabled: with_controller,
            record_dt: RECORD_DT,
            contact_threshold: CONTACT_THRESHOLD,
            safety_margin: SAFETY_MARGIN,
            structures: specs.clone(),
            dof: 0,
            scenario: None,
        },
        records,
        events: Vec::new(),
    }
}
