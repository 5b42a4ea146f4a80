//! Run logs: per-control-tick records, events and a self-describing header.
//!
//! Binary layout (little endian):
//!
//! | field          | type                          |
//! |----------------|-------------------------------|
//! | magic          | `b"DTLG"`                     |
//! | version        | u16                           |
//! | header length  | u32, then header JSON         |
//! | dof, nstruct   | u16, u16                      |
//! | record count   | u64, then records             |
//! | events length  | u32, then events JSON array   |
//!
//! A record is `t`, `q[dof]`, `tip[3]`, `f_h[6]`, `f_t_true[3]`,
//! `f_t_est[3]`, `d[nstruct]`, `sigma` (all f64), then `regime` u8,
//! `structure` u8 (0 = none) and a flag byte (bit 0 power, bit 1 stale force
//! estimate, bit 2 fallback structure, bit 3 tip outside the grid).
//!
//! The CSV form carries the header and events as `# header: ` and
//! `# events: ` comment lines followed by one row per record. Numbers are
//! written in shortest round-trip form, so CSV and binary hold the same
//! values.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use crate::controller::{ControllerEvent, Regime};
use crate::error::io_at;
use crate::twin::StructureSpec;
use crate::{Error, Result};

pub const LOG_MAGIC: &[u8; 4] = b"DTLG";
pub const LOG_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u16,
    pub name: String,
    /// `scripted`, `replay`, `live` or `fixture`.
    pub source: String,
    pub seed: u64,
    pub config_hash: String,
    pub comparison_hash: String,
    pub controller_enabled: bool,
    /// Seconds between records.
    pub record_dt: f64,
    pub contact_threshold: f64,
    pub safety_margin: f64,
    pub structures: Vec<StructureSpec>,
    pub dof: usize,
    /// The scenario that produced the log, when there is one.
    #[serde(default)]
    pub scenario: Option<Scenario>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub q: Vec<f64>,
    /// Tip position, anatomy frame (mm).
    pub tip: [f64; 3],
    /// Hand wrench, anatomy frame.
    pub f_h: [f64; 6],
    /// True contact force, anatomy frame.
    pub f_t_true: [f64; 3],
    /// Estimated contact force, tip frame.
    pub f_t_est: [f64; 3],
    pub distances: Vec<f64>,
    pub sigma: f64,
    pub regime: Regime,
    pub structure: Option<u8>,
    pub power: bool,
    pub stale: bool,
    pub fallback: bool,
    pub out_of_bounds: bool,
}

impl LogRecord {
    pub fn true_force(&self) -> f64 {
        norm3(&self.f_t_true)
    }

    pub fn estimated_force(&self) -> f64 {
        norm3(&self.f_t_est)
    }

    fn flags(&self) -> u8 {
        u8::from(self.power)
            | u8::from(self.stale) << 1
            | u8::from(self.fallback) << 2
            | u8::from(self.out_of_bounds) << 3
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Controller(ControllerEvent),
    Carve {
        t: f64,
        structure: u8,
        removed: usize,
        critical_touched: usize,
        breach: bool,
    },
    /// The tip left the anatomy grid; distances were clamped.
    OutOfBounds {
        t: f64,
    },
    /// A contact normal fell back to the last valid one.
    NormalFallback {
        t: f64,
        structure: u8,
    },
}

impl LogEvent {
    pub fn t(&self) -> f64 {
        match self {
            LogEvent::Controller(e) => e.t,
            LogEvent::Carve { t, .. } | LogEvent::OutOfBounds { t } | LogEvent::NormalFallback { t, .. } => *t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
    pub events: Vec<LogEvent>,
}

impl RunLog {
    pub fn duration(&self) -> f64 {
        self.records.len() as f64 * self.header.record_dt
    }

    pub fn breaches(&self) -> Vec<&LogEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, LogEvent::Carve { breach: true, .. }))
            .collect()
    }

    /// Structural checks: record widths and constant spacing.
    pub fn check(&self) -> Result<()> {
        let n = self.header.structures.len();
        for (i, r) in self.records.iter().enumerate() {
            if r.q.len() != self.header.dof || r.distances.len() != n {
                return Err(Error::Format(format!("record {i} has the wrong width")));
            }
        }
        let dt = self.header.record_dt;
        for (i, w) in self.records.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - dt).abs() > 1e-6 * dt.max(1e-9) + 1e-12 {
                return Err(Error::Format(format!("record {} breaks the constant spacing", i + 1)));
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(LOG_MAGIC)?;
        w.write_u16::<LittleEndian>(LOG_VERSION)?;
        let header = serde_json::to_vec(&self.header)?;
        w.write_u32::<LittleEndian>(len_u32(header.len())?)?;
        w.write_all(&header)?;
        let dof = self.header.dof;
        let n = self.header.structures.len();
        w.write_u16::<LittleEndian>(dof as u16)?;
        w.write_u16::<LittleEndian>(n as u16)?;
        w.write_u64::<LittleEndian>(self.records.len() as u64)?;
        for r in &self.records {
            if r.q.len() != dof || r.distances.len() != n {
                return Err(Error::Format("record width does not match the header".into()));
            }
            let floats = std::iter::once(r.t)
                .chain(r.q.iter().copied())
                .chain(r.tip)
                .chain(r.f_h)
                .chain(r.f_t_true)
                .chain(r.f_t_est)
                .chain(r.distances.iter().copied())
                .chain(std::iter::once(r.sigma));
            for v in floats {
                w.write_f64::<LittleEndian>(v)?;
            }
            w.write_u8(r.regime.code())?;
            w.write_u8(r.structure.unwrap_or(0))?;
            w.write_u8(r.flags())?;
        }
        let events = serde_json::to_vec(&self.events)?;
        w.write_u32::<LittleEndian>(len_u32(events.len())?)?;
        w.write_all(&events)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != LOG_MAGIC {
            return Err(Error::Format("not a run log (bad magic)".into()));
        }
        let version = r.read_u16::<LittleEndian>()?;
        if version != LOG_VERSION {
            return Err(Error::VersionMismatch {
                expected: LOG_VERSION,
                found: version,
            });
        }
        let header: LogHeader = serde_json::from_slice(&read_block(&mut r)?)?;
        let dof = r.read_u16::<LittleEndian>()? as usize;
        let n = r.read_u16::<LittleEndian>()? as usize;
        if dof != header.dof || n != header.structures.len() {
            return Err(Error::Format("record width does not match the header".into()));
        }
        let count = r.read_u64::<LittleEndian>()?;
        let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
        let f = |r: &mut R| r.read_f64::<LittleEndian>();
        for _ in 0..count {
            let t = f(&mut r)?;
            let q = (0..dof).map(|_| f(&mut r)).collect::<std::io::Result<Vec<_>>>()?;
            let tip = [f(&mut r)?, f(&mut r)?, f(&mut r)?];
            let f_h = [f(&mut r)?, f(&mut r)?, f(&mut r)?, f(&mut r)?, f(&mut r)?, f(&mut r)?];
            let f_t_true = [f(&mut r)?, f(&mut r)?, f(&mut r)?];
            let f_t_est = [f(&mut r)?, f(&mut r)?, f(&mut r)?];
            let distances = (0..n).map(|_| f(&mut r)).collect::<std::io::Result<Vec<_>>>()?;
            let sigma = f(&mut r)?;
            let regime = Regime::from_code(r.read_u8()?).ok_or_else(|| Error::Format("bad regime code".into()))?;
            let s = r.read_u8()?;
            let flags = r.read_u8()?;
            records.push(LogRecord {
                t,
                q,
                tip,
                f_h,
                f_t_true,
                f_t_est,
                distances,
                sigma,
                regime,
                structure: (s != 0).then_some(s),
                power: flags & 1 != 0,
                stale: flags & 2 != 0,
                fallback: flags & 4 != 0,
                out_of_bounds: flags & 8 != 0,
            });
        }
        let events: Vec<LogEvent> = serde_json::from_slice(&read_block(&mut r)?)?;
        Ok(RunLog {
            header,
            records,
            events,
        })
    }

    pub fn csv_columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((0..self.header.dof).map(|i| format!("q{i}")));
        cols.extend(["tip_x", "tip_y", "tip_z"].map(String::from));
        cols.extend(["fh_x", "fh_y", "fh_z", "fh_tx", "fh_ty", "fh_tz"].map(String::from));
        cols.extend(["ft_x", "ft_y", "ft_z", "ft_est_x", "ft_est_y", "ft_est_z"].map(String::from));
        cols.extend(self.header.structures.iter().map(|s| format!("d{}", s.index)));
        cols.extend(
            [
                "sigma",
                "regime",
                "structure",
                "power",
                "stale",
                "fallback",
                "out_of_bounds",
            ]
            .map(String::from),
        );
        cols
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# header: {}", serde_json::to_string(&self.header)?)?;
        writeln!(w, "# events: {}", serde_json::to_string(&self.events)?)?;
        writeln!(w, "{}", self.csv_columns().join(","))?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let nums = std::iter::once(r.t)
                .chain(r.q.iter().copied())
                .chain(r.tip)
                .chain(r.f_h)
                .chain(r.f_t_true)
                .chain(r.f_t_est)
                .chain(r.distances.iter().copied())
                .chain(std::iter::once(r.sigma));
            for v in nums {
                line.push_str(&format!("{v},"));
            }
            line.push_str(&format!(
                "{},{},{},{},{},{}",
                r.regime.name(),
                r.structure.map(|s| s.to_string()).unwrap_or_default(),
                u8::from(r.power),
                u8::from(r.stale),
                u8::from(r.fallback),
                u8::from(r.out_of_bounds)
            ));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut header: Option<LogHeader> = None;
        let mut events: Vec<LogEvent> = Vec::new();
        let mut columns: Option<usize> = None;
        let mut records = Vec::new();
        for (lineno, line) in lines.by_ref().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# header: ") {
                header = Some(serde_json::from_str(rest)?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("# events: ") {
                events = serde_json::from_str(rest)?;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let h = header
                .as_ref()
                .ok_or_else(|| Error::Format("CSV log lacks a '# header:' line".into()))?;
            if h.version != LOG_VERSION {
                return Err(Error::VersionMismatch {
                    expected: LOG_VERSION,
                    found: h.version,
                });
            }
            let Some(width) = columns else {
                columns = Some(line.split(',').count());
                continue;
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(Error::Format(format!("line {}: expected {width} columns", lineno + 1)));
            }
            records.push(
                parse_row(&cells, h.dof, h.structures.len())
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?,
            );
        }
        let header = header.ok_or_else(|| Error::Format("CSV log lacks a '# header:' line".into()))?;
        Ok(RunLog {
            header,
            records,
            events,
        })
    }

    /// Loads either format, chosen by the `.csv` extension.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| io_at(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::read_csv(file)
        } else {
            Self::read_binary(BufReader::new(file))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| io_at(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            self.write_csv(&mut w)?;
        } else {
            self.write_binary(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format("block too large".into()))
}

fn read_block<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn parse_row(cells: &[&str], dof: usize, n: usize) -> std::result::Result<LogRecord, String> {
    let expected = 1 + dof + 3 + 6 + 6 + n + 1 + 6;
    if cells.len() != expected {
        return Err(format!("expected {expected} columns, found {}", cells.len()));
    }
    let mut it = cells.iter();
    let mut num = || -> std::result::Result<f64, String> {
        let c = it.next().ok_or("row too short")?;
        c.trim().parse::<f64>().map_err(|e| format!("'{c}': {e}"))
    };
    let t = num()?;
    let q = (0..dof).map(|_| num()).collect::<std::result::Result<Vec<_>, _>>()?;
    let tip = [num()?, num()?, num()?];
    let f_h = [num()?, num()?, num()?, num()?, num()?, num()?];
    let f_t_true = [num()?, num()?, num()?];
    let f_t_est = [num()?, num()?, num()?];
    let distances = (0..n).map(|_| num()).collect::<std::result::Result<Vec<_>, _>>()?;
    let sigma = num()?;
    let rest = &cells[expected - 6..];
    let regime = match rest[0].trim() {
        "free" => Regime::Free,
        "contact" => Regime::Contact,
        "overforce" => Regime::Overforce,
        other => return Err(format!("unknown regime '{other}'")),
    };
    let structure = match rest[1].trim() {
        "" => None,
        s => Some(s.parse::<u8>().map_err(|e| format!("structure '{s}': {e}"))?),
    };
    let flag = |s: &str| -> std::result::Result<bool, String> {
        match s.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("bad flag '{other}'")),
        }
    };
    Ok(LogRecord {
        t,
        q,
        tip,
        f_h,
        f_t_true,
        f_t_est,
        distances,
        sigma,
        regime,
        structure,
        power: flag(rest[2])?,
        stale: flag(rest[3])?,
        fallback: flag(rest[4])?,
        out_of_bounds: flag(rest[5])?,
    })
}
