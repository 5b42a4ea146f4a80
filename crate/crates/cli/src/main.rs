//! `drilltwin`: run, replay, report, compare, describe, serve, phantom and
//! fixture export. Errors go to stderr as one JSON object and a nonzero exit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use drilltwin::scenario::{
    compare_runs, compute_metrics, replay_log, run_seeded, table2_fixture, Attribution, InputSource, LogEvent,
    MetricsReport, RunLog, Scenario,
};
use drilltwin::twin::{generate_phantom, save_volume, PhantomSpec};
use drilltwin_session::{Server, ServerOptions, SessionError};
use serde_json::json;

const FIXTURE_ENV: &str = "DRILLTWIN_FIXTURE_DIR";

/// Stdout writes that end the process quietly when the reader goes away
/// (`drilltwin describe ... | head`).
macro_rules! out {
    ($($arg:tt)*) => {
        if std::io::Write::write_fmt(&mut std::io::stdout(), format_args!($($arg)*)).is_err() {
            std::process::exit(0);
        }
    };
}

macro_rules! outln {
    ($($arg:tt)*) => {
        out!("{}\n", format_args!($($arg)*))
    };
}

#[derive(Parser)]
#[command(
    name = "drilltwin",
    version,
    about = "Digital-twin drilling simulator with adaptive force control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Default)]
enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and report its metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Log destination; `.csv` writes CSV, anything else the binary format.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run with the adaptive gain switched off.
        #[arg(long)]
        no_controller: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Re-execute a log's recorded hand input and check the trace.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero when the replayed trace differs.
        #[arg(long)]
        check: bool,
    },
    /// Safety metrics of a log.
    Report {
        /// Log path; bare names are also looked up in the fixture directory
        /// with `.csv` and `.dtlg` extensions.
        #[arg(long)]
        log: PathBuf,
        /// Searched when `--log` does not name an existing file.
        #[arg(long, env = FIXTURE_ENV, default_value = "fixtures")]
        fixture_dir: PathBuf,
        /// Attribute samples to the nearest structure instead of the
        /// controller's operating structure.
        #[arg(long)]
        nearest: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Controller on vs off, from two logs or by running a scenario both ways.
    Compare {
        #[arg(long, requires = "off", conflicts_with = "scenario")]
        on: Option<PathBuf>,
        #[arg(long, requires = "on")]
        off: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Searched when `--log` does not name an existing file.
        #[arg(long, env = FIXTURE_ENV, default_value = "fixtures")]
        fixture_dir: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Summarise a scenario or a log.
    Describe {
        #[arg(long, conflicts_with = "log", required_unless_present = "log")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Searched when `--log` does not name an existing file.
        #[arg(long, env = FIXTURE_ENV, default_value = "fixtures")]
        fixture_dir: PathBuf,
    },
    /// Host live steering sessions over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Snapshot rate (Hz); defaults to the scenario's.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for session logs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Generate the synthetic temporal-bone phantom volume.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 72)]
        dims: usize,
        #[arg(long, default_value_t = 0.25)]
        spacing: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Landmark jitter (mm).
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Skip the JSON structure table next to the volume.
        #[arg(long)]
        no_sidecar: bool,
    },
    /// Write the reference metric fixtures as CSV logs.
    Fixtures {
        #[arg(long, env = FIXTURE_ENV, default_value = "fixtures")]
        fixture_dir: PathBuf,
    },
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

impl From<drilltwin::Error> for CliError {
    fn from(e: drilltwin::Error) -> Self {
        CliError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        CliError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        drilltwin::Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn fail(kind: &'static str, message: impl Into<String>) -> CliError {
    CliError {
        kind,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({"error": {"kind": "usage", "message": message.trim()}}));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind, "message": e.message}}));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Run {
            scenario,
            seed,
            out,
            no_controller,
            format,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if no_controller {
                s.controller.enabled = false;
            }
            let log = run_seeded(&s, seed.unwrap_or(s.seed))?;
            if let Some(out) = &out {
                log.save(out)?;
            }
            let report = metrics(&log, false)?;
            print_report(&report, &log, format);
            Ok(())
        }
        Command::Replay { log, out, check } => {
            let original = RunLog::load(&log)?;
            let replayed = replay_log(&original)?;
            let identical = replayed.records == original.records && replayed.events == original.events;
            if let Some(out) = &out {
                replayed.save(out)?;
            }
            outln!(
                "{}",
                json!({"records": replayed.records.len(), "duration": replayed.duration(), "identical": identical})
            );
            if check && !identical {
                return Err(fail("mismatch", "replayed trace differs from the recorded one"));
            }
            Ok(())
        }
        Command::Report {
            log,
            fixture_dir,
            nearest,
            format,
        } => {
            let log = RunLog::load(&find_log(&log, &fixture_dir))?;
            let report = metrics(&log, nearest)?;
            print_report(&report, &log, format);
            Ok(())
        }
        Command::Compare {
            on,
            off,
            scenario,
            seed,
            fixture_dir,
            format,
        } => {
            let (on, off) = match (on, off, scenario) {
                (Some(on), Some(off), None) => (
                    RunLog::load(&find_log(&on, &fixture_dir))?,
                    RunLog::load(&find_log(&off, &fixture_dir))?,
                ),
                (None, None, Some(path)) => {
                    let mut s = Scenario::load(&path)?;
                    let seed = seed.unwrap_or(s.seed);
                    s.controller.enabled = true;
                    let on = run_seeded(&s, seed)?;
                    s.controller.enabled = false;
                    (on, run_seeded(&s, seed)?)
                }
                _ => return Err(fail("usage", "give either --on and --off logs or --scenario")),
            };
            let c = compare_runs(&on, &off)?;
            match format {
                Format::Json => outln!("{}", serde_json::to_string_pretty(&c).expect("serialisable")),
                _ => {
                    out!("{}", c.to_table());
                    let improved = c.rows.iter().filter(|r| r.improved()).count();
                    outln!("improved on {improved} of {} structures", c.rows.len());
                }
            }
            Ok(())
        }
        Command::Describe {
            scenario,
            log,
            fixture_dir,
        } => {
            let summary = match (scenario, log) {
                (Some(path), _) => describe_scenario(&Scenario::load(&path)?)?,
                (None, Some(path)) => describe_log(&RunLog::load(&find_log(&path, &fixture_dir))?),
                (None, None) => unreachable!("clap requires one of them"),
            };
            outln!("{}", serde_json::to_string_pretty(&summary).expect("serialisable"));
            Ok(())
        }
        Command::Serve {
            scenario,
            port,
            host,
            rate,
            seed,
            out,
            sessions,
        } => {
            let s = Scenario::load(&scenario)?;
            let options = ServerOptions {
                seed: seed.unwrap_or(s.seed),
                snapshot_hz: rate,
                out_dir: out,
                max_sessions: sessions,
            };
            let server = Server::bind(&format!("{host}:{port}"), s, options)?;
            outln!("{}", json!({"listening": format!("ws://{}", server.local_addr()?)}));
            for summary in server.run()? {
                outln!(
                    "{}",
                    json!({
                        "session": summary.id,
                        "reason": summary.reason,
                        "duration": summary.duration,
                        "records": summary.records,
                        "log": summary.log_path,
                    })
                );
            }
            Ok(())
        }
        Command::Phantom {
            out,
            dims,
            spacing,
            seed,
            jitter,
            no_sidecar,
        } => {
            let spec = PhantomSpec {
                dims: [dims; 3],
                spacing,
                seed,
                jitter,
            };
            let (volume, specs, _) = generate_phantom(&spec)?;
            save_volume(&out, &volume, &specs, !no_sidecar)?;
            let counts: Vec<_> = specs
                .iter()
                .map(|s| json!({"index": s.index, "name": s.name, "voxels": volume.count(s.index)}))
                .collect();
            outln!(
                "{}",
                json!({"volume": out, "dims": volume.dims(), "structures": counts})
            );
            Ok(())
        }
        Command::Fixtures { fixture_dir } => {
            std::fs::create_dir_all(&fixture_dir)?;
            for (name, with) in [("table2_wo.csv", false), ("table2_w.csv", true)] {
                let path = fixture_dir.join(name);
                table2_fixture(with).save(&path)?;
                outln!("{}", path.display());
            }
            Ok(())
        }
    }
}

/// `path` as given, then with `.csv` / `.dtlg`, then the same file name in
/// the fixture directory.
fn find_log(path: &Path, fixture_dir: &Path) -> PathBuf {
    let with_ext = |p: &Path| -> Vec<PathBuf> {
        let mut v = vec![p.to_path_buf()];
        if p.extension().is_none() {
            v.push(p.with_extension("csv"));
            v.push(p.with_extension("dtlg"));
        }
        v
    };
    let mut candidates = with_ext(path);
    if let Some(name) = path.file_name() {
        candidates.extend(with_ext(&fixture_dir.join(name)));
    }
    candidates
        .into_iter()
        .find(|p| p.is_file())
        .unwrap_or_else(|| path.to_path_buf())
}

fn metrics(log: &RunLog, nearest: bool) -> CliResult<MetricsReport> {
    let attribution = if nearest {
        Attribution::Nearest
    } else {
        Attribution::Controller
    };
    Ok(compute_metrics(log, &log.header.structures, attribution)?)
}

fn print_report(report: &MetricsReport, log: &RunLog, format: Format) {
    match format {
        Format::Table => {
            outln!(
                "{} (seed {}, controller {}, {:.3} s)",
                log.header.name,
                log.header.seed,
                if log.header.controller_enabled { "on" } else { "off" },
                log.duration()
            );
            out!("{}", report.to_table());
        }
        Format::Json => outln!("{}", serde_json::to_string_pretty(report).expect("serialisable")),
        Format::Csv => out!("{}", report.to_csv()),
    }
}

fn describe_scenario(s: &Scenario) -> CliResult<serde_json::Value> {
    s.validate()?;
    let anatomy = s.build_anatomy(drilltwin::exec::Execution::default())?;
    let input = match &s.input {
        InputSource::Scripted { segments, tremor, .. } => json!({
            "kind": "scripted",
            "segments": segments.iter().map(|g| json!({"type": g.kind(), "duration": g.duration()})).collect::<Vec<_>>(),
            "tremor_std": tremor.map(|t| t.std),
        }),
        InputSource::Replay { log } => json!({"kind": "replay", "log": log}),
        InputSource::Live {
            max_force,
            deadman_timeout,
            snapshot_hz,
        } => {
            json!({"kind": "live", "max_force": max_force, "deadman_timeout": deadman_timeout, "snapshot_hz": snapshot_hz})
        }
    };
    Ok(json!({
        "name": s.name,
        "duration": s.duration,
        "seed": s.seed,
        "rates": {"sim_hz": s.rates.sim_hz, "control_hz": s.rates.control_hz},
        "controller": s.controller,
        "structures": anatomy.specs().iter().map(|x| json!({
            "index": x.index, "name": x.name, "gamma": x.gamma, "lambda": x.lambda,
            "safety_limit": x.safety_limit(), "critical": x.critical,
            "voxels": anatomy.volume().count(x.index),
        })).collect::<Vec<_>>(),
        "grid": {"dims": anatomy.volume().dims(), "spacing": anatomy.volume().spacing()},
        "input": input,
        "config_hash": s.config_hash(),
    }))
}

fn describe_log(log: &RunLog) -> serde_json::Value {
    let h = &log.header;
    let carves = log
        .events
        .iter()
        .filter(|e| matches!(e, LogEvent::Carve { .. }))
        .count();
    json!({
        "name": h.name,
        "version": h.version,
        "source": h.source,
        "seed": h.seed,
        "controller_enabled": h.controller_enabled,
        "record_dt": h.record_dt,
        "records": log.records.len(),
        "duration": log.duration(),
        "events": log.events.len(),
        "carves": carves,
        "breaches": log.breaches().len(),
        "config_hash": h.config_hash,
        "comparison_hash": h.comparison_hash,
        "structures": h.structures.iter().map(|s| &s.name).collect::<Vec<_>>(),
    })
}
