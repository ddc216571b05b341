//! `wayfind` command line.

use crate::error::ServerError;
use crate::live::{ClockMode, LiveConfig, DEFAULT_IDLE_TIMEOUT_MS, DEFAULT_MAX_TICKS_PER_INPUT};
use crate::replay_export::export;
use crate::store::SessionStore;
use crate::tcp::{serve, ServerContext};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use wayfind_core::agents::{generate_cohort, PolicyKind, DEFAULT_NOISE_CM};
use wayfind_core::analysis::{write_analysis, DEFAULT_HEATMAP_CELL_CM};
use wayfind_core::building::{ceg_fixture, load_building};
use wayfind_core::questionnaires::{bundled_instrument, load_instrument, read_responses, reports_csv, score, summarize_cohort};
use wayfind_core::sim::World;
use wayfind_core::telemetry::{parse_log, parse_trace, replay, write_events, write_log};

pub const FIXTURE_ENV: &str = "WAYFIND_FIXTURE";

#[derive(Debug, Parser)]
#[command(name = "wayfind", version, about = "Wayfinding experiment engine")]
pub struct Cli {
    /// Building fixture JSON (default: $WAYFIND_FIXTURE, else the bundled building).
    #[arg(long, global = true)]
    pub fixture: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    CentralPoint,
    Direction,
    Floor,
    NearestExit,
    /// Round-robin over all four policies.
    Mix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Realtime,
    Lockstep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scripted sessions headlessly and write their telemetry.
    Simulate {
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NOISE_CM)]
        noise_cm: f64,
    },
    /// Host live sessions over NDJSON/TCP.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, value_enum, default_value = "realtime")]
        clock: ClockArg,
        /// Seconds without input before a session is aborted; 0 disables.
        #[arg(long, default_value_t = DEFAULT_IDLE_TIMEOUT_MS / 1000)]
        idle_timeout_s: u64,
        /// Stop after this many connections.
        #[arg(long)]
        max_sessions: Option<usize>,
    },
    /// Aggregate a directory of telemetry logs.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HEATMAP_CELL_CM)]
        cell_cm: f64,
    },
    /// Score questionnaire responses.
    Score {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        instrument: String,
        #[arg(long)]
        out: PathBuf,
        /// Instrument definition to use instead of the bundled one.
        #[arg(long)]
        definition: Option<PathBuf>,
    },
    /// Convert a telemetry log into a replay document.
    ReplayExport {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the navigation mesh as JSON.
    NavmeshDump {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded input trace and write the resulting log.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ServerError + '_ {
    move |e| ServerError::io(path, e)
}

/// Explicit path, then the environment variable, then the bundled building.
pub fn load_world(explicit: Option<&Path>) -> Result<World, ServerError> {
    let from_env = std::env::var_os(FIXTURE_ENV).map(PathBuf::from);
    let spec = match explicit.map(Path::to_path_buf).or(from_env) {
        Some(p) => load_building(&fs::read_to_string(&p).map_err(io(&p))?)?,
        None => ceg_fixture(),
    };
    Ok(World::new(spec)?)
}

fn log_files(dir: &Path) -> Result<Vec<PathBuf>, ServerError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                n.starts_with("participant_")
                    && n.ends_with(".csv")
                    && !n.ends_with(".trace.csv")
                    && !n.ends_with(".events.csv")
            })
        })
        .collect();
    v.sort();
    Ok(v)
}

pub fn execute(cli: Cli) -> Result<(), ServerError> {
    let fixture = cli.fixture.as_deref();
    match cli.command {
        Command::Simulate { policy, n, seed, out, noise_cm } => {
            let world = load_world(fixture)?;
            let mix: Vec<PolicyKind> = match policy {
                PolicyArg::CentralPoint => vec![PolicyKind::CentralPoint],
                PolicyArg::Direction => vec![PolicyKind::Direction],
                PolicyArg::Floor => vec![PolicyKind::Floor],
                PolicyArg::NearestExit => vec![PolicyKind::NearestExit],
                PolicyArg::Mix => PolicyKind::ALL.to_vec(),
            };
            let store = SessionStore::open(&out)?;
            let cohort = generate_cohort(&world, n, &mix, seed, noise_cm)?;
            let mut finished = 0;
            for (_, run) in &cohort {
                let rec = store.persist_run(&run.log.participant_id, run)?;
                if run.finished() {
                    finished += 1;
                }
                println!("{} {}", rec.file_id, rec.status.as_str());
            }
            println!("{finished}/{} sessions finished", cohort.len());
        }
        Command::Serve { port, out, host, clock, idle_timeout_s, max_sessions } => {
            let world = Arc::new(load_world(fixture)?);
            let store = Arc::new(SessionStore::open(&out)?);
            let live = LiveConfig {
                clock: match clock {
                    ClockArg::Realtime => ClockMode::Realtime,
                    ClockArg::Lockstep => ClockMode::Lockstep,
                },
                idle_timeout_ms: (idle_timeout_s > 0).then_some(idle_timeout_s * 1000),
                max_ticks_per_input: DEFAULT_MAX_TICKS_PER_INPUT,
            };
            let addr = format!("{host}:{port}");
            let listener = TcpListener::bind(&addr).map_err(io(Path::new(&addr)))?;
            println!("listening on {}", listener.local_addr().map_err(io(Path::new(&addr)))?);
            serve(listener, ServerContext { world, store, live }, max_sessions)?;
        }
        Command::Analyze { logs, out, cell_cm } => {
            let world = load_world(fixture)?;
            let parsed = log_files(&logs)?.iter().map(|p| parse_log(p)).collect::<Result<Vec<_>, _>>()?;
            if parsed.is_empty() {
                return Err(ServerError::Usage(format!("no participant logs in {}", logs.display())));
            }
            write_analysis(&world, &parsed, &out, cell_cm)?;
            println!("analyzed {} logs into {}", parsed.len(), out.display());
        }
        Command::Score { responses, instrument, out, definition } => {
            let def = match definition {
                Some(p) => load_instrument(&fs::read_to_string(&p).map_err(io(&p))?)?,
                None => bundled_instrument(&instrument)?,
            };
            let file = fs::File::open(&responses).map_err(io(&responses))?;
            let sets: Vec<_> = read_responses(file)?.into_iter().filter(|s| s.instrument == def.id).collect();
            let reports = sets.iter().map(|s| score(&def, s)).collect::<Result<Vec<_>, _>>()?;
            let summary = summarize_cohort(&reports)?;
            fs::write(&out, reports_csv(&reports)).map_err(io(&out))?;
            print!("{}", summary.to_csv());
        }
        Command::ReplayExport { log, out } => {
            let world = load_world(fixture)?;
            let doc = export(&world, &parse_log(&log)?);
            fs::write(&out, serde_json::to_string(&doc)?).map_err(io(&out))?;
            println!("{} trajectory points", doc.trajectory.len());
        }
        Command::NavmeshDump { out } => {
            let world = load_world(fixture)?;
            fs::write(&out, world.mesh.dump_json()).map_err(io(&out))?;
        }
        Command::Replay { trace, out } => {
            let world = load_world(fixture)?;
            let log = replay(&world, &parse_trace(&trace)?)?;
            fs::create_dir_all(&out).map_err(io(&out))?;
            let p = write_log(&log, &out, false)?;
            write_events(&log, &out, false)?;
            println!("{} ({} rows)", p.display(), log.samples.len());
        }
    }
    Ok(())
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
