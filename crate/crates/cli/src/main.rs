use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbprop::cache::CacheStore;
use sbprop_cli::commands::{self, COMPARE_TOL};
use sbprop_cli::{write_atomic, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "sbprop",
    version,
    about = "Spin-boson time evolution and spectra"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output file (written atomically); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run on a single thread.
    #[arg(long, global = true)]
    serial: bool,
    /// Normalize the initial state before evolving.
    #[arg(long, global = true)]
    normalize: bool,
    /// Neither read nor write the propagator cache.
    #[arg(long, global = true)]
    no_cache: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor-propagated trajectory as CSV.
    Evolve,
    /// Taylor vs eigenvector evolution; exits 3 if they differ by 1e-6 or more.
    Compare,
    /// Lowest `levels + 1` energies and their offsets from the ground energy.
    Spectrum,
    /// Ground energy against truncation, with a classification line.
    GsScan,
    /// Inspect or clear the propagator cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    List,
    Clear,
    /// Cache root summary, or header of one entry.
    Info {
        /// Entry fingerprint in hex.
        fingerprint: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.common.serial {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
        {
            eprintln!("sbprop: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sbprop: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        cfg.apply_override(kv)?;
    }
    if common.normalize {
        cfg.normalize = true;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn emit(out: Option<&str>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(Path::new(path), text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn open_cache(common: &Common) -> Result<Option<CacheStore>, CliError> {
    if common.no_cache {
        return Ok(None);
    }
    match CacheStore::from_env() {
        Ok(store) => Ok(Some(store)),
        Err(e) => {
            eprintln!("sbprop: cache disabled: {e}");
            Ok(None)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Evolve => {
            let cfg = load_config(common)?;
            let cache = open_cache(common)?;
            let run = commands::run_evolve(&cfg, cache.as_ref())?;
            for w in &run.warnings {
                eprintln!("sbprop: {w}");
            }
            emit(cfg.out.as_deref(), &commands::evolve_csv(&run.trajectory))?;
            if !run.trajectory.snapshots.is_empty() {
                match &cfg.out {
                    Some(out) => {
                        let side = format!("{out}.snapshots.csv");
                        write_atomic(
                            Path::new(&side),
                            commands::snapshots_csv(&run.trajectory).as_bytes(),
                        )?;
                    }
                    None => eprintln!("sbprop: snapshots need --out; not written"),
                }
            }
            Ok(())
        }
        Command::Compare => {
            let cfg = load_config(common)?;
            let cache = open_cache(common)?;
            let report = commands::run_compare(&cfg, cache.as_ref())?;
            emit(cfg.out.as_deref(), &report.to_csv())?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Tolerance(format!(
                    "max_dn={} max_dsz={} (limit {COMPARE_TOL})",
                    report.max_dn, report.max_dsz
                )))
            }
        }
        Command::Spectrum => {
            let cfg = load_config(common)?;
            emit(
                cfg.out.as_deref(),
                &commands::spectrum_csv(&commands::run_spectrum(&cfg)?),
            )
        }
        Command::GsScan => {
            let cfg = load_config(common)?;
            emit(
                cfg.out.as_deref(),
                &commands::gs_scan_csv(&commands::run_gs_scan(&cfg)?),
            )
        }
        Command::Cache { action } => {
            let store = CacheStore::from_env()?;
            let out = common.out.as_ref().map(|p| p.display().to_string());
            let text = match action {
                CacheAction::List => commands::cache_list_csv(&store)?,
                CacheAction::Clear => format!("removed={}\n", store.clear()?),
                CacheAction::Info { fingerprint } => {
                    let fp = fingerprint
                        .as_deref()
                        .map(|s| {
                            u64::from_str_radix(s.trim_start_matches("0x"), 16)
                                .map_err(|_| CliError::Config(format!("bad fingerprint {s:?}")))
                        })
                        .transpose()?;
                    commands::cache_info(&store, fp)?
                }
            };
            emit(out.as_deref(), &text)
        }
    }
}
