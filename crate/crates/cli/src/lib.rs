//! The `btlab` command line: data preparation, training, generation,
//! augmentation, diagnostics and the controlled back-translation scenario.
//!
//! Every command writes a JSON run manifest next to its outputs; `btlab
//! replay <manifest>` re-runs it and checks the outputs byte for byte.

mod args;
mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use args::Cli;
use args::Command;
use manifest::{FileDigest, Manifest, MANIFEST_FORMAT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<btlab_core::Error> for CliError {
    fn from(e: btlab_core::Error) -> Self {
        use btlab_core::Error as E;
        match e {
            E::InvalidSpec(_) | E::DeterministicDuplicates { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Files read and written by a command, plus its resolved configuration.
#[derive(Debug, Default)]
pub(crate) struct Artifacts {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Where the manifest goes unless `--manifest` says otherwise.
    pub manifest: PathBuf,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if !["error", "warn", "info", "debug", "trace", "off"].contains(&cli.log_level.as_str()) {
        eprintln!("error: --log-level must be one of error, warn, info, debug, trace, off");
        return EXIT_USAGE;
    }
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).try_init();
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, recorded) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return usage("--workers must be >= 1");
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Runtime(e.into()))
}

/// Runs a parsed command line; `recorded` are the arguments stored in the
/// manifest.
pub fn run(cli: Cli, recorded: Vec<String>) -> Result<(), CliError> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest, r.workers.or(cli.workers));
    }
    let pool = worker_pool(cli.workers)?;
    let name = cli.command.name().to_owned();
    let arts = pool.install(|| commands::dispatch(&cli.command))?;
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| arts.manifest.clone());
    write_manifest(&name, recorded, &arts, &manifest_path)?;
    Ok(())
}

fn write_manifest(
    command: &str,
    args: Vec<String>,
    arts: &Artifacts,
    path: &std::path::Path,
) -> Result<(), CliError> {
    let digest = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<Vec<_>>>();
    let m = Manifest {
        format: MANIFEST_FORMAT.into(),
        command: command.into(),
        args,
        config: arts.config.clone(),
        seed: arts.seed,
        inputs: digest(&arts.inputs)?,
        outputs: digest(&arts.outputs)?,
    };
    m.save(path)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

/// Re-runs the command of a manifest and verifies every output checksum.
fn replay(path: &std::path::Path, workers: Option<usize>) -> Result<(), CliError> {
    let m = Manifest::load(path)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        let list: Vec<String> = changed.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::Runtime(anyhow::anyhow!(
            "inputs changed since the recorded run: {}",
            list.join(", ")
        )));
    }
    let argv = std::iter::once("btlab".to_string()).chain(m.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return usage("a replay manifest cannot replay itself");
    }
    if workers.is_some() {
        cli.workers = workers;
    }
    let pool = worker_pool(cli.workers)?;
    let arts = pool.install(|| commands::dispatch(&cli.command))?;
    let mut mismatched = Vec::new();
    for (i, expected) in m.outputs.iter().enumerate() {
        let actual = FileDigest::of(&expected.path)?;
        if actual.sha256 != expected.sha256 || arts.outputs.get(i) != Some(&expected.path) {
            mismatched.push(expected.path.display().to_string());
        }
    }
    if arts.outputs.len() != m.outputs.len() || !mismatched.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "replay of {} differs from the recorded run: {}",
            path.display(),
            mismatched.join(", ")
        )));
    }
    println!("replay ok: {} output(s) identical", m.outputs.len());
    Ok(())
}
