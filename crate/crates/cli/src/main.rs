//! `basin-forge`: compile Turing machines into flows, simulate and sweep
//! them, and compute planar basins of attraction.

mod compile;
mod failure;
mod planar;
mod render;
mod simulate;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use failure::Failure;

#[derive(Parser)]
#[command(name = "basin-forge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a machine file into a field manifest.
    Compile(compile::CompileArgs),
    /// Integrate a full-stage field from an input and track the machine.
    Simulate(simulate::SimulateArgs),
    /// Compare perturbed-map basin membership with the machine over a range of inputs.
    Sweep(sweep::SweepArgs),
    /// Compute the basin of a sink of a planar field.
    Planar(planar::PlanarArgs),
    /// Convert a PGM raster to PNG.
    Render(render::RenderArgs),
}

/// Fills every unset option of `flags` from the JSON run manifest at
/// `path`; flags given on the command line win.
macro_rules! overlay {
    ($flags:expr, $($field:ident),+ $(,)?) => {{
        let mut flags = $flags;
        if let Some(path) = flags.manifest.take() {
            let file: Self = crate::read_json(&path)?;
            $(if flags.$field.is_none() { flags.$field = file.$field; })+
        }
        Ok::<Self, crate::failure::Failure>(flags)
    }};
}
pub(crate) use overlay;

pub(crate) fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

pub(crate) fn required<T>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::invalid(format!("missing required option --{name}")))
}

/// `path` as given if it exists, otherwise relative to `base`'s directory.
pub(crate) fn resolve_near(path: &Path, base: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    base.parent().map_or_else(|| path.to_path_buf(), |dir| dir.join(path))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("BASIN_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::invalid(format!("BASIN_FORGE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Compile(a) => compile::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Planar(a) => planar::run(a),
        Command::Render(a) => render::run(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
