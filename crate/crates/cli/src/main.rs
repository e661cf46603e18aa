//! `morphogen`: grow meshes from genomes, render the random gallery, run
//! the canopy evolution experiment and check artifacts.
//!
//! Exit codes: 0 success, 1 usage error, 2 input validation failure,
//! 3 runtime failure.

mod commands;
mod failure;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{EvolveArgs, GalleryArgs, GrowArgs, ValidateArgs};
use failure::{Classify, Failure};
use settings::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "morphogen", version, about = "Neural-cellular mesh growth")]
struct Cli {
    /// Key = value settings file, or a manifest from an earlier run.
    /// Flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grow one genome and write the mesh, its statistics and a manifest.
    Grow(GrowArgs),
    /// Grow a run of random genomes with sequential seeds.
    Gallery(GalleryArgs),
    /// Evolve genomes against the canopy fitness.
    Evolve(EvolveArgs),
    /// Check an OBJ mesh or a genome file.
    Validate(ValidateArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path).input()?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Grow(args) => commands::grow_cmd(args, &file),
        Command::Gallery(args) => commands::gallery_cmd(args, &file),
        Command::Evolve(args) => commands::evolve_cmd(args, &file),
        Command::Validate(args) => commands::validate_cmd(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("morphogen: {f}");
            f.exit_code()
        }
    }
}
