//! Command-line front end: kernel expansions, configuration-driven
//! suites, and transform-cache management.
//!
//! Exit codes: 0 on success, 1 on numerical failure (an unconverged
//! quadrature or a violated verified property), 2 on configuration
//! errors (unparseable or invalid files, caps exceeded, usage errors).

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use uqft::cache::{TransformCache, CACHE_DIR_ENV};
use uqft::config::{execute_run, RunError};
use uqft_core::combinatorics::Caps;
use uqft_core::kernel::{assemble_w, render};

#[derive(Parser)]
#[command(
    name = "uqft",
    version,
    about = "Revised Wightman-functionals for a neutral scalar field: kernel expansions, \
             Gram/positivity suites, scattering and cluster scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the n-point kernel expansion.
    Expand {
        /// Number of field slots n.
        #[arg(long)]
        n: usize,
        /// Output rendering.
        #[arg(long, value_enum, default_value_t = ExpandFormat::Abbrev)]
        format: ExpandFormat,
    },
    /// Execute the suite a configuration file describes and write its
    /// result files plus a run manifest.
    Run {
        /// Path to the TOML run configuration.
        config: PathBuf,
    },
    /// Manage the on-disk shell-transform cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpandFormat {
    /// Bracket notation with ordering-weight sums.
    Abbrev,
    /// Structured JSON.
    Json,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print the entry count and total size.
    Stat {
        /// Cache directory (the environment variable takes precedence).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Remove every cache entry.
    Clear {
        /// Cache directory (the environment variable takes precedence).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Expand { n, format } => cmd_expand(n, format),
        Command::Run { config } => cmd_run(&config),
        Command::Cache { action } => cmd_cache(action),
    }
}

fn cmd_expand(n: usize, format: ExpandFormat) -> ExitCode {
    match assemble_w(n, &Caps::default()) {
        Ok(list) => {
            match format {
                ExpandFormat::Abbrev => println!("{}", render::render_abbrev(&list)),
                ExpandFormat::Json => println!("{}", render::render_json(&list)),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("uqft expand: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(config: &std::path::Path) -> ExitCode {
    match execute_run(config) {
        Ok(outcome) => {
            for path in &outcome.outputs {
                println!("{}", path.display());
            }
            println!("{}", outcome.manifest.display());
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("uqft run: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("uqft run: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_cache(action: CacheAction) -> ExitCode {
    let dir = match &action {
        CacheAction::Stat { dir } | CacheAction::Clear { dir } => dir.as_deref(),
    };
    let Some(cache) = TransformCache::resolve(dir) else {
        eprintln!("uqft cache: no cache directory (pass --dir or set {CACHE_DIR_ENV})");
        return ExitCode::from(2);
    };
    let result = match action {
        CacheAction::Stat { .. } => cache.stat().map(|stat| {
            println!(
                "{} entries, {} bytes in {}",
                stat.entries,
                stat.bytes,
                cache.dir().display()
            );
        }),
        CacheAction::Clear { .. } => cache.clear().map(|removed| {
            println!("removed {} entries from {}", removed, cache.dir().display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uqft cache: {e}");
            ExitCode::from(1)
        }
    }
}
