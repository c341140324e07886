//! Command-line front-end for the `imdd-core` link toolkit.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::Path;

pub use args::{Cli, Command};
pub use error::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn stdout(contents: &str) -> Result<(), CliError> {
    std::io::stdout()
        .write_all(contents.as_bytes())
        .map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Sweep(a) => {
            let r = a.load()?.resolve()?;
            let out = commands::cmd_sweep(&r)?;
            match &r.outputs.csv {
                Some(p) => write_file(p, &out.csv)?,
                None => stdout(&out.csv)?,
            }
            if let Some(p) = &r.outputs.json {
                write_file(p, &out.json)?;
            }
            if out.all_failed {
                return Err(CliError::AllPointsFailed(out.results.len()));
            }
        }
        Command::Thresholds(a) => {
            let r = a.load()?.resolve()?;
            let out = commands::cmd_thresholds(&r)?;
            stdout(&out.table)?;
            if let Some(p) = &r.outputs.json {
                write_file(p, &out.json)?;
            }
        }
        Command::Optimize(a) => {
            let r = a.load()?.resolve()?;
            let out = commands::cmd_optimize(&r)?;
            stdout(&out.summary)?;
            if let Some(p) = &r.outputs.constellation {
                write_file(p, &out.constellation_json)?;
            }
            if let Some(p) = &r.outputs.json {
                write_file(p, &out.json)?;
            }
        }
    }
    Ok(())
}
