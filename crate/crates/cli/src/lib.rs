//! Command implementations behind the `flowerperc` binary.

pub mod commands;
pub mod config;
pub mod output;

use anyhow::Result;

use config::{Cli, RunConfig};

/// Resolves `cli` against the environment, runs the command and writes its
/// report.
pub fn execute(cli: Cli) -> Result<()> {
    let cfg = RunConfig::from_env(cli)?;
    let report = commands::run(&cfg)?;
    output::emit(&report, &cfg)
}
