//! Configuration, dispatch and CSV/JSONL emission for the `weakval` command.
//!
//! The binary is a thin wrapper: parse a [`config::RunConfig`], apply
//! [`config::Overrides`] from flags, [`config::RunConfig::finalize`] the
//! defaults, then [`dispatch::execute`] and write
//! [`dispatch::Execution::render`].

#![forbid(unsafe_code)]

pub mod config;
pub mod dispatch;
pub mod emit;
pub mod error;
pub mod row;

pub use config::{parse_config, Format, Overrides, RunConfig};
pub use dispatch::{execute, execute_sweep, Execution};
pub use error::CliError;
pub use row::{ResultRow, Value, COLUMNS};

/// Parses, overrides and finalizes a configuration document. `text` may be
/// empty when everything comes from flags.
pub fn load(
    text: &str,
    overrides: &Overrides,
    env_seed: Option<u64>,
) -> Result<RunConfig, CliError> {
    let mut config = parse_config(text)?;
    config.apply(overrides);
    config.finalize(env_seed);
    Ok(config)
}
