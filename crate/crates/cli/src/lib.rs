//! Command-line front end for the chemolab simulator: scenario files,
//! the run/threshold/analyze-weight/convergence commands, and their
//! on-disk artifacts.

pub mod commands;
pub mod config;
pub mod convergence;
pub mod error;
pub mod output;

pub use commands::{
    cmd_analyze_weight, cmd_convergence, cmd_run, cmd_threshold, EXIT_BLOWUP, EXIT_CHECK_FAILED,
    EXIT_ERROR, EXIT_OK,
};
pub use config::{parse_config, parse_config_str, ResolvedConfig};
pub use error::{CliError, ConfigError};

/// Environment variable that, when set, replaces `--out`.
pub const OUT_ENV: &str = "CHEMOLAB_OUT";

/// Output directory: the environment variable wins over the flag.
pub fn resolve_out_dir(
    flag: Option<&std::path::Path>,
    env: Option<std::ffi::OsString>,
) -> Option<std::path::PathBuf> {
    match env {
        Some(v) if !v.is_empty() => Some(v.into()),
        _ => flag.map(|p| p.to_path_buf()),
    }
}
