//! Library side of the `psforge` command: configuration, the subcommands and
//! their error classes. The binary only parses arguments and maps errors to
//! exit codes.

pub mod build;
pub mod config;
pub mod error;
pub mod eval;
pub mod stats;
pub mod synth;

pub use build::{cmd_build, BuildOutput};
pub use config::{Overrides, RunConfig};
pub use error::CliError;
pub use eval::{cmd_eval, EvalArgs, EvalTask};
pub use stats::{cmd_stats, DatasetStats};
pub use synth::cmd_gen_synth;
