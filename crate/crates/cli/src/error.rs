use std::io;
use std::path::{Path, PathBuf};

use psforge::descriptors::DescriptorError;
use psforge::evaluation::EvalError;
use psforge::patch::dataset::DatasetError;
use psforge::patch::image::ImageError;
use psforge::sampler::{PairListError, SamplerError};
use psforge::scene::SceneError;
use psforge::synth::SynthError;
use thiserror::Error;

/// Process exit codes. Usage and configuration problems share code 2 with
/// argument errors reported by the parser.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const INTEGRITY: i32 = 4;
    pub const ALIGNMENT: i32 = 5;
    pub const FORMAT: i32 = 6;
    pub const IO: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("alignment: {0}")]
    Alignment(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing image file {0}")]
    MissingImage(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Eval(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Scene(SceneError::Parse { .. }) | Self::Parse { .. } => exit::PARSE,
            Self::Scene(SceneError::Integrity(_)) | Self::Eval(_) => exit::INTEGRITY,
            Self::Scene(SceneError::Io { .. }) | Self::Io { .. } | Self::MissingImage(_) => exit::IO,
            Self::Alignment(_) => exit::ALIGNMENT,
            Self::Format { .. } => exit::FORMAT,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        Self::Format { path: path.to_path_buf(), message: message.to_string() }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        Self::Parse { path: path.to_path_buf(), message: message.to_string() }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Alignment(m) => Self::Alignment(m),
            other => Self::Eval(other.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidThresholds(m) => Self::Config(m),
            other => Self::Eval(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        Self::Config(e.to_string())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn descriptor_error(path: &Path, e: DescriptorError) -> CliError {
    CliError::format(path, e)
}

pub(crate) fn dataset_error(path: &Path, e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(source) => CliError::io(path, source),
        other => CliError::format(path, other),
    }
}

pub(crate) fn image_error(path: &Path, e: ImageError) -> CliError {
    CliError::format(path, e)
}

pub(crate) fn pair_list_error(path: &Path, e: PairListError) -> CliError {
    CliError::parse(path, e)
}
