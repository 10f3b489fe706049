//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use psforge::mining::DEFAULT_MARGIN;
use psforge::patch::dataset::PATCH_FORMAT_VERSION;
use psforge::patch::RotationConvention;
use psforge::sampler::{SamplingThresholds, ScaleClamp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_text, CliError};

pub const THREADS_ENV: &str = "PSFORGE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with `cameras.txt`, `images.txt` and `points3D.txt`.
    pub scene: Option<PathBuf>,
    /// Directory holding the PGM/PPM files named by the scene.
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub thresholds: SamplingThresholds,
    pub scale_clamp: ScaleClamp,
    pub rotation_convention: RotationConvention,
    pub margin: f64,
    pub seed: u64,
    /// Worker threads; does not affect any output.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            images: None,
            out: None,
            thresholds: SamplingThresholds::default(),
            scale_clamp: ScaleClamp::default(),
            rotation_convention: RotationConvention::default(),
            margin: DEFAULT_MARGIN,
            seed: 0,
            threads: None,
        }
    }
}

/// Flag values that override the config file when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scene: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub sc_th: Option<f64>,
    pub min_v_th: Option<f64>,
    pub max_v_th: Option<f64>,
    pub margin: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Fields that determine the outputs; hashed into the manifest.
#[derive(Serialize)]
struct Hashed<'a> {
    format_version: u16,
    scene: Option<&'a Path>,
    images: Option<&'a Path>,
    thresholds: &'a SamplingThresholds,
    scale_clamp: &'a ScaleClamp,
    rotation_convention: RotationConvention,
    margin: f64,
    seed: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read_text(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.scene {
            self.scene = Some(p.clone());
        }
        if let Some(p) = &o.images {
            self.images = Some(p.clone());
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(v) = o.sc_th {
            self.thresholds.sc_th = v;
        }
        if let Some(v) = o.min_v_th {
            self.thresholds.min_v_th = v;
        }
        if let Some(v) = o.max_v_th {
            self.thresholds.max_v_th = v;
        }
        if let Some(v) = o.margin {
            self.margin = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.thresholds.validate()?;
        let c = &self.scale_clamp;
        if !(c.min > 0.0 && c.min <= c.max && c.max.is_finite()) {
            return Err(CliError::Config("scale clamp must satisfy 0 < min <= max".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(CliError::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the output-relevant fields in canonical JSON.
    pub fn hash(&self) -> String {
        let h = Hashed {
            format_version: PATCH_FORMAT_VERSION,
            scene: self.scene.as_deref(),
            images: self.images.as_deref(),
            thresholds: &self.thresholds,
            scale_clamp: &self.scale_clamp,
            rotation_convention: self.rotation_convention,
            margin: self.margin,
            seed: self.seed,
        };
        let json = serde_json::to_vec(&h).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Thread count from the flag, then the environment; `None` leaves the
/// choice to rayon.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn thread_pool(flag: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = resolve_threads(flag)? {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}
