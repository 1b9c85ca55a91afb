use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] paratensor::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("hard check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use paratensor::Error as E;
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Core(E::Io { .. } | E::Format { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Echoed into the JSON metadata of every artifact.
#[derive(Debug, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub map: Option<String>,
    pub scales: Option<Vec<usize>>,
    pub lambda: Option<String>,
    pub seed: Option<u64>,
    pub ordering: Option<String>,
    pub ks: Option<Vec<usize>>,
    pub center_means: bool,
    pub retain_terms: bool,
    /// Subcommand-specific settings.
    pub extra: serde_json::Value,
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable metadata");
    text.push('\n');
    write_text(path, &text)
}

/// `decay.csv` -> `decay.meta.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}
