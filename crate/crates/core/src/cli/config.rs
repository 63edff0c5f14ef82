use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CliError, OutputFormat};

/// Options read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub state: Option<String>,
    pub parties: Option<usize>,
    pub dicke_n: Option<usize>,
    pub copies: Option<usize>,
    pub inequality: Option<String>,
    pub no_ssr: Option<bool>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
