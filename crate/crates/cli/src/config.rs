//! Flat key=value configuration with flags-beat-file-beats-defaults
//! precedence.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Text => "text",
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Cap on the database exponent for state-vector runs.
    pub n_cap: u32,
    /// Improvement margin in probability units.
    pub margin: f64,
    /// Absolute tolerance for table diffs, in probability units.
    pub tolerance: f64,
    pub format: Option<OutputFormat>,
    /// Rayon thread-pool size hint.
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n_cap: qpartial_core::DEFAULT_N_CAP,
            margin: qpartial_core::optimizer::DEFAULT_MARGIN,
            tolerance: 1e-7,
            format: None,
            threads: None,
            seed: None,
        }
    }
}

impl Config {
    /// Parse a flat `key = value` file. Lines starting with `#` and blank
    /// lines are ignored; unknown keys are errors.
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut config = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let context = || format!("{}:{}: bad value for {key}", path.display(), lineno + 1);
            match key {
                "n_cap" => config.n_cap = value.parse().with_context(context)?,
                "margin" => config.margin = value.parse().with_context(context)?,
                "tolerance" => config.tolerance = value.parse().with_context(context)?,
                "format" => {
                    config.format = Some(match value {
                        "text" => OutputFormat::Text,
                        "json" => OutputFormat::Json,
                        "csv" => OutputFormat::Csv,
                        other => bail!(
                            "{}:{}: unknown format {other:?} (text, json or csv)",
                            path.display(),
                            lineno + 1
                        ),
                    })
                }
                "threads" => config.threads = Some(value.parse().with_context(context)?),
                "seed" => config.seed = Some(value.parse().with_context(context)?),
                other => bail!("{}:{}: unknown key {other:?}", path.display(), lineno + 1),
            }
        }
        Ok(config)
    }
}
