use crate::{BuildOptions, Failure, USAGE};
use serde::Deserialize;
use std::path::Path;

/// `[build]` table of a config file. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Build {
    period: Option<u32>,
    k: Option<u32>,
    max_step: Option<u32>,
    bidirectional: Option<bool>,
    accumulators: Option<u32>,
    cell_size: Option<f64>,
    bucket_seconds: Option<f64>,
    max_speed: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    build: Build,
}

pub(crate) struct Config(Build);

pub(crate) fn load(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
    let f: File = toml::from_str(&text)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
    Ok(Config(f.build))
}

impl Config {
    /// Fills every option not given on the command line.
    pub fn merge_under(self, flags: BuildOptions) -> BuildOptions {
        let c = self.0;
        BuildOptions {
            period: flags.period.or(c.period),
            k: flags.k.or(c.k),
            max_step: flags.max_step.or(c.max_step),
            bidirectional: flags.bidirectional || c.bidirectional.unwrap_or(false),
            accumulators: flags.accumulators.or(c.accumulators),
            cell_size: flags.cell_size.or(c.cell_size),
            bucket_seconds: flags.bucket_seconds.or(c.bucket_seconds),
            max_speed: flags.max_speed.or(c.max_speed),
        }
    }
}
