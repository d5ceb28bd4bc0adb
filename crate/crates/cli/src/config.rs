//! Merging command-line flags over a `key = value` configuration file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use histsel::output::parse_key_values;

use crate::CliError;

/// Values read from a configuration file, consumed key by key so unknown
/// keys can be reported.
#[derive(Debug, Default)]
pub struct FileValues {
    source: String,
    values: BTreeMap<String, String>,
}

impl FileValues {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let entries = parse_key_values(text).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
        Ok(Self {
            source: source.to_string(),
            values: entries.into_iter().collect(),
        })
    }

    /// The flag value if given, else the file value, else `default`.
    pub fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|raw| {
                raw.parse()
                    .map_err(|e| CliError::Config(format!("{}: bad value `{raw}` for {key}: {e}", self.source)))
            })
            .transpose()
    }

    /// Drops keys that are informational only.
    pub fn ignore(&mut self, keys: &[&str]) {
        for k in keys {
            self.values.remove(*k);
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self.values.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Config(format!("{}: unknown key `{k}`", self.source))),
        }
    }
}

/// Parses `a..b` (inclusive) or a comma-separated list.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("bad range end: {e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("bad k `{x}`: {e}")))
        .collect()
}

pub fn parse_p_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("bad p `{x}`: {e}")))
        .collect()
}
