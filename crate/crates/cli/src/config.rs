//! Flat `key = value` configuration files mirroring the command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use qc_chain::QcError;

pub const KEYS: [&str; 10] = [
    "n",
    "alpha",
    "big-f",
    "scheme",
    "max-dof",
    "out-dir",
    "seed",
    "full-scale",
    "k-atoms",
    "mesh",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Blank lines and `#` comments are ignored; `_` in keys reads as `-`.
    pub fn parse(text: &str) -> Result<Self, QcError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| QcError::Parse {
                line: i + 1,
                detail: format!("expected key = value, got '{line}'"),
            })?;
            let key = k.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(QcError::Parse {
                    line: i + 1,
                    detail: format!("unknown key '{key}'"),
                });
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, QcError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, QcError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| QcError::InvalidParameter(format!("config key '{key}' = '{v}': {e}")))
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs() {
        let c = ConfigFile::parse("# run\nn = 129\nbig_f=1.1\n\nscheme = energy # trailing\n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), Some(129));
        assert_eq!(c.get::<f64>("big-f").unwrap(), Some(1.1));
        assert_eq!(c.get::<String>("scheme").unwrap().as_deref(), Some("energy"));
        assert_eq!(c.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(ConfigFile::parse("n 3"), Err(QcError::Parse { line: 1, .. })));
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("n = many").unwrap().get::<usize>("n").is_err());
    }
}
