//! Key-value config file and flag resolution.
//!
//! The file holds `key = value` lines; `#` starts a comment. A value given on
//! the command line wins over the file, which wins over the built-in default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Keys a config file may set.
pub const KEYS: [&str; 11] = [
    "quality",
    "size",
    "seed",
    "ratios",
    "epochs",
    "batch",
    "lr",
    "threshold",
    "beta",
    "deterministic",
    "enhance",
];

/// Bad invocation: unknown flag values, malformed config. Maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| UsageError(format!("config key {key}: {raw:?}: {e}"))),
            None => Ok(default),
        }
    }

    /// Boolean switch: the flag can only turn it on.
    pub fn switch(&self, key: &str, flag: bool, default: bool) -> Result<bool, UsageError> {
        self.resolve(key, flag.then_some(true), default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let cfg = ConfigFile::parse("# run settings\nseed = 7\nlr=0.01  # faster\n\n").unwrap();
        assert_eq!(cfg.resolve("seed", Some(3u64), 42).unwrap(), 3);
        assert_eq!(cfg.resolve("seed", None, 42u64).unwrap(), 7);
        assert_eq!(cfg.resolve("epochs", None, 20usize).unwrap(), 20);
        assert_eq!(cfg.resolve("lr", None, 1e-4f64).unwrap(), 0.01);
    }

    #[test]
    fn switches() {
        let cfg = ConfigFile::parse("deterministic = true").unwrap();
        assert!(cfg.switch("deterministic", false, false).unwrap());
        assert!(ConfigFile::default().switch("deterministic", true, false).unwrap());
        assert!(!ConfigFile::default().switch("deterministic", false, false).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(ConfigFile::parse("seed 7").is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        let cfg = ConfigFile::parse("epochs = many").unwrap();
        assert!(cfg.resolve("epochs", None, 1usize).is_err());
    }
}
