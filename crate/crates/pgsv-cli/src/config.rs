//! Key=value config files. Every long flag has a config key of the same
//! name; values given on the command line win over the file.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct ConfigMap {
    values: HashMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {} is not key=value: {line:?}", i + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Parsed value for `key`, or an error naming the key on bad syntax.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key {key}={raw:?} is not a valid value")),
        }
    }
}

/// Flag value if present, else the config file's, else `default`.
pub fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
    problems: &mut Vec<String>,
) -> T {
    resolve_opt(flag, cfg, key, problems).unwrap_or(default)
}

/// Flag value if present, else the config file's, else `None`.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    problems: &mut Vec<String>,
) -> Option<T> {
    if flag.is_some() {
        return flag;
    }
    match cfg.get::<T>(key) {
        Ok(v) => v,
        Err(e) => {
            problems.push(e);
            None
        }
    }
}
