//! `key=value` configuration files. Keys are the long flag names without the
//! leading dashes; flags given on the command line win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const KEYS: &[&str] = &[
    "d",
    "r",
    "L",
    "model",
    "p",
    "pc-ref",
    "replicas",
    "seed",
    "budget",
    "threads",
    "out",
    "format",
    "no-header-meta",
    "k",
    "origins",
    "delta",
    "eps",
    "n",
    "reps",
    "window-factor",
    "steps",
    "k-max",
    "replica",
    "vertex",
];

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(format!("config line {}: unknown key '{key}'", i + 1));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// The flag value if present, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| format!("config key '{key}': cannot parse '{v}'")),
        }
    }

    /// Comma-separated lists; an empty flag list defers to the config.
    pub fn pick_list<T: FromStr>(&self, flag: Vec<T>, key: &str) -> Result<Vec<T>, String> {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| format!("config key '{key}': cannot parse '{s}'")))
                .collect(),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, String> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let c = Config::parse("# grid\nd = 7\nr=4,5,6\npc-ref=true\n").unwrap();
        assert_eq!(c.pick::<usize>(None, "d").unwrap(), Some(7));
        assert_eq!(c.pick(Some(3usize), "d").unwrap(), Some(3));
        assert_eq!(c.pick_list::<u64>(vec![], "r").unwrap(), vec![4, 5, 6]);
        assert!(c.flag(false, "pc-ref").unwrap());
        assert!(Config::parse("bogus=1").is_err());
        assert!(Config::parse("d").is_err());
        assert!(c.pick::<u64>(None, "seed").unwrap().is_none());
    }
}
