//! Option resolution: command line, then a key=value file, then defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const KEYS: &[&str] = &[
    "s", "m", "x", "primes", "cache", "format", "threads", "mem-cap", "override", "conjectural", "out", "p", "class",
    "n", "delta", "d",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value, got `{raw}`", i + 1))?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(format!("config line {}: unknown key `{k}`", i + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Value for `key`: the command-line one if given, else the file's.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| format!("config key `{key}`: {e}")),
        }
    }

    pub fn flag(&self, cli: bool, key: &str) -> Result<bool, String> {
        if cli {
            return Ok(true);
        }
        match self.values.get(key).map(String::as_str) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(format!("config key `{key}`: expected true/false, got `{v}`")),
        }
    }

    pub fn counts(&self, cli: Option<Vec<u64>>, key: &str) -> Result<Option<Vec<u64>>, String> {
        if cli.is_some() {
            return Ok(cli);
        }
        self.values.get(key).map(|v| v.split(',').map(parse_count).collect()).transpose()
    }
}

/// Accepts `100000`, `1e5` or `10^5`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    if let Some((b, e)) = s.split_once('^') {
        let b: u64 = b.parse().map_err(|_| format!("bad count `{s}`"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad count `{s}`"))?;
        return b.checked_pow(e).ok_or_else(|| format!("count `{s}` overflows"));
    }
    let f: f64 = s.parse().map_err(|_| format!("bad count `{s}`"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("count `{s}` is not a nonnegative integer"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e5"), Ok(100_000));
        assert_eq!(parse_count("10^4"), Ok(10_000));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn precedence() {
        let c = ConfigFile::parse("# run\nprimes = 1000\noverride=true\n").unwrap();
        assert_eq!(c.pick(Some(5u64), "primes").unwrap(), Some(5));
        assert_eq!(c.pick(None::<u64>, "primes").unwrap(), Some(1000));
        assert_eq!(c.pick(None::<u64>, "m").unwrap(), None);
        assert!(c.flag(false, "override").unwrap());
        assert!(ConfigFile::parse("bogus=1").is_err());
        assert!(ConfigFile::parse("primes").is_err());
    }
}
