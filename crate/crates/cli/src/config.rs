//! `key = value` config files with `[section]` headers and `#` comments.

use std::collections::BTreeMap;
use std::path::Path;

use biascorr::{Error, Result};

const KEYS: &[(&str, &[&str])] = &[
    ("dgp", &["name", "n", "T", "theta", "sigma"]),
    (
        "experiment",
        &[
            "reps",
            "seed",
            "estimators",
            "bootstrap-B",
            "levels",
            "null",
            "workers",
        ],
    ),
    (
        "solver",
        &["score_tol", "step_tol", "max_iter", "max_halvings"],
    ),
    ("output", &["out-dir", "format"]),
];

/// Values keyed by `section.key`.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                let Some((known, _)) = KEYS.iter().find(|(s, _)| *s == name) else {
                    return Err(at(format!("unknown section [{name}]")));
                };
                section = Some(known);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(at(format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            let Some(sec) = section else {
                return Err(at(format!("`{key}` appears before any section")));
            };
            let allowed = KEYS
                .iter()
                .find(|(s, _)| *s == sec)
                .map(|(_, k)| *k)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(at(format!("unknown key `{key}` in [{sec}]")));
            }
            values.insert(format!("{sec}.{key}"), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("invalid value `{v}` for {key}")))
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = Config::parse(
            "# design\n[dgp]\nname = panel-probit-serial\nn = 100  # units\nT=8\n\n[experiment]\nreps = 10\n",
        )
        .unwrap();
        assert_eq!(c.get("dgp.name"), Some("panel-probit-serial"));
        assert_eq!(c.parsed::<usize>("dgp.n").unwrap(), Some(100));
        assert_eq!(c.parsed::<usize>("dgp.T").unwrap(), Some(8));
        assert_eq!(c.parsed::<usize>("experiment.reps").unwrap(), Some(10));
        assert_eq!(c.get("experiment.seed"), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(Config::parse("[dgp]\nbogus = 1\n").is_err());
        assert!(Config::parse("[nope]\n").is_err());
        assert!(Config::parse("n = 1\n").is_err());
        assert!(Config::parse("[dgp]\njust words\n").is_err());
        let c = Config::parse("[dgp]\nn = many\n").unwrap();
        assert!(c.parsed::<usize>("dgp.n").is_err());
    }
}
