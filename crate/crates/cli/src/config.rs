//! Flat `key = value` run configuration with strict key checking.
//!
//! A config is assembled from an optional file plus repeated `--set KEY=VALUE`
//! overrides. Lines starting with `#` are comments. Keys may be dotted
//! (`alpha.schedule`). Every key must be consumed by the command that runs;
//! leftovers are reported with their source location so typos and
//! inapplicable settings fail loudly instead of being ignored.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Where the value came from, e.g. `run.cfg:12` or `--set`.
    origin: String,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    used: RefCell<Vec<String>>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-')
}

impl Config {
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Config, CliError> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (idx, line) in text.lines().enumerate() {
                let origin = format!("{}:{}", path.display(), idx + 1);
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                    CliError::Config(format!("{origin}: expected `key = value`, got {trimmed:?}"))
                })?;
                let key = key.trim();
                let value = value.trim();
                if !valid_key(key) {
                    return Err(CliError::Config(format!(
                        "{origin}: invalid key {key:?} (letters, digits, `.`, `_`, `-`)"
                    )));
                }
                if let Some(prev) = entries.insert(
                    key.to_string(),
                    Entry {
                        value: value.to_string(),
                        origin: origin.clone(),
                    },
                ) {
                    return Err(CliError::Config(format!(
                        "{origin}: key `{key}` already set at {}",
                        prev.origin
                    )));
                }
            }
        }
        for set in sets {
            let (key, value) = set.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--set needs KEY=VALUE, got {set:?}"))
            })?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(CliError::Config(format!("--set: invalid key {key:?}")));
            }
            // Overrides replace file values; the last --set wins.
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin: "--set".to_string(),
                },
            );
        }
        Ok(Config {
            entries,
            used: RefCell::new(Vec::new()),
        })
    }

    fn mark(&self, key: &str) {
        self.used.borrow_mut().push(key.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Raw string lookup. Consumes the key.
    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.mark(key);
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, key: &str) -> Result<&str, CliError> {
        self.get_str(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn typed<T>(&self, key: &str, what: &str) -> Result<Option<T>, CliError>
    where
        T: std::str::FromStr,
    {
        self.mark(key);
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                CliError::Config(format!(
                    "key `{key}` at {}: expected {what}, got {:?}",
                    e.origin, e.value
                ))
            }),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.typed::<f64>(key, "a number")?.unwrap_or(default))
    }

    pub fn get_f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.typed::<f64>(key, "a number")
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self
            .typed::<usize>(key, "a nonnegative integer")?
            .unwrap_or(default))
    }

    pub fn get_usize_opt(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.typed::<usize>(key, "a nonnegative integer")
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self
            .typed::<u64>(key, "a nonnegative integer")?
            .unwrap_or(default))
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        self.mark(key);
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(CliError::Config(format!(
                    "key `{key}` at {}: expected true or false, got {other:?}",
                    e.origin
                ))),
            },
        }
    }

    /// Comma-separated positive integers, e.g. hidden layer widths. An empty
    /// value means an empty list.
    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        self.mark(key);
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(e) if e.value.is_empty() => Ok(Vec::new()),
            Some(e) => e
                .value
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|_| {
                        CliError::Config(format!(
                            "key `{key}` at {}: expected comma-separated integers, got {:?}",
                            e.origin, e.value
                        ))
                    })
                })
                .collect(),
        }
    }

    /// Every key must have been consumed by now; anything left is a typo or a
    /// setting the command does not use.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.iter().any(|u| u == *k))
            .map(|(k, e)| format!("`{k}` at {}", e.origin))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown or unused key(s): {}",
                unknown.join(", ")
            )))
        }
    }
}

/// The effective settings of a run, written next to its outputs so the run
/// can be repeated from the artifact directory alone.
#[derive(Debug, Default)]
pub struct Resolved {
    pairs: Vec<(String, String)>,
}

impl Resolved {
    pub fn put(&mut self, key: &str, value: impl Display) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn put_list(&mut self, key: &str, values: &[usize]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.pairs.push((key.to_string(), joined));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = String::from("# Resolved configuration; rerunning with this file repeats the run.\n");
        for (k, v) in &self.pairs {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_comments_blanks_and_dotted_keys() {
        let f = file_with("# run settings\n\nepochs = 2000\nalpha.schedule = linear\n");
        let cfg = Config::load(Some(f.path()), &[]).unwrap();
        assert_eq!(cfg.get_usize("epochs", 0).unwrap(), 2000);
        assert_eq!(cfg.get_str("alpha.schedule"), Some("linear"));
        cfg.finish().unwrap();
    }

    #[test]
    fn type_error_names_key_and_line() {
        let f = file_with("# comment\nepochs = soon\n");
        let cfg = Config::load(Some(f.path()), &[]).unwrap();
        let err = cfg.get_usize("epochs", 0).unwrap_err();
        let CliError::Config(msg) = err else {
            panic!("expected config error")
        };
        assert!(msg.contains("`epochs`"), "{msg}");
        assert!(msg.contains(":2"), "{msg}");
        assert!(msg.contains("soon"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let f = file_with("epochs = 5\nbogus_key = 1\n");
        let cfg = Config::load(Some(f.path()), &[]).unwrap();
        cfg.get_usize("epochs", 0).unwrap();
        let CliError::Config(msg) = cfg.finish().unwrap_err() else {
            panic!("expected config error")
        };
        assert!(msg.contains("`bogus_key`"), "{msg}");
        assert!(msg.contains(":2"), "{msg}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let f = file_with("seed = 1\nseed = 2\n");
        let err = Config::load(Some(f.path()), &[]).unwrap_err();
        let CliError::Config(msg) = err else {
            panic!("expected config error")
        };
        assert!(msg.contains("`seed`"), "{msg}");
    }

    #[test]
    fn set_overrides_file_values() {
        let f = file_with("seed = 1\n");
        let cfg = Config::load(Some(f.path()), &["seed=7".to_string()]).unwrap();
        assert_eq!(cfg.get_u64("seed", 0).unwrap(), 7);
        cfg.finish().unwrap();
    }

    #[test]
    fn malformed_lines_and_sets_are_rejected_cleanly() {
        let f = file_with("this is not a setting\n");
        assert!(Config::load(Some(f.path()), &[]).is_err());
        assert!(Config::load(None, &["no-equals".to_string()]).is_err());
    }

    #[test]
    fn resolved_round_trips_through_the_parser() {
        let mut r = Resolved::default();
        r.put("epochs", 300usize);
        r.put("student.lr", 0.001f64);
        r.put_list("student.hidden", &[50, 20]);
        let f = tempfile::NamedTempFile::new().unwrap();
        r.write(f.path()).unwrap();
        let cfg = Config::load(Some(f.path()), &[]).unwrap();
        assert_eq!(cfg.get_usize("epochs", 0).unwrap(), 300);
        assert_eq!(cfg.get_f64("student.lr", 0.0).unwrap(), 0.001);
        assert_eq!(cfg.get_usize_list("student.hidden", &[]).unwrap(), vec![50, 20]);
        cfg.finish().unwrap();
    }
}
