//! Run configuration assembly.
//!
//! Every subcommand owns a table of keys. Values come from three layers:
//! built-in defaults, then an optional config file, then command-line
//! flags, with later layers winning. The effective configuration is
//! echoed to `config.txt` in the output directory before anything else
//! is written, and that echo is itself a valid `--config` file, so any
//! run can be repeated from its own artifacts.
//!
//! Config files are plain text: one `key value` pair per line, split at
//! the first space. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use envfield::field::FieldError;
use envfield::fmm::FmmError;
use envfield::grid2d::GridError;
use envfield::planner::PlannerError;
use envfield::scene3d::SceneError;

/// Environment variable that, when set, prefixes relative output paths.
pub const OUT_ROOT_VAR: &str = "ENVFIELD_OUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Fmm(#[from] FmmError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

/// One configurable key and its default; a `None` default marks the
/// key as required. Key help lives on the matching command-line flag.
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
}

impl KeySpec {
    pub const fn new(key: &'static str, default: &'static str) -> Self {
        KeySpec {
            key,
            default: Some(default),
        }
    }

    pub const fn required(key: &'static str) -> Self {
        KeySpec { key, default: None }
    }
}

/// Fully resolved configuration for one run: the subcommand name plus
/// every key of its table in table order.
#[derive(Debug)]
pub struct RunConfig {
    pub command: &'static str,
    entries: Vec<(&'static str, String)>,
}

/// Parses a config file body into `(key, value)` pairs.
fn parse_file(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = match line.split_once(' ') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, ""),
        };
        if key.is_empty() {
            return Err(CliError::config(format!(
                "{}: line {}: missing key",
                path.display(),
                idx + 1
            )));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Merges defaults, an optional config file and flag overrides.
    /// Unknown keys in either source are rejected, as are duplicate
    /// keys within the file; a key left without a value is an error.
    pub fn assemble(
        command: &'static str,
        keys: &[KeySpec],
        file: Option<&Path>,
        flags: Vec<(&'static str, Option<String>)>,
    ) -> Result<Self, CliError> {
        let mut values: Vec<(&'static str, Option<String>)> = keys
            .iter()
            .map(|k| (k.key, k.default.map(str::to_string)))
            .collect();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut seen: Vec<String> = Vec::new();
            for (key, value) in parse_file(&text, path)? {
                if seen.contains(&key) {
                    return Err(CliError::config(format!(
                        "{}: duplicate key {key:?}",
                        path.display()
                    )));
                }
                let slot = values.iter_mut().find(|(k, _)| *k == key).ok_or_else(|| {
                    CliError::config(format!(
                        "{}: unknown key {key:?} for {command}",
                        path.display()
                    ))
                })?;
                slot.1 = Some(value.clone());
                seen.push(key);
            }
        }
        for (key, flag) in flags {
            if let Some(value) = flag {
                let slot = values
                    .iter_mut()
                    .find(|(k, _)| *k == key)
                    .expect("flag key missing from key table");
                slot.1 = Some(value);
            }
        }
        let mut entries = Vec::with_capacity(values.len());
        for (key, value) in values {
            match value {
                Some(v) => entries.push((key, v)),
                None => {
                    return Err(CliError::config(format!(
                        "missing required key {key:?} for {command} (set --{key} or a config entry)"
                    )))
                }
            }
        }
        Ok(RunConfig { command, entries })
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .expect("unknown config key")
    }

    /// Like `get`, but treats the empty string as absent.
    pub fn opt(&self, key: &str) -> Option<&str> {
        let v = self.get(key);
        if v.is_empty() {
            None
        } else {
            Some(v)
        }
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse().map_err(|e| {
            CliError::config(format!("key {key:?}: cannot parse {raw:?}: {e}"))
        })
    }

    /// Key/value pairs in table order, for bench report headers.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// The echo text: a comment header naming the subcommand, then one
    /// `key value` line per entry. Parses back as a config file.
    pub fn echo_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# envfield {}", self.command).unwrap();
        for (key, value) in &self.entries {
            writeln!(out, "{key} {value}").unwrap();
        }
        out
    }

    /// Resolves the output directory: the `out` key, prefixed by
    /// `ENVFIELD_OUT_ROOT` when the path is relative and the variable
    /// is set.
    pub fn out_dir(&self) -> PathBuf {
        let out = PathBuf::from(self.get("out"));
        if out.is_relative() {
            if let Some(root) = std::env::var_os(OUT_ROOT_VAR) {
                return PathBuf::from(root).join(out);
            }
        }
        out
    }

    /// Creates the output directory and writes `config.txt` into it.
    /// Called before any other artifact so every output directory
    /// carries its own provenance.
    pub fn write_echo(&self) -> Result<PathBuf, CliError> {
        let dir = self.out_dir();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let path = dir.join("config.txt");
        fs::write(&path, self.echo_text()).map_err(|e| CliError::io(&path, e))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[KeySpec] = &[
        KeySpec::new("height", "9"),
        KeySpec::new("width", "9"),
        KeySpec::required("maze"),
        KeySpec::new("out", "out/demo"),
    ];

    fn flags(maze: Option<&str>, width: Option<&str>) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("height", None),
            ("width", width.map(str::to_string)),
            ("maze", maze.map(str::to_string)),
            ("out", None),
        ]
    }

    #[test]
    fn defaults_file_and_flags_layer_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.txt");
        fs::write(&file, "# comment\n\nwidth 12\nmaze data/m.txt\n").unwrap();
        let cfg =
            RunConfig::assemble("demo", KEYS, Some(&file), flags(None, Some("15"))).unwrap();
        assert_eq!(cfg.get("height"), "9");
        assert_eq!(cfg.get("width"), "15");
        assert_eq!(cfg.get("maze"), "data/m.txt");
        assert_eq!(cfg.parse::<usize>("width").unwrap(), 15);
    }

    #[test]
    fn missing_required_and_unknown_keys_are_rejected() {
        let err = RunConfig::assemble("demo", KEYS, None, flags(None, None)).unwrap_err();
        assert!(err.to_string().contains("maze"), "{err}");

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.txt");
        fs::write(&file, "depth 3\n").unwrap();
        let err = RunConfig::assemble("demo", KEYS, Some(&file), flags(Some("m"), None))
            .unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");

        fs::write(&file, "width 3\nwidth 4\n").unwrap();
        let err = RunConfig::assemble("demo", KEYS, Some(&file), flags(Some("m"), None))
            .unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn echo_round_trips_as_a_config_file() {
        let cfg =
            RunConfig::assemble("demo", KEYS, None, flags(Some("a b.txt"), None)).unwrap();
        let echo = cfg.echo_text();
        assert!(echo.starts_with("# envfield demo\n"));

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("config.txt");
        fs::write(&file, &echo).unwrap();
        let again = RunConfig::assemble("demo", KEYS, Some(&file), flags(None, None)).unwrap();
        assert_eq!(again.echo_text(), echo);
        // Values keep everything after the first space.
        assert_eq!(again.get("maze"), "a b.txt");
    }

    #[test]
    fn bad_parses_name_the_key() {
        let cfg =
            RunConfig::assemble("demo", KEYS, None, flags(Some("m"), Some("wide"))).unwrap();
        let err = cfg.parse::<usize>("width").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("width") && msg.contains("wide"), "{msg}");
    }
}
