//! TOML run configs: loading, path resolution and the effective-config echo.
//!
//! Every command reads an optional TOML file into its typed config (unknown
//! keys are rejected), then applies command-line flags on top. Relative paths
//! inside a config file are taken relative to that file's directory; paths
//! given as flags are relative to the working directory. All paths are made
//! absolute before a command runs, so the echoed config can be re-run from
//! anywhere. The top-level `outdir` key is shared by all commands and handled
//! here, as is the `command` key of an echoed config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use sbm_core::{Result, SbmError};

/// Name of the effective-config echo written into every output directory.
pub const ECHO_FILE: &str = "effective_config.toml";

pub const DEFAULT_OUTDIR: &str = "out";

pub struct Loaded<T> {
    pub config: T,
    /// `outdir` from the file, already resolved.
    pub outdir: Option<PathBuf>,
    /// Directory that relative paths in the file are resolved against.
    pub base: PathBuf,
}

/// Loads `path` for `command`. A `command` key (as written into the echo)
/// must name the running command, so an echoed config can be re-run as is.
pub fn load<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    command: &str,
) -> Result<Loaded<T>> {
    let Some(path) = path else {
        return Ok(Loaded {
            config: T::default(),
            outdir: None,
            base: PathBuf::new(),
        });
    };
    let text = fs::read_to_string(path).map_err(|source| SbmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut table: toml::Table = toml::from_str(&text)
        .map_err(|e| SbmError::config("config", format!("{}: {e}", path.display())))?;
    match table.remove("command") {
        None => {}
        Some(toml::Value::String(c)) if c == command => {}
        Some(other) => {
            return Err(SbmError::config(
                "command",
                format!("config was written for {other}, not `{command}`"),
            ))
        }
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let outdir = match table.remove("outdir") {
        None => None,
        Some(toml::Value::String(s)) => Some(resolve(&base, Path::new(&s))),
        Some(other) => {
            return Err(SbmError::config(
                "outdir",
                format!("expected a path string, got {}", other.type_str()),
            ))
        }
    };
    let config = T::deserialize(toml::Value::Table(table))
        .map_err(|e| SbmError::config("config", format!("{}: {}", path.display(), e.message())))?;
    Ok(Loaded {
        config,
        outdir,
        base,
    })
}

/// Absolute form of `p`, taken relative to `base` (itself relative to the
/// working directory). Empty paths stay empty so "not set" is detectable.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.as_os_str().is_empty() {
        return PathBuf::new();
    }
    let joined = base.join(p);
    std::path::absolute(&joined).unwrap_or(joined)
}

/// Fails with a config error naming `key` unless `path` is an existing file.
pub fn require_file(key: &str, path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(SbmError::config(key, "required path is not set"));
    }
    if !path.is_file() {
        return Err(SbmError::config(
            key,
            format!("no such file: {}", path.display()),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct Echo<'a, T> {
    command: &'a str,
    outdir: &'a Path,
    #[serde(flatten)]
    config: &'a T,
}

/// Creates `outdir` and writes the full effective config into it.
pub fn write_echo<T: Serialize>(command: &str, outdir: &Path, config: &T) -> Result<()> {
    fs::create_dir_all(outdir).map_err(|source| SbmError::Io {
        path: outdir.display().to_string(),
        source,
    })?;
    let text = toml::to_string(&Echo {
        command,
        outdir,
        config,
    })
    .map_err(|e| SbmError::config("config", format!("cannot serialize effective config: {e}")))?;
    let path = outdir.join(ECHO_FILE);
    fs::write(&path, text).map_err(|source| SbmError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `a..b` (inclusive) or a comma-separated list of orders.
pub fn parse_orders(s: &str) -> std::result::Result<Vec<usize>, String> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| format!("bad range start in `{s}`"))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| format!("bad range end in `{s}`"))?;
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad order `{p}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_lists() {
        assert_eq!(parse_orders("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_orders("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_orders("1, 3,4").unwrap(), vec![1, 3, 4]);
        assert!(parse_orders("5..1").is_err());
        assert!(parse_orders("x").is_err());
    }

    #[test]
    fn resolution_keeps_absolute_and_empty_paths() {
        let base = Path::new("/cfg");
        assert_eq!(
            resolve(base, Path::new("a.csv")),
            PathBuf::from("/cfg/a.csv")
        );
        assert!(resolve(Path::new(""), Path::new("a.csv")).is_absolute());
        assert_eq!(
            resolve(base, Path::new("/x/a.csv")),
            PathBuf::from("/x/a.csv")
        );
        assert_eq!(resolve(base, Path::new("")), PathBuf::new());
    }
}
