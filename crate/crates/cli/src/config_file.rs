//! `--config FILE`: a TOML table whose keys are the subcommand's flag
//! names. Entries are spliced in right after the subcommand, so flags given
//! on the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Removes `--config PATH` / `--config=PATH` from `args` and splices the
/// file's entries in after the subcommand named in `subcommands`.
pub fn expand(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let path = iter.next().context("--config needs a path")?;
                config = Some(path);
            }
            Some(s) if s.starts_with("--config=") => {
                config = Some(OsString::from(&s["--config=".len()..]));
            }
            _ => rest.push(arg),
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let extra = flags_from_file(Path::new(&path))?;
    let at = rest
        .iter()
        .position(|a| a.to_str().is_some_and(|s| subcommands.contains(&s)))
        .context("--config needs a subcommand")?;
    rest.splice(at + 1..at + 1, extra);
    Ok(rest)
}

fn flags_from_file(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let table: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))?;
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "config" {
            bail!("config files cannot include other config files");
        }
        let value = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => bail!("unsupported value for {key}: {other}"),
        };
        out.push(OsString::from(format!("--{key}")));
        out.push(OsString::from(value));
    }
    Ok(out)
}
