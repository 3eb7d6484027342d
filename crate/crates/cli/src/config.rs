// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flags from a TOML file, spliced in right after the subcommand so that
//! flags typed on the command line come later and win.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use toml::{Table, Value};

const NESTED: &[&str] = &["render"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Indices of the subcommand words (`distance`, or `render heatmap`).
fn subcommand_span(argv: &[OsString]) -> Vec<usize> {
    let mut span = Vec::new();
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if s.starts_with('-') {
            i += 1;
            continue;
        }
        span.push(i);
        if span.len() == 2 || !NESTED.contains(&s.as_ref()) {
            break;
        }
        i += 1;
    }
    span
}

fn flag_args(table: &Table, section: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> Result<String> {
            Ok(match v {
                Value::String(s) => s.clone(),
                Value::Integer(i) => i.to_string(),
                Value::Float(f) => f.to_string(),
                Value::Boolean(b) => b.to_string(),
                other => bail!("[{section}] {key}: unsupported value {other}"),
            })
        };
        match value {
            Value::Boolean(true) => out.push(flag.into()),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                for item in items {
                    out.push(flag.clone().into());
                    out.push(scalar(item)?.into());
                }
            }
            Value::Table(_) => {}
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with the matching config table's flags inserted.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let root: Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    let span = subcommand_span(&argv);
    let Some(&last) = span.last() else {
        return Ok(argv);
    };
    let mut table = &root;
    let mut section = Vec::new();
    for &i in &span {
        let name = argv[i].to_string_lossy().into_owned();
        match table.get(&name) {
            Some(Value::Table(t)) => table = t,
            Some(_) => bail!("config {}: [{name}] must be a table", path.display()),
            None => return Ok(argv),
        }
        section.push(name);
    }
    let extra = flag_args(table, &section.join("."))?;
    let mut out = argv;
    out.splice(last + 1..last + 1, extra);
    Ok(out)
}
