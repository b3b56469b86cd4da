//! TOML config files. Keys are long flag names; top-level keys apply to every
//! subcommand and a `[<subcommand>]` table applies to that subcommand only.
//! Anything also given on the command line is ignored.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use toml::Value;

const SUBCOMMANDS: [&str; 6] = ["ingest", "split", "train", "evaluate", "predict", "report"];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn subcommand(argv: &[OsString]) -> Option<String> {
    argv.iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| SUBCOMMANDS.contains(&a.as_str()))
}

fn has_flag(argv: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&eq)
    })
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        other => bail!("config key {key:?}: unsupported value {other}"),
    })
}

fn push_key(out: &mut Vec<OsString>, argv: &[OsString], key: &str, value: &Value) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    if has_flag(argv, &flag) {
        return Ok(());
    }
    match value {
        Value::Boolean(true) => out.push(flag.into()),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            for item in items {
                out.push(flag.clone().into());
                out.push(scalar(key, item)?.into());
            }
        }
        v => {
            out.push(flag.into());
            out.push(scalar(key, v)?.into());
        }
    }
    Ok(())
}

/// Expand `--config FILE` into extra arguments appended after `argv`.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    let sub = subcommand(&argv);
    let mut extra = Vec::new();
    for (key, value) in &table {
        match value {
            Value::Table(t) if SUBCOMMANDS.contains(&key.as_str()) => {
                if sub.as_deref() == Some(key.as_str()) {
                    for (k, v) in t {
                        push_key(&mut extra, &argv, k, v)?;
                    }
                }
            }
            Value::Table(_) => bail!("config table [{key}] is not a subcommand"),
            v if key == "config" => bail!("config file may not set 'config' ({v})"),
            v => push_key(&mut extra, &argv, key, v)?,
        }
    }
    let mut out = argv;
    out.extend(extra);
    Ok(out)
}
