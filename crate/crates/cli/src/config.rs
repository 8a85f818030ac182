//! JSON config files whose keys mirror the long flags of a subcommand.
//!
//! The file's entries are spliced into the argument list right after the
//! subcommand name, so flags given on the command line come later and win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

use crate::exit::CliError;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::Validation(format!("config key `{key}`: lists may hold only strings and numbers")).into()),
    }
}

/// Turn a config object into flag tokens.
pub fn config_tokens(doc: &Value) -> Result<Vec<String>> {
    let obj = doc.as_object().ok_or_else(|| CliError::Validation("config file must hold a JSON object".into()))?;
    let mut out = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if key == "config" {
            continue;
        }
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag),
            Value::Array(items) => {
                let joined = items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>>>()?.join(",");
                out.extend([flag, joined]);
            }
            Value::Object(_) => {
                return Err(CliError::Validation(format!("config key `{key}` holds an object; values must be flat")).into())
            }
            other => out.extend([flag, scalar(key, other)?]),
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())).into())
}

/// Splice the tokens of `--config FILE`, if present, after the subcommand.
pub fn expand_args(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let tokens = config_tokens(&load_config(Path::new(&path))?)?;
    let Some(at) = args.iter().skip(1).position(|a| subcommands.iter().any(|s| a == *s)) else {
        return Ok(args);
    };
    let at = at + 2;
    let mut out = args[..at].to_vec();
    out.extend(tokens.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
