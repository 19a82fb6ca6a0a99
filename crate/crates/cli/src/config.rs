//! `--config FILE` support: TOML keys become flags inserted right after the subcommand,
//! so flags given on the command line override them.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::error::CliError;

const VALUE_GLOBALS: [&str; 2] = ["--out", "--config"];
const NESTED: [&str; 1] = ["model"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(tok) = it.next() {
        let tok = tok.to_string_lossy();
        if tok == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = tok.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Index just past the subcommand (and its nested subcommand, if any).
fn insertion_point(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if VALUE_GLOBALS.contains(&tok.as_ref()) {
            i += 2;
            continue;
        }
        if tok.starts_with('-') {
            i += 1;
            continue;
        }
        return Some(if NESTED.contains(&tok.as_ref()) { (i + 2).min(argv.len()) } else { i + 1 });
    }
    None
}

fn flag_tokens(table: &toml::Table) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String, CliError> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(CliError::validation("bad_config", format!("key `{key}` has unsupported value {other}"))),
            }
        };
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(out)
}

pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let Some(at) = insertion_point(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::validation("bad_config", format!("{}: {e}", path.display())))?;
    let mut out = argv[..at].to_vec();
    out.extend(flag_tokens(&table)?);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn inserts_after_nested_subcommand() {
        let argv = os(&["capnet", "--out", "o", "model", "simulate", "--seed", "3"]);
        assert_eq!(insertion_point(&argv), Some(5));
        assert_eq!(insertion_point(&os(&["capnet", "metrics", "--matrix", "m"])), Some(2));
        assert_eq!(insertion_point(&os(&["capnet", "--force"])), None);
    }

    #[test]
    fn table_to_flags() {
        let t: toml::Table = "r_step = 0.04\nweighted_ks = true\nforce = false\nna = [10, 20]\n".parse().unwrap();
        let got: Vec<String> = flag_tokens(&t).unwrap().into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(got, ["--na", "10,20", "--r-step", "0.04", "--weighted-ks"]);
    }
}
