//! Flat `key = value` config files, expanded into command-line flags.
//!
//! `true` becomes a bare flag, `false` drops the key, anything else is
//! passed as the flag's value. Underscores in keys become hyphens.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::CliError;

pub const SUBCOMMANDS: [&str; 4] = ["estimate", "simulate", "select", "qda"];

pub fn parse_config(text: &str) -> Result<Vec<String>, CliError> {
    let mut flags = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", no + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key", no + 1)));
        }
        match value.trim() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => {
                flags.push(format!("--{key}"));
                flags.push(v.to_string());
            }
        }
    }
    Ok(flags)
}

/// Inserts config flags right after the subcommand so that flags given on
/// the command line come later and win.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| CliError::Input {
        path: Path::new(&path).display().to_string(),
        message: e.to_string(),
    })?;
    let flags = parse_config(&text)?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_from_config() {
        let f = parse_config("# c\nreps = 3\nno_eigenvectors = true\nstandardize = false\n\nmethods=sample,chol_banding\n").unwrap();
        assert_eq!(f, ["--reps", "3", "--no-eigenvectors", "--methods", "sample,chol_banding"]);
        assert!(parse_config("reps 3").is_err());
        assert!(parse_config("config = x").is_err());
    }
}
