//! Flat `key = value` config files, merged into argv as long flags.
//! Flags given on the command line win over file entries.

use std::path::Path;

use hairlab::{Error, Result};

const GLOBAL_VALUED: [&str; 4] = ["--lambda", "--x0", "--out", "--config"];

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

fn has_flag(argv: &[String], flag: &str) -> bool {
    argv.iter()
        .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
}

fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if GLOBAL_VALUED.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Returns argv with config entries spliced in after the subcommand.
pub fn merge(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text =
        std::fs::read_to_string(Path::new(&path)).map_err(|e| Error::Io(format!("config {path}: {e}")))?;
    let mut extra = Vec::new();
    for (k, v) in parse(&text)? {
        let flag = format!("--{k}");
        if k == "config" || has_flag(&argv, &flag) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(flag),
            "false" => {}
            _ => extra.push(format!("{flag}={v}")),
        }
    }
    let at = subcommand_index(&argv).map_or(argv.len(), |i| i + 1);
    let mut out = argv;
    out.splice(at..at, extra);
    Ok(out)
}
