//! Config files: `key = value` lines, global or under a `[subcommand]` header.
//! Keys are long flag names; the command line wins over the file.

use std::path::Path;

use ini::Ini;

pub const SUBCOMMANDS: [&str; 5] = ["solve", "audit-mesh", "degiorgi-study", "verify-inequalities", "quasilinear-study"];
const SWITCHES: [&str; 2] = ["adaptive", "svg"];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// Appends the config entries that apply to the chosen subcommand.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let ini = Ini::load_from_file(Path::new(&path)).map_err(|e| ConfigError(format!("config {path}: {e}")))?;
    let command = args.iter().skip(1).find(|a| SUBCOMMANDS.contains(&a.as_str())).cloned();
    for (section, _) in ini.iter() {
        if let Some(name) = section {
            if !SUBCOMMANDS.contains(&name) {
                return Err(ConfigError(format!("config {path}: unknown section [{name}]")));
            }
        }
    }
    let mut entries: Vec<(String, String)> = ini
        .general_section()
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    if let Some(cmd) = &command {
        if let Some(sec) = ini.section(Some(cmd.as_str())) {
            for (k, v) in sec.iter() {
                entries.retain(|(key, _)| key != k);
                entries.push((k.to_string(), v.to_string()));
            }
        }
    }
    let mut out = args.clone();
    for (key, value) in entries {
        if key == "config" || given(&args, &key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                other => return Err(ConfigError(format!("config {path}: {key} expects true or false, got {other}"))),
            }
        } else {
            out.push(format!("--{key}"));
            out.push(value);
        }
    }
    Ok(out)
}
