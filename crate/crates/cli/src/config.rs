//! `key = value` configuration files.
//!
//! Keys are long flag names (`kmax`, `no_timestamp` or `no-timestamp`).
//! Blank lines and lines starting with `#` are skipped. The entries are
//! spliced into the argument list right after the subcommand, so flags
//! given on the command line win.

use std::collections::BTreeSet;

use clap::Command;

/// Error in a configuration file, reported as a usage error.
#[derive(Debug)]
pub struct ConfigError(pub String);

pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError(format!("line {}: empty key", i + 1)));
        }
        if !seen.insert(key.clone()) {
            return Err(ConfigError(format!("line {}: duplicate key '{key}'", i + 1)));
        }
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(v);
        out.push((key, v.to_string()));
    }
    Ok(out)
}

/// Removes `--config <path>` / `--config=<path>` from `argv`.
pub fn take_config_path(argv: &mut Vec<String>) -> Option<String> {
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" && i + 1 < argv.len() {
            let p = argv.remove(i + 1);
            argv.remove(i);
            return Some(p);
        }
        if let Some(p) = argv[i].strip_prefix("--config=") {
            let p = p.to_string();
            argv.remove(i);
            return Some(p);
        }
        i += 1;
    }
    None
}

/// Inserts the file entries as flags after the subcommand token, checking
/// each key against the subcommand's flags.
pub fn splice(cmd: &Command, argv: &mut Vec<String>, entries: &[(String, String)]) -> Result<(), ConfigError> {
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let pos = argv
        .iter()
        .position(|a| names.contains(a))
        .ok_or_else(|| ConfigError("a configuration file needs a subcommand".into()))?;
    let sub = cmd.find_subcommand(&argv[pos]).expect("known subcommand");
    let mut extra = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| ConfigError(format!("unknown key '{key}' for '{}'", sub.get_name())))?;
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            extra.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" => extra.push(format!("--{key}")),
                "false" => {}
                _ => return Err(ConfigError(format!("key '{key}' expects true or false"))),
            }
        }
    }
    argv.splice(pos + 1..pos + 1, extra);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let e = parse("# c\nkmax = 16\n\nno_timestamp=true\nweight = \"poly:0,1\"\n").unwrap();
        assert_eq!(e[0], ("kmax".into(), "16".into()));
        assert_eq!(e[1], ("no-timestamp".into(), "true".into()));
        assert_eq!(e[2].1, "poly:0,1");
        assert!(parse("novalue").is_err());
        assert!(parse("a=1\na=2").is_err());
    }

    #[test]
    fn strips_config_flag() {
        let mut v: Vec<String> = ["p", "gen", "--config", "x.cfg", "--r", "2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(take_config_path(&mut v).as_deref(), Some("x.cfg"));
        assert_eq!(v, ["p", "gen", "--r", "2"]);
    }
}
