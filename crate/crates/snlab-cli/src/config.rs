//! Flat key=value config files. Keys are the long flag names of the chosen
//! subcommand; values from the file act as defaults and explicit flags
//! override them (the file's arguments are injected before the user's).

use std::path::Path;

/// Parse `key=value` lines into synthetic `--key value` arguments.
/// `#` starts a comment; blank lines are skipped.
pub fn file_to_args(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            ));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("config line {} has an empty key", lineno + 1));
        }
        args.push(format!("--{key}"));
        args.push(value.trim().to_string());
    }
    Ok(args)
}

/// Extract `--config <path>` (or `--config=<path>`) from raw arguments,
/// returning the remaining arguments and the path if present.
pub fn split_config_flag(raw: Vec<String>) -> Result<(Vec<String>, Option<String>), String> {
    let mut rest = Vec::with_capacity(raw.len());
    let mut config = None;
    let mut iter = raw.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let value = iter
                .next()
                .ok_or_else(|| "--config requires a path".to_string())?;
            config = Some(value);
        } else if let Some(value) = arg.strip_prefix("--config=") {
            config = Some(value.to_string());
        } else {
            rest.push(arg);
        }
    }
    Ok((rest, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_lines() {
        let dir = std::env::temp_dir().join("snlab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "d = 4\nlambda=0.5 # density\n\n# comment\n").unwrap();
        let args = file_to_args(&path).unwrap();
        assert_eq!(args, vec!["--d", "4", "--lambda", "0.5"]);
    }

    #[test]
    fn rejects_malformed_lines() {
        let dir = std::env::temp_dir().join("snlab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        std::fs::write(&path, "just-a-word\n").unwrap();
        assert!(file_to_args(&path).is_err());
    }

    #[test]
    fn splits_the_config_flag() {
        let raw = vec![
            "sweep".to_string(),
            "--config".to_string(),
            "x.conf".to_string(),
            "--d".to_string(),
            "4".to_string(),
        ];
        let (rest, config) = split_config_flag(raw).unwrap();
        assert_eq!(config.as_deref(), Some("x.conf"));
        assert_eq!(rest, vec!["sweep", "--d", "4"]);
    }
}
