//! Optional TOML config whose keys mirror the long flags.

use anyhow::{anyhow, bail, Context};
use toml::Value;

pub const SUBCOMMANDS: [&str; 8] = ["fourier", "ggt-classical", "distances", "qft", "adversary", "qggt", "junta", "acceptance-suite"];

/// Global options that take a value.
const GLOBAL_VALUED: [&str; 3] = ["--config", "--output", "--format"];

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn subcommand_position(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].as_str();
        if GLOBAL_VALUED.contains(&a) {
            i += 2;
            continue;
        }
        if SUBCOMMANDS.contains(&a) {
            return Some(i);
        }
        if !a.starts_with('-') {
            return None;
        }
        i += 1;
    }
    None
}

fn flag_value(key: &str, v: &Value) -> anyhow::Result<Option<String>> {
    Ok(match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        Value::Boolean(_) => None,
        Value::Array(items) => Some(
            items
                .iter()
                .map(|x| flag_value(key, x)?.ok_or_else(|| anyhow!("`{key}`: arrays must hold scalars")))
                .collect::<anyhow::Result<Vec<_>>>()?
                .join(","),
        ),
        _ => bail!("`{key}`: unsupported value type"),
    })
}

/// Inserts the config's flags right after the subcommand so that flags given
/// on the command line take precedence.
pub fn expand_args(argv: Vec<String>) -> anyhow::Result<Vec<String>> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config {path}"))?;
    let mut argv = argv;
    let pos = match subcommand_position(&argv) {
        Some(p) => p,
        None => {
            let cmd = table.get("command").and_then(Value::as_str).ok_or_else(|| anyhow!("no subcommand given and the config has no `command`"))?;
            if !SUBCOMMANDS.contains(&cmd) {
                bail!("unknown command `{cmd}` in config");
            }
            let at = subcommand_position_for_insert(&argv);
            argv.insert(at, cmd.to_string());
            at
        }
    };
    let mut flags = Vec::new();
    for (key, v) in &table {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match (v, flag_value(key, v)?) {
            (Value::Boolean(true), _) => flags.push(flag),
            (Value::Boolean(false), _) => {}
            (_, Some(val)) => {
                flags.push(flag);
                flags.push(val);
            }
            (_, None) => {}
        }
    }
    argv.splice(pos + 1..pos + 1, flags);
    Ok(argv)
}

fn subcommand_position_for_insert(argv: &[String]) -> usize {
    let mut i = 1;
    while i < argv.len() {
        if GLOBAL_VALUED.contains(&argv[i].as_str()) {
            i += 2;
        } else if argv[i].starts_with("--config=") || argv[i].starts_with("--output=") || argv[i].starts_with("--format=") {
            i += 1;
        } else {
            break;
        }
    }
    i.min(argv.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn without_config_is_identity() {
        let a = args("qgt distances --n 4");
        assert_eq!(expand_args(a.clone()).unwrap(), a);
    }

    #[test]
    fn config_flags_precede_command_line_flags() {
        let dir = std::env::temp_dir().join(format!("qgt-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "command = \"qft\"\nn = 5\ncheck = true\nmatrix = false\n").unwrap();
        let got = expand_args(args(&format!("qgt --config {} --n 6", path.display()))).unwrap();
        assert_eq!(got[3], "qft");
        assert_eq!(&got[4..], &args("--check --n 5 --n 6")[..]);
        let got = expand_args(args(&format!("qgt --config {} adversary --k 1", path.display()))).unwrap();
        assert_eq!(&got[3..], &args("adversary --check --n 5 --k 1")[..]);
    }
}
