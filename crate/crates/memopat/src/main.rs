use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use memopat::{commands, parse_config_with_overrides, Error};

/// Runs one analysis of the memory-map population model.
///
/// Settings come from a flat `key = value` file; any key can be overridden
/// with `--key value` (or `--key=value`) after the file. MEMOPAT_OUTPUT
/// replaces the output directory unless `--output` is given.
#[derive(Debug, Parser)]
#[command(name = "memopat", version)]
struct Cli {
    /// Configuration file (omitted means all defaults), then `--key value`
    /// overrides.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "[CONFIG] --KEY VALUE"
    )]
    args: Vec<String>,
}

impl Cli {
    fn split(&self) -> (Option<PathBuf>, &[String]) {
        match self.args.first() {
            Some(first) if !first.starts_with("--") => {
                (Some(PathBuf::from(first)), &self.args[1..])
            }
            _ => (None, &self.args),
        }
    }
}

fn pairs(args: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("expected `--key value`, got `{arg}`"))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| format!("missing value for `--{key}`"))?;
                out.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<Vec<String>, (u8, String)> {
    let (config, args) = cli.split();
    let text = match &config {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| (2, Error::io(path, e).to_string()))?
        }
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Ok(dir) = std::env::var("MEMOPAT_OUTPUT") {
        overrides.push(("output".to_string(), dir));
    }
    overrides.extend(pairs(args).map_err(|e| (2, e))?);
    let cfg = parse_config_with_overrides(&text, &overrides).map_err(|e| {
        let origin = config
            .as_ref()
            .map_or("config".into(), |p| p.display().to_string());
        (2, format!("{origin}: {e}"))
    })?;
    let outcome = commands::dispatch(&cfg).map_err(|e| (1, e.to_string()))?;
    let mut lines = outcome.lines;
    lines.extend(
        outcome
            .files
            .iter()
            .map(|p| format!("wrote {}", p.display())),
    );
    Ok(lines)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                if writeln!(out, "{l}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err((code, msg)) => {
            eprintln!("memopat: {msg}");
            ExitCode::from(code)
        }
    }
}
