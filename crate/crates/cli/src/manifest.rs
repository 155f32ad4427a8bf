//! One JSON manifest per run: argv, inputs, parameters, outputs and wall time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command};
use crate::commands::{self, Failure, Record};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub params: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u128,
}

fn command_name(cmd: &Command) -> String {
    match serde_json::to_value(cmd) {
        Ok(serde_json::Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::new(),
    }
}

/// Where the manifest goes when `--manifest` is absent.
fn default_location(name: &str, record: &Record) -> PathBuf {
    match &record.primary {
        Some(p) if record.primary_is_dir => p.join("manifest.json"),
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("blurforge-{name}.manifest.json")),
    }
}

pub fn run_recorded(argv: &[String], cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let record = commands::run(&cli.command)?;
    let name = command_name(&cli.command);
    let params = serde_json::to_value(&cli.command)
        .ok()
        .and_then(|v| v.get(&name).cloned())
        .unwrap_or(serde_json::Value::Null);
    let manifest = RunManifest {
        command: name.clone(),
        argv: argv.to_vec(),
        inputs: record.inputs.clone(),
        params,
        outputs: record.outputs.clone(),
        wall_ms: start.elapsed().as_millis(),
    };
    let path = cli
        .manifest
        .clone()
        .unwrap_or_else(|| default_location(&name, &record));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n")
        .map_err(|e| Failure::Argument(format!("cannot write manifest {}: {e}", path.display())))
}

pub fn replay(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Argument(format!("cannot read {}: {e}", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
    if manifest.argv.get(1).map(String::as_str) == Some("replay") {
        return Err(Failure::Argument("a manifest cannot replay another replay".into()));
    }
    match crate::dispatch(&manifest.argv) {
        0 => Ok(()),
        code => Err(Failure::Exit(code)),
    }
}
