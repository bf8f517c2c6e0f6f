use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use calx_core::io::Table;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Collects output files and a flat key=value summary for one run.
pub struct Run {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
    summary: Vec<(String, serde_json::Value)>,
}

#[derive(Debug, Serialize)]
struct OutputFile {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    config_sha256: String,
    outputs: &'a [OutputFile],
    summary: serde_json::Map<String, serde_json::Value>,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            summary: Vec::new(),
        })
    }

    pub fn table(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let body = table.to_csv_string();
        let path = self.dir.join(name);
        fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile {
            name: name.to_string(),
            sha256: hex_digest(body.as_bytes()),
        });
        Ok(())
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("summary values serialize");
        self.summary.push((key.to_string(), v));
    }

    /// Prints the summary as `key=value` lines and writes `manifest.json`.
    pub fn finish<C: Serialize>(self, command: &'static str, config: &C) -> anyhow::Result<()> {
        let mut stdout = std::io::stdout().lock();
        for (k, v) in &self.summary {
            let line = match v {
                serde_json::Value::String(s) => writeln!(stdout, "{k}={s}"),
                other => writeln!(stdout, "{k}={other}"),
            };
            // a closed pipe (e.g. `| head`) only truncates the printout
            if line.is_err() {
                break;
            }
        }
        let config_json = serde_json::to_vec(config)?;
        let manifest = Manifest {
            tool: "calx",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            config_sha256: hex_digest(&config_json),
            outputs: &self.outputs,
            summary: self.summary.into_iter().collect(),
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
