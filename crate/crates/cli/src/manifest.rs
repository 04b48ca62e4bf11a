//! Run manifests: `key = value` lines written next to every output.
//!
//! Parameter keys are the long flag names of the command, so a manifest can
//! be turned back into a command line and replayed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Keys that describe the run rather than flags of the command.
const RESERVED: [&str; 3] = ["command", "version", "output"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Flag name without the leading dashes, and its value.
    pub params: Vec<(String, String)>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, params: Vec<(String, String)>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params,
            outputs: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command = {}", self.command).unwrap();
        writeln!(out, "version = {}", self.version).unwrap();
        for (k, v) in &self.params {
            writeln!(out, "{k} = {v}").unwrap();
        }
        for o in &self.outputs {
            writeln!(out, "output = {o}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut command = None;
        let mut version = None;
        let mut params = Vec::new();
        let mut outputs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| format!("manifest line {}: expected `key = value`", i + 1))?;
            match k {
                "command" => command = Some(v.to_string()),
                "version" => version = Some(v.to_string()),
                "output" => outputs.push(v.to_string()),
                _ => params.push((k.to_string(), v.to_string())),
            }
        }
        Ok(RunManifest {
            command: command.ok_or("manifest has no command")?,
            version: version.ok_or("manifest has no version")?,
            params,
            outputs,
        })
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// The command line that reproduces this run, writing into `out`.
    pub fn to_args(&self, out: &Path) -> Vec<String> {
        let mut args = vec!["bb84sim".to_string(), self.command.clone()];
        for (k, v) in &self.params {
            debug_assert!(!RESERVED.contains(&k.as_str()));
            if k == "out" {
                continue;
            }
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
        args.push("--out".into());
        args.push(out.display().to_string());
        args
    }
}
