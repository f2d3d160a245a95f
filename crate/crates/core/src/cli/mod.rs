//! Command-line front end.
//!
//! Every subcommand resolves its parameters from built-in defaults, then an
//! optional `--config` file (JSON or TOML), then explicit flags. The
//! resolved parameters, input and output checksums are written to
//! `run_manifest.json` in the output directory; `replay` reruns a manifest
//! and checks that every output is reproduced byte for byte.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or configuration error,
//! 3 missing file or I/O failure, 4 data or format error, 5 training
//! diverged, 6 replay mismatch.

mod commands;
pub mod render;

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;

pub use commands::Command;

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const TOOL: &str = "mcfdd";

#[derive(Debug, Parser)]
#[command(name = "mcfdd", version, about = "MC-dropout fault detection and diagnosis experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every run.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub out: PathBuf,
    /// JSON or TOML file with parameters; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Lib(#[from] Error),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Mismatch(_) => 6,
            CliError::Lib(e) => match e {
                Error::InvalidArgument(_) => 2,
                Error::Io(_) => 3,
                Error::Diverged { .. } => 5,
                Error::Dimension(_)
                | Error::NotPositiveDefinite
                | Error::EmptyPartition(_)
                | Error::EmptyFile(_)
                | Error::MalformedRow { .. }
                | Error::Schema(_)
                | Error::NonNumeric { .. }
                | Error::UnsupportedFormat(_)
                | Error::Json(_) => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.code() {
            2 => "config",
            3 => "io",
            4 => "data",
            5 => "diverged",
            6 => "replay-mismatch",
            _ => "internal",
        }
    }

    /// `error: kind=<kind> code=<n> message="<json-escaped>"`
    pub fn line(&self) -> String {
        let msg = serde_json::to_string(&self.to_string()).unwrap_or_else(|_| "\"?\"".into());
        format!("error: kind={} code={} message={msg}", self.kind(), self.code())
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn io_at(path: &Path, e: std::io::Error) -> CliError {
    let msg = match e.kind() {
        ErrorKind::NotFound => format!("{}: file not found", path.display()),
        _ => format!("{}: {e}", path.display()),
    };
    CliError::Lib(Error::Io(std::io::Error::new(e.kind(), msg)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Output directory of one run. Tracks what was read and written so the
/// manifest can be assembled, and refuses to overwrite any input.
pub struct RunDir {
    root: PathBuf,
    inputs: Vec<(PathBuf, FileDigest)>,
    outputs: Vec<FileDigest>,
    summary: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_at(root, e))?;
        Ok(Self { root: root.to_path_buf(), inputs: Vec::new(), outputs: Vec::new(), summary: Vec::new() })
    }

    /// Reads an input file and records its checksum.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| io_at(path, e))?;
        let canonical = fs::canonicalize(path).map_err(|e| io_at(path, e))?;
        if !self.inputs.iter().any(|(p, _)| *p == canonical) {
            self.inputs.push((
                canonical,
                FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) },
            ));
        }
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::Lib(Error::Schema(format!("{}: not UTF-8", path.display()))))
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Ok(canonical) = fs::canonicalize(&path) {
            if self.inputs.iter().any(|(p, _)| *p == canonical) {
                return Err(config_err(format!("refusing to overwrite input file {}", path.display())));
            }
        }
        let bytes = contents.as_ref();
        fs::write(&path, bytes).map_err(|e| io_at(&path, e))?;
        self.outputs.retain(|d| d.path != name);
        self.outputs.push(FileDigest { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        self.write(name, text + "\n")
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
    };
    if !value.is_object() {
        return Err(config_err(format!("{}: config must be a table/object", path.display())));
    }
    Ok(value)
}

/// Recursive object overlay; non-object values replace.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Defaults ← config file (its `[<command>]` table if present, else the
/// whole file) ← flags.
pub(crate) fn resolve<P, F>(command: &str, config: Option<&Path>, flags: &F) -> Result<P, CliError>
where
    P: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut value = serde_json::to_value(P::default()).map_err(Error::from)?;
    if let Some(path) = config {
        let mut file = read_config(path)?;
        let section = file.as_object_mut().and_then(|m| m.remove(command));
        overlay(&mut value, section.filter(Value::is_object).unwrap_or(file));
    }
    let flags = serde_json::to_value(flags).map_err(Error::from)?;
    overlay(&mut value, strip_nulls(flags));
    serde_json::from_value(value).map_err(|e| config_err(format!("invalid {command} parameters: {e}")))
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect::<Map<_, _>>()),
        v => v,
    }
}

/// A subcommand's resolved parameters and its body.
pub(crate) trait Job: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    fn execute(&self, run: &mut RunDir) -> Result<(), CliError>;
}

pub(crate) fn execute_job<J: Job>(params: &J, out: &Path) -> Result<RunManifest, CliError> {
    let mut run = RunDir::create(out)?;
    params.execute(&mut run)?;
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: J::NAME.into(),
        params: serde_json::to_value(params).map_err(Error::from)?,
        inputs: run.inputs.iter().map(|(_, d)| d.clone()).collect(),
        outputs: run.outputs.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n";
    let path = run.root.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| io_at(&path, e))?;
    for line in &run.summary {
        println!("{line}");
    }
    println!("wrote {} file(s) to {}", run.outputs.len(), run.root.display());
    Ok(manifest)
}

pub(crate) fn run_job<J: Job, F: Serialize>(common: &Common, flags: &F) -> Result<RunManifest, CliError> {
    let params: J = resolve(J::NAME, common.config.as_deref(), flags)?;
    execute_job(&params, &common.out)
}

/// Reruns `manifest` into `out` and compares inputs and outputs.
pub fn replay(manifest: &RunManifest, out: &Path) -> Result<RunManifest, CliError> {
    if manifest.tool != TOOL {
        return Err(config_err(format!("manifest was written by `{}`", manifest.tool)));
    }
    let fresh = commands::dispatch_replay(&manifest.command, manifest.params.clone(), out)?;
    let mut problems = Vec::new();
    for old in &manifest.inputs {
        match fresh.inputs.iter().find(|d| d.path == old.path) {
            Some(new) if new.sha256 == old.sha256 => {}
            Some(_) => problems.push(format!("input {} changed", old.path)),
            None => problems.push(format!("input {} not read", old.path)),
        }
    }
    if fresh.outputs.len() != manifest.outputs.len() {
        problems.push(format!(
            "{} outputs recorded, {} reproduced",
            manifest.outputs.len(),
            fresh.outputs.len()
        ));
    }
    for old in &manifest.outputs {
        match fresh.outputs.iter().find(|d| d.path == old.path) {
            Some(new) if new.sha256 == old.sha256 => {}
            Some(_) => problems.push(format!("output {} differs", old.path)),
            None => problems.push(format!("output {} missing", old.path)),
        }
    }
    if problems.is_empty() {
        Ok(fresh)
    } else {
        Err(CliError::Mismatch(problems.join("; ")))
    }
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Lib(Error::Json(e)))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
    cli.command.run()
}

/// Entry point for the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = config_err(e.to_string().trim_end().to_string());
            eprintln!("{}", err.line());
            return err.code();
        }
    };
    match cli.command.run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code()
        }
    }
}
