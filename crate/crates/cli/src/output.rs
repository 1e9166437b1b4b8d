use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

/// Version tag written into CSV header comments; bump when columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, ranges or input documents. Exit code 2.
    Input(String),
    /// Unreadable input or unwritable output. Exit code 3.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<icp_core::IcpError> for CliError {
    fn from(e: icp_core::IcpError) -> Self {
        Self::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

/// Resolves the manifest timestamp: explicit flag, then `SOURCE_DATE_EPOCH`,
/// then the current time.
pub fn resolve_timestamp(flag: Option<&str>) -> CliResult<String> {
    if let Some(t) = flag {
        let parsed = DateTime::parse_from_rfc3339(t)
            .map_err(|e| CliError::Input(format!("--timestamp `{t}` is not RFC 3339: {e}")))?;
        return Ok(parsed.with_timezone(&Utc).to_rfc3339_opts(SecondsFormat::Secs, true));
    }
    let at = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("SOURCE_DATE_EPOCH `{v}` is not an integer")))?;
            DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::Input(format!("SOURCE_DATE_EPOCH `{v}` is out of range")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(at.to_rfc3339_opts(SecondsFormat::Secs, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Certificate,
    Report,
    Ledger,
    Scan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    kind: Kind,
    payload: &'a T,
}

/// Tabular content for CSV output: a fixed header and string cells.
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub fn cell(x: f64) -> String {
    format!("{x:?}")
}

pub fn render_json<T: Serialize>(manifest: &RunManifest, kind: Kind, payload: &T) -> CliResult<String> {
    let env = Envelope {
        manifest,
        kind,
        payload,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn render_csv(manifest: &RunManifest, kind: Kind, table: &Table) -> CliResult<String> {
    let mut out = Vec::new();
    let manifest_json = serde_json::to_string(manifest).map_err(|e| CliError::Input(e.to_string()))?;
    let kind_name = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    writeln!(out, "# icp-lab csv v{CSV_SCHEMA_VERSION} {kind_name}/{}", table.name).ok();
    writeln!(out, "# manifest: {manifest_json}").ok();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&table.header).map_err(io)?;
        for r in &table.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    String::from_utf8(out).map_err(|e| CliError::Io(e.to_string()))
}

pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
