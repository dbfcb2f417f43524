//! Append-only NDJSON record store.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use lpdev::{KlsVerdict, TailEstimate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::McConfig;
use crate::{io_err, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Where a probed rate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum RateSource {
    Regime { regime: String, p: f64, lambda: f64 },
    Run { id: String },
}

/// Everything that is a deterministic function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    TailEstimates {
        config: McConfig,
        seed: u64,
        estimates: Vec<TailEstimate>,
    },
    KlsVerdict {
        source: RateSource,
        verdict: KlsVerdict,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    /// First 16 hex digits of the payload hash.
    pub id: String,
    pub timestamp_ms: u64,
    pub wall_clock_ms: u64,
    pub workers: Option<usize>,
    pub config_hash: String,
    pub payload_hash: String,
    pub payload: Payload,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string(v).map_err(|e| CliError::Degenerate(format!("cannot serialize record: {e}")))
}

impl RunRecord {
    /// Stamps a payload; `config` is whatever identifies the inputs.
    pub fn new<C: Serialize>(config: &C, payload: Payload, wall_clock_ms: u64, workers: Option<usize>) -> CliResult<Self> {
        let payload_hash = sha256_hex(to_json(&payload)?.as_bytes());
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            id: payload_hash[..16].to_string(),
            timestamp_ms,
            wall_clock_ms,
            workers,
            config_hash: sha256_hex(to_json(config)?.as_bytes()),
            payload_hash,
            payload,
        })
    }

    pub fn to_line(&self) -> CliResult<String> {
        to_json(self)
    }
}

/// Appends one record under an exclusive advisory lock.
pub fn append(path: &Path, rec: &RunRecord) -> CliResult<()> {
    let line = rec.to_line()?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Io(format!("cannot open store {}: {e}", path.display())))?;
    f.lock().map_err(io_err)?;
    let res = writeln!(f, "{line}").and_then(|_| f.flush());
    let _ = f.unlock();
    res.map_err(|e| CliError::Io(format!("cannot write store {}: {e}", path.display())))
}

/// Raw lines of the store, in order.
pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let f = File::open(path).map_err(|e| CliError::Io(format!("cannot open store {}: {e}", path.display())))?;
    f.lock_shared().map_err(io_err)?;
    let lines: std::io::Result<Vec<String>> = BufReader::new(&f).lines().collect();
    let _ = f.unlock();
    Ok(lines.map_err(io_err)?.into_iter().filter(|l| !l.trim().is_empty()).collect())
}

pub fn parse_line(line: &str) -> CliResult<RunRecord> {
    serde_json::from_str(line).map_err(|e| CliError::Io(format!("corrupt store record: {e}")))
}

pub fn read_all(path: &Path) -> CliResult<Vec<RunRecord>> {
    read_lines(path)?.iter().map(|l| parse_line(l)).collect()
}

/// The last record whose id starts with `id`.
pub fn find(path: &Path, id: &str) -> CliResult<RunRecord> {
    if id.is_empty() {
        return Err(CliError::Usage("empty record id".into()));
    }
    read_all(path)?
        .into_iter()
        .rev()
        .find(|r| r.id.starts_with(id))
        .ok_or_else(|| CliError::Usage(format!("no record with id {id:?} in {}", path.display())))
}
