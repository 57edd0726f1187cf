use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of the newline-delimited JSON training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// `base` or `session`.
    pub phase: String,
    /// Base epoch (from 1) or incremental session index.
    pub epoch: usize,
    /// Step within the session; absent for base epochs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step: Option<usize>,
    /// Active base stage (`classification`/`language`) or `incremental`.
    pub stage: String,
    pub loss_total: f64,
    /// Component values; a missing key means the term was not evaluated.
    pub components: std::collections::BTreeMap<String, f64>,
    pub seed: u64,
}

pub fn write_ndjson<W: Write>(mut out: W, records: &[LogRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
