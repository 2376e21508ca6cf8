//! Gzip-compressed JSON-lines event logs, one pair event per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use immunesim_core::PairEvent;

use crate::error::{CliError, Result};

pub fn events_file(rep: usize) -> String {
    format!("events_{rep}.jsonl.gz")
}

pub fn encode(events: &[PairEvent]) -> Result<Vec<u8>> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
    for e in events {
        serde_json::to_writer(&mut enc, e).map_err(|e| CliError::Data(e.to_string()))?;
        enc.write_all(b"\n").map_err(|e| CliError::io("<memory>", e))?;
    }
    enc.finish().map_err(|e| CliError::io("<memory>", e))
}

pub fn read(path: &Path) -> Result<Vec<PairEvent>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(GzDecoder::new(file));
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let e: PairEvent = serde_json::from_str(&line)
            .map_err(|e| CliError::Parse { path: path.to_path_buf(), msg: format!("line {}: {e}", i + 1) })?;
        out.push(e);
    }
    Ok(out)
}
