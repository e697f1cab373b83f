use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::error::{Error, Result};
use crate::mcmc::{AcceptanceStats, ChainTrace, TraceRecord};
use crate::scalar::Real;

/// Version written in the first line of every trace file.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// One line of a trace file: a header, then one record per kept iteration,
/// then a summary with the acceptance counts.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
enum Line<T> {
    Header { schema_version: u32, config: Provenance },
    Record(TraceRecord<T>),
    Summary { stats: AcceptanceStats },
}

pub fn write_trace_to<T: Real + Serialize, W: Write>(mut w: W, trace: &ChainTrace<T>, provenance: &Provenance) -> Result<()> {
    let header: Line<T> = Line::Header { schema_version: TRACE_SCHEMA_VERSION, config: provenance.clone() };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for r in &trace.records {
        serde_json::to_writer(&mut w, &Line::Record(r.clone()))?;
        writeln!(w)?;
    }
    serde_json::to_writer(&mut w, &Line::<T>::Summary { stats: trace.stats })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes a trace as JSON lines. Floats use shortest round-trip decimals, so
/// [`read_trace`] reproduces every value bit for bit.
pub fn write_trace<T: Real + Serialize>(path: &Path, trace: &ChainTrace<T>, provenance: &Provenance) -> Result<()> {
    write_trace_to(BufWriter::new(File::create(path)?), trace, provenance)
}

pub fn read_trace_from<T: Real + for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<(ChainTrace<T>, Provenance)> {
    let mut trace = ChainTrace { records: Vec::new(), stats: AcceptanceStats::default() };
    let mut config = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line<T>>(&line)? {
            Line::Header { schema_version, config: c } => {
                if schema_version != TRACE_SCHEMA_VERSION {
                    return Err(Error::SchemaVersion { expected: TRACE_SCHEMA_VERSION, found: schema_version });
                }
                config = Some(c);
            }
            _ if config.is_none() => return Err(Error::Parse(format!("line {}: trace has no header", i + 1))),
            Line::Record(r) => trace.records.push(r),
            Line::Summary { stats } => trace.stats = stats,
        }
    }
    let config = config.ok_or_else(|| Error::Parse("trace has no header".into()))?;
    Ok((trace, config))
}

pub fn read_trace<T: Real + for<'de> Deserialize<'de>>(path: &Path) -> Result<(ChainTrace<T>, Provenance)> {
    read_trace_from(BufReader::new(File::open(path)?))
}
