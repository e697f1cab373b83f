//! Reading and writing datasets, cyclone tracks, run configurations, chain
//! traces and model states.
//!
//! Every file the tool writes starts with the resolved run configuration
//! (see [`Provenance`]) so that outputs can be traced back to their inputs.

mod config;
mod hurdat2;
mod pairs;
mod trace;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::scalar::Real;

pub use config::{DataFormat, RunConfig};
pub use hurdat2::{parse_hurdat2, tracks_to_regression_pairs, Fix, GeoPoint, StormTrack};
pub use pairs::{load_covariates_csv, load_pairs_csv, read_pairs_csv, write_pairs_csv, write_vectors_csv};
pub use trace::{read_trace, read_trace_from, write_trace, write_trace_to, TRACE_SCHEMA_VERSION};

/// Resolved configuration echoed into every output file.
pub type Provenance = BTreeMap<String, String>;

/// Schema version of model-state files.
pub const STATE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
struct StateFile<T> {
    schema_version: u32,
    config: Provenance,
    state: ModelState<T>,
}

/// Writes a model state (typically a simulation truth) as JSON.
pub fn write_state<T: Real + Serialize>(path: &Path, state: &ModelState<T>, provenance: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let file = StateFile { schema_version: STATE_SCHEMA_VERSION, config: provenance.clone(), state: state.clone() };
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reads and validates a state written by [`write_state`].
pub fn read_state<T: Real + for<'de> Deserialize<'de>>(path: &Path) -> Result<(ModelState<T>, Provenance)> {
    let file: StateFile<T> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.schema_version != STATE_SCHEMA_VERSION {
        return Err(Error::SchemaVersion { expected: STATE_SCHEMA_VERSION, found: file.schema_version });
    }
    file.state.validate()?;
    Ok((file.state, file.config))
}
