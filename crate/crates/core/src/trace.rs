//! Run traces: one self-describing JSON record per line, append-only.
//!
//! The first line is a header describing the run; each following line records
//! one iteration. At `states` verbosity a record carries the pre-iteration
//! classification and the acceptance outcome; `full` adds the chosen parent
//! and the offspring string. After the last iteration a final population
//! snapshot record (`final_snapshot: true`) is appended so offline phase
//! segmentation sees the same post-iteration view the live run did.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::classifier::{IndexClass, SetSizes, State};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    /// Hitting times only, no per-iteration records.
    #[default]
    Silent,
    /// Per-iteration state, set sizes and acceptance outcome.
    States,
    /// Additionally the parent index and the offspring string.
    Full,
}

impl std::str::FromStr for TraceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "silent" => Ok(TraceLevel::Silent),
            "states" => Ok(TraceLevel::States),
            "full" => Ok(TraceLevel::Full),
            other => Err(format!("unknown trace level {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n: usize,
    pub seed: u64,
    pub mode: String,
    pub max_iters: u64,
    pub level: TraceLevel,
    pub initial_diversity: u64,
    pub max_diversity: u64,
}

fn is_false(b: &bool) -> bool {
    !b
}

/// One iteration of an instrumented run. `state`, `sizes`, `hot` and `cold`
/// describe the population at the start of the iteration (absent while it is
/// not almost balanced); `diversity` and `optimal` describe the population
/// after the iteration's acceptance decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub accepted: bool,
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_class: Option<IndexClass>,
    pub diversity: u64,
    pub optimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<State>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<SetSizes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub final_snapshot: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offspring: Option<BitString>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("trace file is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
}

pub struct TraceWriter<W: Write> {
    level: TraceLevel,
    sink: W,
}

impl TraceWriter<BufWriter<File>> {
    pub fn create(path: &Path, level: TraceLevel) -> io::Result<Self> {
        Ok(TraceWriter {
            level,
            sink: BufWriter::new(File::create(path)?),
        })
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W, level: TraceLevel) -> Self {
        TraceWriter { level, sink }
    }

    pub fn level(&self) -> TraceLevel {
        self.level
    }

    pub fn write_header(&mut self, header: &TraceHeader) -> io::Result<()> {
        serde_json::to_writer(&mut self.sink, header)?;
        self.sink.write_all(b"\n")
    }

    pub fn write_record(&mut self, record: &TraceRecord) -> io::Result<()> {
        match self.level {
            TraceLevel::Silent => Ok(()),
            TraceLevel::States => {
                let mut r = record.clone();
                r.parent_index = None;
                r.offspring = None;
                serde_json::to_writer(&mut self.sink, &r)?;
                self.sink.write_all(b"\n")
            }
            TraceLevel::Full => {
                serde_json::to_writer(&mut self.sink, record)?;
                self.sink.write_all(b"\n")
            }
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.sink.flush()
    }
}

/// Reads a trace file back: header line plus iteration records.
pub fn read_trace(path: &Path) -> Result<(TraceHeader, Vec<TraceRecord>), TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(TraceError::Empty)??;
    let header: TraceHeader = serde_json::from_str(&header_line)
        .map_err(|source| TraceError::Malformed { line: 1, source })?;
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|source| TraceError::Malformed { line: idx + 2, source })?;
        records.push(record);
    }
    Ok((header, records))
}
