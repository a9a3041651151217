//! `.trace.jsonl` files: a header line echoing the run configuration, then
//! one [`TraceEvent`] per line.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{RunConfig, TraceEvent};
use crate::corpus::TaskSet;
use crate::error::{Error, Result};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub trace_version: u32,
    pub config: RunConfig,
    pub task_sizes: Vec<usize>,
    pub compressor: String,
}

impl TraceHeader {
    pub fn new(config: &RunConfig, tasks: &TaskSet) -> Self {
        TraceHeader {
            trace_version: TRACE_VERSION,
            config: config.clone(),
            task_sizes: tasks.task_sizes(),
            compressor: tasks.compressor.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

pub trait TraceSink {
    fn header(&mut self, header: &TraceHeader) -> Result<()>;
    fn event(&mut self, event: &TraceEvent) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct VecSink {
    pub header: Option<TraceHeader>,
    pub events: Vec<TraceEvent>,
}

impl VecSink {
    pub fn into_trace(self) -> Result<Trace> {
        let header = self.header.ok_or_else(|| Error::Trace("no header recorded".into()))?;
        Ok(Trace {
            header,
            events: self.events,
        })
    }
}

impl TraceSink for VecSink {
    fn header(&mut self, header: &TraceHeader) -> Result<()> {
        self.header = Some(header.clone());
        Ok(())
    }

    fn event(&mut self, event: &TraceEvent) -> Result<()> {
        self.events.push(event.clone());
        Ok(())
    }
}

/// Writes each record as soon as it is produced.
#[derive(Debug)]
pub struct JsonlTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlTraceWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlTraceWriter { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value).map_err(|e| Error::json("encoding trace record", e))?;
        self.out.write_all(b"\n").map_err(|e| Error::io("writing trace", e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io("flushing trace", e))
    }
}

impl<W: Write> TraceSink for JsonlTraceWriter<W> {
    fn header(&mut self, header: &TraceHeader) -> Result<()> {
        self.line(header)
    }

    fn event(&mut self, event: &TraceEvent) -> Result<()> {
        self.line(event)
    }

    fn finish(&mut self) -> Result<()> {
        self.flush()
    }
}

pub fn read_trace(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Trace("empty trace".into()))?;
    let header: TraceHeader = serde_json::from_str(first).map_err(|e| Error::json("trace header", e))?;
    if header.trace_version != TRACE_VERSION {
        return Err(Error::Trace(format!("unsupported trace version {}", header.trace_version)));
    }
    let events = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("trace line {}", i + 1), e)))
        .collect::<Result<Vec<TraceEvent>>>()?;
    if events.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::Trace("step counter is not strictly increasing".into()));
    }
    Ok(Trace { header, events })
}
