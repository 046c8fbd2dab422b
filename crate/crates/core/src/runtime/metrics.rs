use std::collections::VecDeque;
use std::fs::File;
use std::path::Path;

use parking_lot::Mutex;
use serde::Serialize;

use crate::model::StreamRef;

use super::TraceId;

/// Per-emission stage durations. Source streams report zero input and
/// compute time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageTimings {
    #[serde(rename = "traceId")]
    pub trace_id: TraceId,
    #[serde(serialize_with = "ser_stream")]
    pub stream: StreamRef,
    #[serde(rename = "queueNs")]
    pub queue_ns: u64,
    #[serde(rename = "inputStageNs")]
    pub input_stage_ns: u64,
    #[serde(rename = "computeNs")]
    pub compute_ns: u64,
    #[serde(rename = "outputStageNs")]
    pub output_stage_ns: u64,
}

fn ser_stream<S: serde::Serializer>(r: &StreamRef, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(r)
}

/// In-memory ring of recent timings, optionally mirrored to a CSV file.
pub struct MetricsSink {
    ring: Mutex<VecDeque<StageTimings>>,
    cap: usize,
    csv: Option<Mutex<csv::Writer<File>>>,
}

impl MetricsSink {
    pub fn new(cap: usize) -> Self {
        Self {
            ring: Mutex::new(VecDeque::new()),
            cap,
            csv: None,
        }
    }

    pub fn with_csv(cap: usize, path: &Path) -> std::io::Result<Self> {
        let w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
        Ok(Self {
            csv: Some(Mutex::new(w)),
            ..Self::new(cap)
        })
    }

    pub fn record(&self, t: StageTimings) {
        if let Some(w) = &self.csv {
            let mut w = w.lock();
            if let Err(e) = w.serialize(&t).and_then(|_| w.flush().map_err(Into::into)) {
                log::warn!("metrics csv: {e}");
            }
        }
        let mut ring = self.ring.lock();
        if ring.len() == self.cap {
            ring.pop_front();
        }
        ring.push_back(t);
    }

    pub fn snapshot(&self) -> Vec<StageTimings> {
        self.ring.lock().iter().cloned().collect()
    }

    /// Removes and returns everything currently buffered.
    pub fn drain(&self) -> Vec<StageTimings> {
        self.ring.lock().drain(..).collect()
    }
}
