use std::collections::VecDeque;
use std::fs::File;
use std::io::Write;
use std::sync::Arc;

use crate::model::{Millis, SensorUpdate};

use super::StoreError;

/// Result of one compare-timestamp-and-append attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Accepted,
    StaleDiscard,
}

/// An append attempt together with its position in the stream's
/// linearization order (0-based, counting rejected attempts too).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Appended {
    pub outcome: AppendOutcome,
    pub attempt: u64,
}

impl Appended {
    pub fn accepted(&self) -> bool {
        self.outcome == AppendOutcome::Accepted
    }
}

/// Per-stream history. Entries are strictly increasing in `lastUpdate`.
#[derive(Debug, Default)]
pub(crate) struct StreamLog {
    entries: VecDeque<Arc<SensorUpdate>>,
    last_ts: Option<Millis>,
    attempts: u64,
    cap: Option<usize>,
    pub(crate) deleted: bool,
    pub(crate) file: Option<File>,
}

impl StreamLog {
    pub(crate) fn new(cap: Option<usize>) -> Self {
        Self {
            cap,
            ..Default::default()
        }
    }

    /// Newest timestamp, 0 for an empty log.
    pub(crate) fn last_timestamp(&self) -> Millis {
        self.last_ts.unwrap_or(0)
    }

    /// The gate: accept iff strictly newer than everything accepted so far.
    /// The first update of an empty log is always accepted.
    pub(crate) fn append(&mut self, su: SensorUpdate) -> Result<Appended, StoreError> {
        let attempt = self.attempts;
        self.attempts += 1;
        if self.last_ts.is_some_and(|last| su.last_update <= last) {
            return Ok(Appended {
                outcome: AppendOutcome::StaleDiscard,
                attempt,
            });
        }
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_vec(&su).map_err(|e| StoreError::Io(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line).map_err(|e| StoreError::Io(e.to_string()))?;
        }
        self.push(su);
        Ok(Appended {
            outcome: AppendOutcome::Accepted,
            attempt,
        })
    }

    /// Appends without journaling; used when replaying a file.
    pub(crate) fn push(&mut self, su: SensorUpdate) {
        self.last_ts = Some(su.last_update);
        self.entries.push_back(Arc::new(su));
        if let Some(cap) = self.cap {
            while self.entries.len() > cap {
                self.entries.pop_front();
            }
        }
    }

    pub(crate) fn last(&self) -> Option<Arc<SensorUpdate>> {
        self.entries.back().cloned()
    }

    pub(crate) fn range(&self, from: Millis, to: Millis) -> Vec<Arc<SensorUpdate>> {
        let start = self.entries.partition_point(|e| e.last_update < from);
        self.entries
            .iter()
            .skip(start)
            .take_while(|e| e.last_update <= to)
            .cloned()
            .collect()
    }

    pub(crate) fn len(&self) -> usize {
        self.entries.len()
    }
}
