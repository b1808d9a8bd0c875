//! Long-term memory: a bounded log of per-window facts with exact running
//! aggregates over the retained horizon.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::RoutingAction;
use crate::sensing::DegradationFlags;

pub const DEFAULT_CAPACITY: usize = 10_000;
/// The handover-condition flag is raised once a blockage run exceeds this.
pub const BLOCKAGE_FLAG_RUN: u64 = 5;

/// One structured fact per window. Field names are the JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub tick: u64,
    pub flags: DegradationFlags,
    pub action: RoutingAction,
    pub blocked: bool,
    pub block_prob: f64,
    pub reward: f64,
    pub environment: String,
}

/// Tick range covered by the retained log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub first_tick: Option<u64>,
    pub last_tick: Option<u64>,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Newest first.
    pub entries: Vec<WindowSummary>,
    pub horizon: Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    capacity: usize,
    log: VecDeque<WindowSummary>,
    degraded_counts: [u64; 4],
    last_tick: Option<u64>,
    blockage_run: u64,
    handover_flag: bool,
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_CAPACITY).expect("default capacity")
    }
}

impl MemoryStore {
    pub fn with_capacity(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("memory capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            log: VecDeque::new(),
            degraded_counts: [0; 4],
            last_tick: None,
            blockage_run: 0,
            handover_flag: false,
        })
    }

    pub fn record_window(&mut self, summary: WindowSummary) -> Result<()> {
        if let Some(last) = self.last_tick {
            if summary.tick <= last {
                return Err(Error::Sequencing {
                    last,
                    got: summary.tick,
                });
            }
        }
        if self.log.len() == self.capacity {
            let old = self.log.pop_front().expect("non-empty at capacity");
            for (c, f) in self.degraded_counts.iter_mut().zip(old.flags.0) {
                *c -= f as u64;
            }
        }
        for (c, f) in self.degraded_counts.iter_mut().zip(summary.flags.0) {
            *c += f as u64;
        }
        self.blockage_run = if summary.blocked { self.blockage_run + 1 } else { 0 };
        self.handover_flag = self.blockage_run > BLOCKAGE_FLAG_RUN;
        self.last_tick = Some(summary.tick);
        self.log.push_back(summary);
        Ok(())
    }

    /// Mean degraded flag per modality over the retained log.
    pub fn degraded_fraction(&self) -> [f64; 4] {
        if self.log.is_empty() {
            return [0.0; 4];
        }
        let n = self.log.len() as f64;
        self.degraded_counts.map(|c| c as f64 / n)
    }

    pub fn blockage_run(&self) -> u64 {
        self.blockage_run
    }

    pub fn handover_flag(&self) -> bool {
        self.handover_flag
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn horizon(&self) -> Horizon {
        Horizon {
            first_tick: self.log.front().map(|s| s.tick),
            last_tick: self.log.back().map(|s| s.tick),
            len: self.log.len(),
        }
    }

    pub fn query_context(&self, filter: impl Fn(&WindowSummary) -> bool) -> QueryResult {
        QueryResult {
            entries: self.log.iter().rev().filter(|s| filter(s)).cloned().collect(),
            horizon: self.horizon(),
        }
    }

    pub fn export_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.log {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuilds a store by replaying every line through `record_window`.
    pub fn import_jsonl<R: BufRead>(r: R, capacity: usize) -> Result<Self> {
        let mut store = Self::with_capacity(capacity)?;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            store.record_window(serde_json::from_str(&line)?)?;
        }
        Ok(store)
    }
}
