//! Per-phase timing counters, measured with the monotonic clock.
//!
//! Timer granularity varies across hosts (and is notoriously poor under
//! virtualization), so per-block triples are kept alongside the aggregates
//! instead of reporting means alone.

use serde::{Deserialize, Serialize};

/// Read/compute/write nanoseconds for one block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockTiming {
    pub block_index: u64,
    pub read_ns: u64,
    pub compute_ns: u64,
    pub write_ns: u64,
}

impl BlockTiming {
    pub fn total_ns(&self) -> u64 {
        self.read_ns + self.compute_ns + self.write_ns
    }
}

/// Aggregate and per-block phase timings for one job.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub read_ns: u64,
    pub compute_ns: u64,
    pub write_ns: u64,
    pub per_block: Vec<BlockTiming>,
    /// End-to-end duration of the whole job, all workers included.
    pub wall_clock_ns: u64,
}

impl TimingBreakdown {
    /// Builds the aggregate view; the sums are exactly the sums of the
    /// per-block entries, which are kept sorted by block index.
    pub fn from_blocks(mut per_block: Vec<BlockTiming>, wall_clock_ns: u64) -> Self {
        per_block.sort_by_key(|b| b.block_index);
        let read_ns = per_block.iter().map(|b| b.read_ns).sum();
        let compute_ns = per_block.iter().map(|b| b.compute_ns).sum();
        let write_ns = per_block.iter().map(|b| b.write_ns).sum();
        TimingBreakdown {
            read_ns,
            compute_ns,
            write_ns,
            per_block,
            wall_clock_ns,
        }
    }

    /// Sum of all phase counters (not wall time; workers overlap).
    pub fn total_ns(&self) -> u64 {
        self.read_ns + self.compute_ns + self.write_ns
    }

    /// Fraction of phase time spent reading and writing, in `[0, 1]`.
    pub fn io_fraction(&self) -> f64 {
        let total = self.total_ns();
        if total == 0 {
            return 0.0;
        }
        (self.read_ns + self.write_ns) as f64 / total as f64
    }

    pub fn compute_fraction(&self) -> f64 {
        let total = self.total_ns();
        if total == 0 {
            return 0.0;
        }
        self.compute_ns as f64 / total as f64
    }
}
