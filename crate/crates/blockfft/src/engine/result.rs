//! Job outcome: per-block statuses, timings, and an output fingerprint.

use serde::{Deserialize, Serialize};

use super::timing::TimingBreakdown;
use super::{EngineError, Kernel};
use crate::block::BlockManifest;
use crate::checksum::CRC64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BlockStatus {
    Done,
    Failed { reason: String },
}

impl BlockStatus {
    pub fn is_done(&self) -> bool {
        matches!(self, BlockStatus::Done)
    }
}

/// Fingerprint of a job's output: CRC-64 over the `(byte_offset, part crc)`
/// pairs of every part in ascending offset order. Two jobs that produced
/// byte-identical parts produce equal fingerprints, without re-reading the
/// output files.
pub fn parts_checksum(parts: &[(u64, u64)]) -> u64 {
    let mut digest = CRC64.digest();
    for (offset, crc) in parts {
        digest.update(&offset.to_le_bytes());
        digest.update(&crc.to_le_bytes());
    }
    digest.finalize()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobResult {
    pub manifest: BlockManifest,
    pub kernel: Kernel,
    /// Parallel capacity the job ran with (threads locally; total announced
    /// cores for a distributed run).
    pub worker_count: usize,
    pub timings: TimingBreakdown,
    /// One entry per manifest block, index-aligned.
    pub block_statuses: Vec<BlockStatus>,
    pub output_checksum: u64,
}

/// Phase-time split of a successful run, the input to Amdahl P estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFractions {
    pub io_fraction: f64,
    pub compute_fraction: f64,
}

impl JobResult {
    /// A job succeeded iff every block completed.
    pub fn success(&self) -> bool {
        self.block_statuses.iter().all(BlockStatus::is_done)
    }

    pub fn failed_blocks(&self) -> Vec<u64> {
        self.block_statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_done())
            .map(|(i, _)| i as u64)
            .collect()
    }

    /// I/O and compute fractions of total phase time; they sum to one.
    pub fn fractions(&self) -> Result<PhaseFractions, EngineError> {
        if !self.success() {
            return Err(EngineError::JobNotSuccessful);
        }
        if self.timings.total_ns() == 0 {
            return Err(EngineError::DegenerateTimings);
        }
        Ok(PhaseFractions {
            io_fraction: self.timings.io_fraction(),
            compute_fraction: self.timings.compute_fraction(),
        })
    }
}

/// Free-function spelling of [`JobResult::fractions`].
pub fn report_fractions(result: &JobResult) -> Result<PhaseFractions, EngineError> {
    result.fractions()
}
