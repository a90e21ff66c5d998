//! The map-only executor.
//!
//! A job is a manifest plus a kernel. Blocks are independent work units
//! pulled from a shared queue by `worker_count` threads (dynamic load
//! balancing — stragglers don't idle the pool), and there is no reduce step:
//! every block writes its own part file directly. Per-block FFT arithmetic
//! is sequential and deterministic, so merged output is bit-identical for
//! any worker count and any scheduling order.

mod result;
mod timing;

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use result::{parts_checksum, report_fractions, BlockStatus, JobResult, PhaseFractions};
pub use timing::{BlockTiming, TimingBreakdown};

use crate::block::{
    read_block, write_part, BlockDescriptor, BlockError, BlockManifest, OutputPart, SampleFormat,
};
use crate::fft::{Direction, FftError, FftPlan};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("worker count must be >= 1, got {0}")]
    InvalidWorkerCount(usize),
    #[error("estimated peak memory {required} bytes exceeds the configured cap {cap}")]
    MemoryCap { required: u64, cap: u64 },
    #[error("kernel {kernel:?} requires an FFT plan")]
    PlanMissing { kernel: Kernel },
    #[error("block {block_index}: {source}")]
    BlockIo {
        block_index: u64,
        #[source]
        source: BlockError,
    },
    #[error("block {block_index}: {source}")]
    BlockFft {
        block_index: u64,
        #[source]
        source: FftError,
    },
    #[error("plan setup failed: {0}")]
    Plan(#[from] FftError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fractions undefined: all phase timings are zero")]
    DegenerateTimings,
    #[error("job did not complete successfully")]
    JobNotSuccessful,
}

/// The transform applied to each block.
///
/// `Identity` copies samples through untouched. Floating-point rounding makes
/// forward-then-inverse only approximately the identity, so this kernel is
/// the pipeline's bit-exactness oracle; it is also the seam where another
/// compute backend would attach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    FftForward,
    FftInverse,
    Identity,
}

impl Kernel {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Kernel::FftForward => Some(Direction::Forward),
            Kernel::FftInverse => Some(Direction::Inverse),
            Kernel::Identity => None,
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::FftForward => write!(f, "fft-forward"),
            Kernel::FftInverse => write!(f, "fft-inverse"),
            Kernel::Identity => write!(f, "identity"),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fft-forward" => Ok(Kernel::FftForward),
            "fft-inverse" => Ok(Kernel::FftInverse),
            "identity" => Ok(Kernel::Identity),
            other => Err(format!(
                "unknown kernel {other:?} (expected fft-forward, fft-inverse or identity)"
            )),
        }
    }
}

/// Everything one local job needs.
#[derive(Clone, Debug)]
pub struct JobConfig {
    pub manifest: BlockManifest,
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub kernel: Kernel,
    pub worker_count: usize,
    /// Upper bound on estimated peak buffer memory (roughly
    /// `worker_count x decoded block size`); `None` disables the check.
    pub memory_cap: Option<u64>,
    /// Scale the inverse transform by `1/fft_size` (the default).
    pub scale_inverse: bool,
}

impl JobConfig {
    pub fn new(
        manifest: BlockManifest,
        input_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
        kernel: Kernel,
    ) -> Self {
        JobConfig {
            manifest,
            input_path: input_path.into(),
            output_dir: output_dir.into(),
            kernel,
            worker_count: 1,
            memory_cap: None,
            scale_inverse: true,
        }
    }

    pub fn with_workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count;
        self
    }

    /// Decoded samples are complex f32, so a block buffer costs
    /// `record_count * fft_size * 8` bytes; one is live per in-flight block.
    pub fn estimated_peak_memory(&self) -> u64 {
        let per_block = self
            .manifest
            .blocks
            .iter()
            .map(|b| b.decoded_samples(self.manifest.fft_size) * 8)
            .max()
            .unwrap_or(0);
        per_block * self.worker_count as u64
    }
}

/// Shared per-job context handed to [`process_block`].
#[derive(Clone, Copy, Debug)]
pub struct BlockContext<'a> {
    pub input_path: &'a Path,
    pub output_dir: &'a Path,
    pub sample_format: SampleFormat,
    pub fft_size: usize,
    pub kernel: Kernel,
    /// Plan whose batch count matches the block's record count; `None` only
    /// for the identity kernel.
    pub plan: Option<&'a FftPlan>,
}

/// Runs one block through read → kernel → write, timing each phase around
/// exactly that call. The block's samples live in one contiguous buffer for
/// the whole pass.
pub fn process_block(
    file: &mut File,
    desc: &BlockDescriptor,
    expected_crc: Option<u64>,
    ctx: &BlockContext<'_>,
) -> Result<(OutputPart, BlockTiming), EngineError> {
    let block_index = desc.block_index;

    let start = Instant::now();
    let mut samples = read_block(
        file,
        ctx.input_path,
        desc,
        ctx.sample_format,
        ctx.fft_size,
        expected_crc,
    )
    .map_err(|source| EngineError::BlockIo {
        block_index,
        source,
    })?;
    let read_ns = start.elapsed().as_nanos() as u64;

    let start = Instant::now();
    match ctx.kernel {
        Kernel::Identity => {
            // One in-place pass over the buffer, no arithmetic.
            for s in samples.iter() {
                std::hint::black_box(s);
            }
        }
        Kernel::FftForward | Kernel::FftInverse => {
            let plan = ctx.plan.ok_or(EngineError::PlanMissing { kernel: ctx.kernel })?;
            plan.execute(&mut samples)
                .map_err(|source| EngineError::BlockFft {
                    block_index,
                    source,
                })?;
        }
    }
    let compute_ns = start.elapsed().as_nanos() as u64;

    let start = Instant::now();
    let part = write_part(ctx.output_dir, desc, ctx.fft_size, &samples).map_err(|source| {
        EngineError::BlockIo {
            block_index,
            source,
        }
    })?;
    let write_ns = start.elapsed().as_nanos() as u64;

    Ok((
        part,
        BlockTiming {
            block_index,
            read_ns,
            compute_ns,
            write_ns,
        },
    ))
}

/// Builds one plan per distinct record count in the manifest (at most two:
/// full blocks and the tail block). Identity jobs need none.
pub(crate) fn build_plans(
    manifest: &BlockManifest,
    kernel: Kernel,
    scale_inverse: bool,
) -> Result<HashMap<u64, Arc<FftPlan>>, FftError> {
    let mut plans = HashMap::new();
    if let Some(direction) = kernel.direction() {
        for block in &manifest.blocks {
            if let std::collections::hash_map::Entry::Vacant(slot) =
                plans.entry(block.record_count)
            {
                let mut plan =
                    FftPlan::new(manifest.fft_size, block.record_count as usize, direction)?;
                if !scale_inverse {
                    plan = plan.without_inverse_scaling();
                }
                slot.insert(Arc::new(plan));
            }
        }
    }
    Ok(plans)
}

/// Executes the whole job on a pool of local worker threads.
///
/// Setup failures (bad configuration, unreadable input, plan errors) return
/// `Err`. Per-block failures do not abort the run: the remaining blocks are
/// still processed, and the returned [`JobResult`] reports every block's
/// status, with `success()` false if any failed. Failed blocks leave at most
/// a `.tmp` file behind, never a final part.
pub fn run_local(config: &JobConfig) -> Result<JobResult, EngineError> {
    if config.worker_count < 1 {
        return Err(EngineError::InvalidWorkerCount(config.worker_count));
    }
    if let Some(cap) = config.memory_cap {
        let required = config.estimated_peak_memory();
        if required > cap {
            return Err(EngineError::MemoryCap { required, cap });
        }
    }
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| EngineError::Io {
            path: config.output_dir.clone(),
            source: e,
        })?;

    let manifest = &config.manifest;
    let plans = build_plans(manifest, config.kernel, config.scale_inverse)?;

    // One independent handle per worker; fail fast before spawning.
    let mut handles = Vec::with_capacity(config.worker_count);
    for _ in 0..config.worker_count {
        handles.push(File::open(&config.input_path).map_err(|e| EngineError::Io {
            path: config.input_path.clone(),
            source: e,
        })?);
    }

    let queue: Mutex<std::collections::VecDeque<usize>> =
        Mutex::new((0..manifest.blocks.len()).collect());
    type BlockOutcome = (usize, Result<(OutputPart, BlockTiming), EngineError>);
    let outcomes: Mutex<Vec<BlockOutcome>> = Mutex::new(Vec::with_capacity(manifest.blocks.len()));

    let wall = Instant::now();
    std::thread::scope(|scope| {
        let queue = &queue;
        let outcomes = &outcomes;
        let plans = &plans;
        for mut file in handles.drain(..) {
            scope.spawn(move || loop {
                let index = match queue.lock().unwrap().pop_front() {
                    Some(i) => i,
                    None => break,
                };
                let desc = &manifest.blocks[index];
                let ctx = BlockContext {
                    input_path: &config.input_path,
                    output_dir: &config.output_dir,
                    sample_format: manifest.sample_format,
                    fft_size: manifest.fft_size,
                    kernel: config.kernel,
                    plan: plans.get(&desc.record_count).map(Arc::as_ref),
                };
                let outcome =
                    process_block(&mut file, desc, manifest.block_checksum(desc.block_index), &ctx);
                outcomes.lock().unwrap().push((index, outcome));
            });
        }
    });
    let wall_clock_ns = wall.elapsed().as_nanos() as u64;

    let mut statuses = vec![
        BlockStatus::Failed {
            reason: "not processed".into()
        };
        manifest.blocks.len()
    ];
    let mut block_timings = Vec::with_capacity(manifest.blocks.len());
    let mut parts: Vec<(u64, u64)> = Vec::with_capacity(manifest.blocks.len());
    for (index, outcome) in outcomes.into_inner().unwrap() {
        match outcome {
            Ok((part, timing)) => {
                statuses[index] = BlockStatus::Done;
                block_timings.push(timing);
                parts.push((part.byte_offset, part.crc64));
            }
            Err(err) => {
                statuses[index] = BlockStatus::Failed {
                    reason: err.to_string(),
                };
            }
        }
    }
    parts.sort_unstable();

    Ok(JobResult {
        manifest: manifest.clone(),
        kernel: config.kernel,
        worker_count: config.worker_count,
        timings: TimingBreakdown::from_blocks(block_timings, wall_clock_ns),
        block_statuses: statuses,
        output_checksum: parts_checksum(&parts),
    })
}
