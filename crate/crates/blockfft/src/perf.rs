//! Analytic performance models and their calibration.
//!
//! Two models are implemented. Amdahl's bound
//!
//! ```text
//! S(N) = 1 / ((1 - P) + P/N)
//! ```
//!
//! caps the speedup N parallel units can deliver when only a fraction P of
//! the work parallelizes. On a single machine the serial remainder is disk
//! I/O, so P is estimated from measured phase timings as the compute share;
//! in a distributed setting reads and writes spread across machines too, and
//! [`estimate_p`] accepts the phase set to count as parallel.
//!
//! The second model estimates absolute runtime as
//!
//! ```text
//! predicted_ns = unit_cost_ns * n * log2(n) / (eta * S * C)
//! ```
//!
//! for `n` total samples on `S` servers with `C` cores each and per-server
//! efficiency `eta` (default 0.8). The model is asymptotic, so its constant
//! is never assumed: [`calibrate_unit_cost`] fits `unit_cost_ns` from a
//! measured single-core run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{JobResult, TimingBreakdown};

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("parallel fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("thread count must be >= 1")]
    InvalidThreadCount,
    #[error("cluster spec invalid: servers and cores must be >= 1, efficiency in (0, 1], got S={servers} C={cores} eta={efficiency}")]
    InvalidCluster {
        servers: u32,
        cores: u32,
        efficiency: f64,
    },
    #[error("sample count must be >= 2, got {0}")]
    SampleCountTooSmall(u64),
    #[error("unit cost must be positive and finite, got {0}")]
    InvalidUnitCost(f64),
    #[error("all phase timings are zero; nothing to estimate from")]
    DegenerateTimings,
    #[error("compute time is zero; calibration needs a measured FFT run")]
    DegenerateCompute,
    #[error("jobs ran different manifests; speedups are not comparable")]
    ManifestMismatch,
    #[error("jobs ran different kernels; speedups are not comparable")]
    KernelMismatch,
    #[error("baseline must be a single-worker run, got {0} workers")]
    BaselineNotSingleWorker(usize),
    #[error("cannot compare speedup of a failed job")]
    JobNotSuccessful,
}

/// Inputs to Amdahl's bound: the parallelizable fraction P and the number of
/// concurrent units N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmdahlParams {
    pub parallel_fraction: f64,
    pub thread_count: u32,
}

impl AmdahlParams {
    pub fn new(parallel_fraction: f64, thread_count: u32) -> Result<Self, PerfError> {
        if !(0.0..=1.0).contains(&parallel_fraction) || parallel_fraction.is_nan() {
            return Err(PerfError::InvalidFraction(parallel_fraction));
        }
        if thread_count < 1 {
            return Err(PerfError::InvalidThreadCount);
        }
        Ok(AmdahlParams {
            parallel_fraction,
            thread_count,
        })
    }
}

/// `S(N) = 1/((1-P) + P/N)`. Nondecreasing in both P and N; bounded above by
/// `min(N, 1/(1-P))`.
pub fn amdahl_speedup(params: AmdahlParams) -> f64 {
    let p = params.parallel_fraction;
    let n = params.thread_count as f64;
    1.0 / ((1.0 - p) + p / n)
}

/// A phase of block processing, for selecting what counts as parallel work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Read,
    Compute,
    Write,
}

/// Single-machine framing: disk I/O is the serial remainder.
pub const PARALLEL_COMPUTE_ONLY: &[Phase] = &[Phase::Compute];
/// Distributed framing: each machine reads and writes its own blocks.
pub const PARALLEL_ALL_PHASES: &[Phase] = &[Phase::Read, Phase::Compute, Phase::Write];

/// Estimates the parallelizable fraction P as the share of total phase time
/// spent in `parallel_phases`. Scale-invariant in the timing counters.
pub fn estimate_p(timings: &TimingBreakdown, parallel_phases: &[Phase]) -> Result<f64, PerfError> {
    let total = timings.total_ns();
    if total == 0 {
        return Err(PerfError::DegenerateTimings);
    }
    let mut parallel = 0u64;
    if parallel_phases.contains(&Phase::Read) {
        parallel += timings.read_ns;
    }
    if parallel_phases.contains(&Phase::Compute) {
        parallel += timings.compute_ns;
    }
    if parallel_phases.contains(&Phase::Write) {
        parallel += timings.write_ns;
    }
    Ok(parallel as f64 / total as f64)
}

/// Cluster shape for runtime prediction: S servers, C cores each, and the
/// per-server efficiency factor (overhead discount).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub servers: u32,
    pub cores_per_server: u32,
    pub efficiency: f64,
}

pub const DEFAULT_EFFICIENCY: f64 = 0.8;

impl ClusterSpec {
    pub fn new(servers: u32, cores_per_server: u32) -> Result<Self, PerfError> {
        Self::with_efficiency(servers, cores_per_server, DEFAULT_EFFICIENCY)
    }

    pub fn with_efficiency(
        servers: u32,
        cores_per_server: u32,
        efficiency: f64,
    ) -> Result<Self, PerfError> {
        if servers < 1 || cores_per_server < 1 || !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(PerfError::InvalidCluster {
                servers,
                cores: cores_per_server,
                efficiency,
            });
        }
        Ok(ClusterSpec {
            servers,
            cores_per_server,
            efficiency,
        })
    }

    /// The effective divisor `eta * S * C`.
    pub fn effective_parallelism(&self) -> f64 {
        self.efficiency * self.servers as f64 * self.cores_per_server as f64
    }
}

/// A runtime prediction together with the inputs that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub total_samples: u64,
    pub cluster: ClusterSpec,
    pub unit_cost_ns: f64,
    pub predicted_ns: f64,
}

/// `predicted_ns = unit_cost_ns * n * log2(n) / (eta * S * C)`.
pub fn predict_runtime(
    total_samples: u64,
    cluster: ClusterSpec,
    unit_cost_ns: f64,
) -> Result<RuntimeEstimate, PerfError> {
    if total_samples < 2 {
        return Err(PerfError::SampleCountTooSmall(total_samples));
    }
    if !(unit_cost_ns > 0.0 && unit_cost_ns.is_finite()) {
        return Err(PerfError::InvalidUnitCost(unit_cost_ns));
    }
    let n = total_samples as f64;
    let predicted_ns = unit_cost_ns * n * n.log2() / cluster.effective_parallelism();
    Ok(RuntimeEstimate {
        total_samples,
        cluster,
        unit_cost_ns,
        predicted_ns,
    })
}

/// Fits the model constant from a measured run: nanoseconds of compute per
/// `sample x log2-level`, i.e. `compute_ns / (n log2 n)`.
pub fn calibrate_unit_cost(total_samples: u64, compute_ns: u64) -> Result<f64, PerfError> {
    if total_samples < 2 {
        return Err(PerfError::SampleCountTooSmall(total_samples));
    }
    if compute_ns == 0 {
        return Err(PerfError::DegenerateCompute);
    }
    let n = total_samples as f64;
    Ok(compute_ns as f64 / (n * n.log2()))
}

/// Default tolerance when flagging prediction misses: measured I/O variance
/// on virtualized hosts reaches 200%, so anything tighter would be noise.
pub const DEFAULT_WARN_THRESHOLD: f64 = 0.35;

/// Measured-vs-predicted speedup for a scaled run against its baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub baseline_wall_ns: u64,
    pub measured_wall_ns: u64,
    pub measured_speedup: f64,
    pub predicted_speedup: f64,
    pub p_estimate: f64,
    pub relative_error: f64,
    pub warn_threshold: f64,
    /// Set when the prediction missed by more than the threshold.
    pub warn: bool,
}

/// Compares a multi-worker run against a single-worker baseline of the same
/// manifest and kernel, using `params` (typically P estimated from the
/// baseline and N = the scaled run's worker count).
pub fn compare_speedup(
    baseline: &JobResult,
    scaled: &JobResult,
    params: AmdahlParams,
) -> Result<SpeedupReport, PerfError> {
    compare_speedup_with_threshold(baseline, scaled, params, DEFAULT_WARN_THRESHOLD)
}

pub fn compare_speedup_with_threshold(
    baseline: &JobResult,
    scaled: &JobResult,
    params: AmdahlParams,
    warn_threshold: f64,
) -> Result<SpeedupReport, PerfError> {
    if !baseline.success() || !scaled.success() {
        return Err(PerfError::JobNotSuccessful);
    }
    if baseline.manifest != scaled.manifest {
        return Err(PerfError::ManifestMismatch);
    }
    if baseline.kernel != scaled.kernel {
        return Err(PerfError::KernelMismatch);
    }
    if baseline.worker_count != 1 {
        return Err(PerfError::BaselineNotSingleWorker(baseline.worker_count));
    }

    let baseline_wall_ns = baseline.timings.wall_clock_ns;
    let measured_wall_ns = scaled.timings.wall_clock_ns;
    if baseline_wall_ns == 0 || measured_wall_ns == 0 {
        return Err(PerfError::DegenerateTimings);
    }
    let measured_speedup = baseline_wall_ns as f64 / measured_wall_ns as f64;
    let predicted_speedup = amdahl_speedup(params);
    let relative_error = (measured_speedup - predicted_speedup).abs() / predicted_speedup;
    Ok(SpeedupReport {
        baseline_wall_ns,
        measured_wall_ns,
        measured_speedup,
        predicted_speedup,
        p_estimate: params.parallel_fraction,
        relative_error,
        warn_threshold,
        warn: relative_error > warn_threshold,
    })
}
