//! `blockfft` command-line tool: generate, split, run, serve, worker, merge,
//! bench, predict, verify.
//!
//! Reports go to stdout (or `--report`) as JSON; human summaries go to
//! stderr. Exit codes are a stable contract: 0 success, 1 validation error,
//! 2 runtime/processing error, 3 protocol error.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde::Serialize;

use blockfft::block::{
    merge_parts, part_file_name, BlockError, BlockManifest, MergeOptions, SampleFormat,
};
use blockfft::engine::{run_local, BlockTiming, EngineError, JobConfig, JobResult, Kernel};
use blockfft::fft::oracle::{relative_l2_error, widen};
use blockfft::fft::FftError;
use blockfft::net::{worker_run, Coordinator, CoordinatorConfig, NetError, WorkerConfig};
use blockfft::perf::{
    calibrate_unit_cost, estimate_p, predict_runtime, ClusterSpec, PerfError,
    PARALLEL_ALL_PHASES, PARALLEL_COMPUTE_ONLY,
};
use blockfft::signal::{generate_file, Signal};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;

const DEFAULT_BLOCK_SIZE: u64 = 64 * 1024 * 1024;
const BLOCK_SIZE_ENV: &str = "BLOCKFFT_BLOCK_SIZE";

#[derive(Parser)]
#[command(
    name = "blockfft",
    version,
    about = "Out-of-core batched FFT pipeline: split, transform, distribute, merge",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic test-signal sample file
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Number of samples to write
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value = "real-f32")]
        mode: SampleFormat,
        /// impulse | constant | sine:<bin> | random:<seed>
        #[arg(long)]
        signal: Signal,
        /// Record length the signal repeats over
        #[arg(long, default_value_t = 1024)]
        fft_size: usize,
        /// Overwrite an existing output file
        #[arg(long)]
        force: bool,
    },
    /// Plan the block split of an input file and write its manifest
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Where to write the manifest JSON
        #[arg(long)]
        manifest: PathBuf,
        /// Block size in bytes (suffixes KiB/MiB/GiB accepted); defaults to
        /// $BLOCKFFT_BLOCK_SIZE or 64MiB
        #[arg(long)]
        block_size: Option<String>,
        #[arg(long, default_value_t = 1024)]
        fft_size: usize,
        #[arg(long, default_value = "real-f32")]
        mode: SampleFormat,
        /// Overwrite an existing manifest
        #[arg(long)]
        force: bool,
    },
    /// Process every block on a pool of local worker threads
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Input file path (defaults to the path recorded in the manifest)
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value = "fft-forward")]
        kernel: Kernel,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the job report JSON here instead of stdout
        #[arg(long)]
        report: Option<PathBuf>,
        /// Refuse to start if estimated peak buffer memory exceeds this
        #[arg(long)]
        memory_cap: Option<String>,
        /// Leave the inverse transform unnormalized
        #[arg(long)]
        no_inverse_scale: bool,
        /// Overwrite existing parts in the output directory
        #[arg(long)]
        force: bool,
    },
    /// Coordinate a job over TCP workers
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "0.0.0.0:7341")]
        listen: String,
        #[arg(long, default_value = "fft-forward")]
        kernel: Kernel,
        /// Shared output directory (used to sanity-check parts afterwards)
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Give up when no worker is connected for this many seconds
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        /// Leave the inverse transform unnormalized
        #[arg(long)]
        no_inverse_scale: bool,
    },
    /// Process blocks assigned by a coordinator
    Worker {
        /// Coordinator address, host:port
        #[arg(long)]
        connect: String,
        /// Local path of the input file
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Concurrent block processors (defaults to available CPUs)
        #[arg(long)]
        cores: Option<u16>,
        #[arg(long)]
        worker_id: Option<String>,
    },
    /// Concatenate part files into the final output
    Merge {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        parts_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing output file and ignore unknown files in the
        /// parts directory
        #[arg(long)]
        force: bool,
        /// Remove parts and markers after a successful merge
        #[arg(long)]
        delete_parts: bool,
    },
    /// Measure single-core throughput and calibrate the runtime model
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Block size (defaults to $BLOCKFFT_BLOCK_SIZE or 64MiB)
        #[arg(long)]
        block_size: Option<String>,
        #[arg(long, default_value_t = 4096)]
        fft_size: usize,
        #[arg(long, default_value = "real-f32")]
        mode: SampleFormat,
        /// Count reads and writes as parallelizable when estimating P
        /// (the distributed framing; the default is single-machine, where
        /// disk I/O is the serial remainder)
        #[arg(long)]
        parallel_io: bool,
    },
    /// Predict cluster runtime from a calibrated unit cost
    Predict {
        /// Total samples to process
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        servers: u32,
        #[arg(long, default_value_t = 1)]
        cores: u32,
        /// Per-server efficiency factor in (0, 1]
        #[arg(long, default_value_t = 0.8)]
        efficiency: f64,
        /// Calibrated nanoseconds per sample per log2 level (see bench)
        #[arg(long)]
        unit_cost_ns: f64,
    },
    /// Compare two sample files bit-exactly or within a tolerance
    Verify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Accept relative L2 error up to this bound instead of bit equality
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, default_value = "complex-f32")]
        mode: SampleFormat,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
    Protocol(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Protocol(_) => EXIT_PROTOCOL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) | CliError::Protocol(m) => m,
        }
    }
}

impl From<BlockError> for CliError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::EmptyInput
            | BlockError::MisalignedBlockSize { .. }
            | BlockError::ManifestVersion { .. }
            | BlockError::ManifestInvalid(_)
            | BlockError::ManifestParse(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidWorkerCount(_)
            | EngineError::MemoryCap { .. }
            | EngineError::Plan(_)
            | EngineError::PlanMissing { .. } => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<FftError> for CliError {
    fn from(e: FftError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PerfError> for CliError {
    fn from(e: PerfError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Protocol(_) | NetError::UnexpectedMessage(_) | NetError::ConnectionLost => {
                CliError::Protocol(e.to_string())
            }
            NetError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blockfft: error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen {
            out,
            samples,
            mode,
            signal,
            fft_size,
            force,
        } => cmd_gen(&out, samples, mode, signal, fft_size, force),
        Command::Split {
            input,
            manifest,
            block_size,
            fft_size,
            mode,
            force,
        } => cmd_split(&input, &manifest, block_size.as_deref(), fft_size, mode, force),
        Command::Run {
            manifest,
            input,
            output_dir,
            kernel,
            workers,
            report,
            memory_cap,
            no_inverse_scale,
            force,
        } => cmd_run(
            &manifest,
            input.as_deref(),
            &output_dir,
            kernel,
            workers,
            report.as_deref(),
            memory_cap.as_deref(),
            no_inverse_scale,
            force,
        ),
        Command::Serve {
            manifest,
            listen,
            kernel,
            output_dir,
            report,
            timeout_secs,
            no_inverse_scale,
        } => cmd_serve(
            &manifest,
            &listen,
            kernel,
            &output_dir,
            report.as_deref(),
            timeout_secs,
            no_inverse_scale,
        ),
        Command::Worker {
            connect,
            input,
            output_dir,
            cores,
            worker_id,
        } => cmd_worker(&connect, &input, &output_dir, cores, worker_id),
        Command::Merge {
            manifest,
            parts_dir,
            out,
            force,
            delete_parts,
        } => cmd_merge(&manifest, &parts_dir, &out, force, delete_parts),
        Command::Bench {
            input,
            report,
            block_size,
            fft_size,
            mode,
            parallel_io,
        } => cmd_bench(
            &input,
            report.as_deref(),
            block_size.as_deref(),
            fft_size,
            mode,
            parallel_io,
        ),
        Command::Predict {
            samples,
            servers,
            cores,
            efficiency,
            unit_cost_ns,
        } => cmd_predict(samples, servers, cores, efficiency, unit_cost_ns),
        Command::Verify { a, b, tolerance, mode } => cmd_verify(&a, &b, tolerance, mode),
    }
}

/// Parses "1048576", "512KiB", "64MiB", "1G", ... (powers of 1024).
fn parse_byte_size(s: &str) -> Result<u64, CliError> {
    let s = s.trim();
    let digits_end = s
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(s.len());
    let (digits, suffix) = s.split_at(digits_end);
    let value: u64 = digits
        .parse()
        .map_err(|_| CliError::Validation(format!("bad byte size {s:?}")))?;
    let multiplier: u64 = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        other => {
            return Err(CliError::Validation(format!(
                "unknown byte-size suffix {other:?} in {s:?}"
            )))
        }
    };
    value
        .checked_mul(multiplier)
        .ok_or_else(|| CliError::Validation(format!("byte size {s:?} overflows")))
}

fn resolve_block_size(flag: Option<&str>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return parse_byte_size(s);
    }
    match std::env::var(BLOCK_SIZE_ENV) {
        Ok(v) => parse_byte_size(&v),
        Err(_) => Ok(DEFAULT_BLOCK_SIZE),
    }
}

fn refuse_overwrite(path: &Path, force: bool, what: &str) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Validation(format!(
            "{what} {} already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

/// Reports go to `--report` when given, stdout otherwise.
fn emit_report<T: Serialize>(report: &T, path: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Runtime(format!("serializing report: {e}")))?;
    match path {
        Some(p) => {
            std::fs::write(p, format!("{json}\n")).map_err(|e| io_error(p, e))?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_gen(
    out: &Path,
    samples: u64,
    mode: SampleFormat,
    signal: Signal,
    fft_size: usize,
    force: bool,
) -> Result<(), CliError> {
    if samples < 1 {
        return Err(CliError::Validation("--samples must be >= 1".into()));
    }
    if fft_size < 1 {
        return Err(CliError::Validation("--fft-size must be >= 1".into()));
    }
    refuse_overwrite(out, force, "output file")?;
    let bytes = generate_file(out, samples, mode, signal, fft_size)
        .map_err(|e| io_error(out, e))?;
    eprintln!("wrote {samples} {mode} samples ({bytes} bytes) of {signal} to {}", out.display());

    #[derive(Serialize)]
    struct GenReport<'a> {
        out: &'a Path,
        samples: u64,
        bytes: u64,
        mode: SampleFormat,
        signal: String,
        fft_size: usize,
    }
    emit_report(
        &GenReport {
            out,
            samples,
            bytes,
            mode,
            signal: signal.to_string(),
            fft_size,
        },
        None,
    )
}

fn cmd_split(
    input: &Path,
    manifest_path: &Path,
    block_size: Option<&str>,
    fft_size: usize,
    mode: SampleFormat,
    force: bool,
) -> Result<(), CliError> {
    let block_size = resolve_block_size(block_size)?;
    refuse_overwrite(manifest_path, force, "manifest")?;
    let manifest = BlockManifest::for_file(input, block_size, fft_size, mode)?;
    manifest.save(manifest_path)?;
    eprintln!(
        "planned {} blocks ({} records) of {}; manifest at {}",
        manifest.blocks.len(),
        manifest.total_records(),
        input.display(),
        manifest_path.display()
    );

    #[derive(Serialize)]
    struct SplitReport<'a> {
        manifest: &'a Path,
        input: &'a Path,
        input_file_size: u64,
        block_size: u64,
        fft_size: usize,
        mode: SampleFormat,
        blocks: usize,
        records: u64,
        input_checksum: Option<u64>,
    }
    emit_report(
        &SplitReport {
            manifest: manifest_path,
            input,
            input_file_size: manifest.input_file_size,
            block_size,
            fft_size,
            mode,
            blocks: manifest.blocks.len(),
            records: manifest.total_records(),
            input_checksum: manifest.input_checksum,
        },
        None,
    )
}

/// The JSON job report shared by `run` and `serve`.
#[derive(Serialize)]
struct JobReport {
    kernel: Kernel,
    worker_count: usize,
    success: bool,
    failed_blocks: Vec<u64>,
    output_checksum: u64,
    io_fraction: f64,
    compute_fraction: f64,
    read_ns: u64,
    compute_ns: u64,
    write_ns: u64,
    wall_clock_ns: u64,
    per_block: Vec<BlockTiming>,
}

impl JobReport {
    fn from_result(result: &JobResult) -> Self {
        JobReport {
            kernel: result.kernel,
            worker_count: result.worker_count,
            success: result.success(),
            failed_blocks: result.failed_blocks(),
            output_checksum: result.output_checksum,
            io_fraction: result.timings.io_fraction(),
            compute_fraction: result.timings.compute_fraction(),
            read_ns: result.timings.read_ns,
            compute_ns: result.timings.compute_ns,
            write_ns: result.timings.write_ns,
            wall_clock_ns: result.timings.wall_clock_ns,
            per_block: result.timings.per_block.clone(),
        }
    }
}

fn finish_job(result: &JobResult, report: Option<&Path>) -> Result<(), CliError> {
    emit_report(&JobReport::from_result(result), report)?;
    let t = &result.timings;
    eprintln!(
        "{}/{} blocks done in {:.3}s (read {:.3}s, compute {:.3}s, write {:.3}s; io fraction {:.3})",
        result.block_statuses.iter().filter(|s| s.is_done()).count(),
        result.block_statuses.len(),
        t.wall_clock_ns as f64 / 1e9,
        t.read_ns as f64 / 1e9,
        t.compute_ns as f64 / 1e9,
        t.write_ns as f64 / 1e9,
        t.io_fraction(),
    );
    if !result.success() {
        return Err(CliError::Runtime(format!(
            "blocks failed: {:?}",
            result.failed_blocks()
        )));
    }
    Ok(())
}

fn guard_existing_parts(manifest: &BlockManifest, output_dir: &Path, force: bool) -> Result<(), CliError> {
    if force || !output_dir.exists() {
        return Ok(());
    }
    for block in &manifest.blocks {
        let part = output_dir.join(part_file_name(block.byte_offset));
        if part.exists() {
            return Err(CliError::Validation(format!(
                "part {} already exists (pass --force to reprocess)",
                part.display()
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    manifest_path: &Path,
    input: Option<&Path>,
    output_dir: &Path,
    kernel: Kernel,
    workers: usize,
    report: Option<&Path>,
    memory_cap: Option<&str>,
    no_inverse_scale: bool,
    force: bool,
) -> Result<(), CliError> {
    let manifest = BlockManifest::load(manifest_path)?;
    let input_path = match input {
        Some(p) => p.to_path_buf(),
        None => manifest.input_path.clone().ok_or_else(|| {
            CliError::Validation("manifest records no input path; pass --input".into())
        })?,
    };
    guard_existing_parts(&manifest, output_dir, force)?;

    let mut config = JobConfig::new(manifest, input_path, output_dir, kernel).with_workers(workers);
    config.scale_inverse = !no_inverse_scale;
    if let Some(cap) = memory_cap {
        config.memory_cap = Some(parse_byte_size(cap)?);
    }
    let result = run_local(&config)?;
    finish_job(&result, report)
}

fn cmd_serve(
    manifest_path: &Path,
    listen: &str,
    kernel: Kernel,
    output_dir: &Path,
    report: Option<&Path>,
    timeout_secs: u64,
    no_inverse_scale: bool,
) -> Result<(), CliError> {
    let manifest = BlockManifest::load(manifest_path)?;
    let coordinator = Coordinator::bind(listen)?;
    eprintln!(
        "coordinating {} blocks on {}",
        manifest.blocks.len(),
        coordinator.local_addr()
    );
    let mut config = CoordinatorConfig::new(kernel);
    config.scale_inverse = !no_inverse_scale;
    config.worker_timeout = Duration::from_secs(timeout_secs);
    let result = coordinator.serve(&manifest, &config)?;

    // Workers write parts to their own --output-dir; when that is this
    // directory (shared filesystem), the completed parts should all be here.
    if result.success() {
        let missing: Vec<u64> = manifest
            .blocks
            .iter()
            .filter(|b| !output_dir.join(part_file_name(b.byte_offset)).is_file())
            .map(|b| b.block_index)
            .collect();
        if !missing.is_empty() {
            eprintln!(
                "note: {} parts are not visible under {} (workers wrote elsewhere?)",
                missing.len(),
                output_dir.display()
            );
        }
    }
    finish_job(&result, report)
}

fn cmd_worker(
    connect: &str,
    input: &Path,
    output_dir: &Path,
    cores: Option<u16>,
    worker_id: Option<String>,
) -> Result<(), CliError> {
    let cores = match cores {
        Some(c) => c,
        None => std::thread::available_parallelism()
            .map(|n| n.get().min(u16::MAX as usize) as u16)
            .unwrap_or(1),
    };
    let mut config = WorkerConfig::new(connect, input, output_dir);
    config.cores = cores;
    if let Some(id) = worker_id {
        config.worker_id = id;
    }
    let summary = worker_run(&config)?;
    eprintln!(
        "worker {}: {} blocks done, {} failed",
        config.worker_id, summary.blocks_done, summary.blocks_failed
    );

    #[derive(Serialize)]
    struct WorkerReport<'a> {
        worker_id: &'a str,
        cores: u16,
        blocks_done: u64,
        blocks_failed: u64,
    }
    emit_report(
        &WorkerReport {
            worker_id: &config.worker_id,
            cores,
            blocks_done: summary.blocks_done,
            blocks_failed: summary.blocks_failed,
        },
        None,
    )
}

fn cmd_merge(
    manifest_path: &Path,
    parts_dir: &Path,
    out: &Path,
    force: bool,
    delete_parts: bool,
) -> Result<(), CliError> {
    let manifest = BlockManifest::load(manifest_path)?;
    refuse_overwrite(out, force, "merged output")?;
    let summary = merge_parts(
        parts_dir,
        &manifest,
        out,
        MergeOptions {
            force,
            delete_parts,
        },
    )?;
    eprintln!(
        "merged {} parts ({} bytes) into {}",
        summary.parts_merged,
        summary.bytes_written,
        out.display()
    );

    #[derive(Serialize)]
    struct MergeReport<'a> {
        out: &'a Path,
        parts_merged: usize,
        bytes_written: u64,
        output_crc64: u64,
    }
    emit_report(
        &MergeReport {
            out,
            parts_merged: summary.parts_merged,
            bytes_written: summary.bytes_written,
            output_crc64: summary.output_crc64,
        },
        None,
    )
}

/// Temp parts directory for bench runs, removed on drop.
struct ScratchDir(PathBuf);

impl ScratchDir {
    fn create(label: &str) -> Result<Self, CliError> {
        let path = std::env::temp_dir().join(format!(
            "blockfft-{label}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos())
                .unwrap_or(0)
        ));
        std::fs::create_dir_all(&path).map_err(|e| io_error(&path, e))?;
        Ok(ScratchDir(path))
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn cmd_bench(
    input: &Path,
    report: Option<&Path>,
    block_size: Option<&str>,
    fft_size: usize,
    mode: SampleFormat,
    parallel_io: bool,
) -> Result<(), CliError> {
    let block_size = resolve_block_size(block_size)?;
    let manifest = BlockManifest::for_file(input, block_size, fft_size, mode)?;
    let scratch = ScratchDir::create("bench")?;

    let config = JobConfig::new(manifest.clone(), input, &scratch.0, Kernel::FftForward);
    let result = run_local(&config)?;
    if !result.success() {
        return Err(CliError::Runtime(format!(
            "bench run failed on blocks {:?}",
            result.failed_blocks()
        )));
    }

    let total_samples = manifest.total_records() * fft_size as u64;
    let unit_cost_ns = calibrate_unit_cost(total_samples, result.timings.compute_ns)?;
    let phases = if parallel_io {
        PARALLEL_ALL_PHASES
    } else {
        PARALLEL_COMPUTE_ONLY
    };
    let p_estimate = estimate_p(&result.timings, phases)?;
    let p_single_machine = estimate_p(&result.timings, PARALLEL_COMPUTE_ONLY)?;
    let fractions = result.fractions()?;

    eprintln!(
        "bench: {} samples, unit cost {:.6} ns/(sample*level), io fraction {:.3}, P {:.3}",
        total_samples, unit_cost_ns, fractions.io_fraction, p_estimate
    );

    #[derive(Serialize)]
    struct BenchReport<'a> {
        input: &'a Path,
        mode: SampleFormat,
        fft_size: usize,
        block_size: u64,
        blocks: usize,
        total_samples: u64,
        read_ns: u64,
        compute_ns: u64,
        write_ns: u64,
        wall_clock_ns: u64,
        io_fraction: f64,
        compute_fraction: f64,
        /// P under the framing selected by --parallel-io.
        p_estimate: f64,
        framing: &'static str,
        p_single_machine: f64,
        unit_cost_ns: f64,
    }
    emit_report(
        &BenchReport {
            input,
            mode,
            fft_size,
            block_size,
            blocks: manifest.blocks.len(),
            total_samples,
            read_ns: result.timings.read_ns,
            compute_ns: result.timings.compute_ns,
            write_ns: result.timings.write_ns,
            wall_clock_ns: result.timings.wall_clock_ns,
            io_fraction: fractions.io_fraction,
            compute_fraction: fractions.compute_fraction,
            p_estimate,
            framing: if parallel_io { "distributed" } else { "single-machine" },
            p_single_machine,
            unit_cost_ns,
        },
        report,
    )
}

fn cmd_predict(
    samples: u64,
    servers: u32,
    cores: u32,
    efficiency: f64,
    unit_cost_ns: f64,
) -> Result<(), CliError> {
    let cluster = ClusterSpec::with_efficiency(servers, cores, efficiency)?;
    let estimate = predict_runtime(samples, cluster, unit_cost_ns)?;
    eprintln!(
        "predicted {:.3}s on {} server(s) x {} core(s) at efficiency {}",
        estimate.predicted_ns / 1e9,
        servers,
        cores,
        efficiency
    );
    emit_report(&estimate, None)
}

fn read_samples(path: &Path, mode: SampleFormat) -> Result<Vec<blockfft::ComplexSample>, CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| io_error(path, e))?;
    let mut samples = Vec::new();
    mode.decode_into(&bytes, &mut samples);
    Ok(samples)
}

fn cmd_verify(
    a: &Path,
    b: &Path,
    tolerance: Option<f64>,
    mode: SampleFormat,
) -> Result<(), CliError> {
    let len_a = std::fs::metadata(a).map_err(|e| io_error(a, e))?.len();
    let len_b = std::fs::metadata(b).map_err(|e| io_error(b, e))?.len();

    #[derive(Serialize)]
    struct VerifyReport<'a> {
        a: &'a Path,
        b: &'a Path,
        bytes_a: u64,
        bytes_b: u64,
        equal: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        relative_l2_error: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    }

    let mut verdict = VerifyReport {
        a,
        b,
        bytes_a: len_a,
        bytes_b: len_b,
        equal: false,
        relative_l2_error: None,
        tolerance,
        reason: None,
    };

    if len_a != len_b {
        verdict.reason = Some(format!("size mismatch: {len_a} vs {len_b} bytes"));
        emit_report(&verdict, None)?;
        return Err(CliError::Runtime(verdict.reason.unwrap()));
    }

    match tolerance {
        None => {
            let mut fa = BufReader::with_capacity(1 << 20, File::open(a).map_err(|e| io_error(a, e))?);
            let mut fb = BufReader::with_capacity(1 << 20, File::open(b).map_err(|e| io_error(b, e))?);
            let mut buf_a = vec![0u8; 1 << 16];
            let mut buf_b = vec![0u8; 1 << 16];
            let equal = loop {
                let n = fa.read(&mut buf_a).map_err(|e| io_error(a, e))?;
                if n == 0 {
                    break true;
                }
                fb.read_exact(&mut buf_b[..n]).map_err(|e| io_error(b, e))?;
                if buf_a[..n] != buf_b[..n] {
                    break false;
                }
            };
            verdict.equal = equal;
            if !equal {
                verdict.reason = Some("contents differ".into());
            }
        }
        Some(tol) => {
            let sa = read_samples(a, mode)?;
            let sb = read_samples(b, mode)?;
            let err = relative_l2_error(&widen(&sa), &widen(&sb));
            verdict.relative_l2_error = Some(err);
            verdict.equal = err <= tol;
            if !verdict.equal {
                verdict.reason = Some(format!("relative L2 error {err} exceeds tolerance {tol}"));
            }
        }
    }

    let equal = verdict.equal;
    let reason = verdict.reason.clone();
    emit_report(&verdict, None)?;
    if equal {
        eprintln!("files match");
        Ok(())
    } else {
        Err(CliError::Runtime(reason.unwrap_or_else(|| "files differ".into())))
    }
}
