//! Worker process: Hello, then Assign → process → BlockDone until Shutdown.

use std::collections::HashMap;
use std::fs::File;
use std::net::TcpStream;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Mutex};

use super::message::{
    read_message, write_message, Assignment, Message, ProtocolError, MAX_WORKER_ID_LEN,
};
use super::NetError;
use crate::block::BlockError;
use crate::engine::{process_block, BlockContext, EngineError};
use crate::fft::FftPlan;

#[derive(Clone, Debug)]
pub struct WorkerConfig {
    pub coordinator_addr: String,
    /// Local path of the input file (a shared filesystem mount or a replica;
    /// per-block CRCs from the assignments keep it honest).
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    /// Blocks this worker processes concurrently, announced in Hello.
    pub cores: u16,
    pub worker_id: String,
}

impl WorkerConfig {
    pub fn new(
        coordinator_addr: impl Into<String>,
        input_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        WorkerConfig {
            coordinator_addr: coordinator_addr.into(),
            input_path: input_path.into(),
            output_dir: output_dir.into(),
            cores: 1,
            worker_id: format!("worker-{}", std::process::id()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerSummary {
    pub blocks_done: u64,
    pub blocks_failed: u64,
}

/// Connects to the coordinator and works until told to shut down.
///
/// Returns the tally on a clean Shutdown. A lost connection abandons the
/// run with an error; blocks that were mid-write leave only `.tmp` files,
/// so a reassigned copy of the same block can never collide with them.
pub fn worker_run(config: &WorkerConfig) -> Result<WorkerSummary, NetError> {
    if config.cores < 1 {
        return Err(NetError::InvalidConfig("cores must be >= 1".into()));
    }
    if config.worker_id.len() > MAX_WORKER_ID_LEN {
        return Err(NetError::InvalidConfig(format!(
            "worker id is {} bytes, limit {MAX_WORKER_ID_LEN}",
            config.worker_id.len()
        )));
    }
    std::fs::create_dir_all(&config.output_dir).map_err(|source| NetError::Io {
        context: config.output_dir.display().to_string(),
        source,
    })?;

    let mut stream =
        TcpStream::connect(&config.coordinator_addr).map_err(|source| NetError::Connect {
            addr: config.coordinator_addr.clone(),
            source,
        })?;
    let _ = stream.set_nodelay(true);
    write_message(
        &mut stream,
        &Message::Hello {
            worker_id: config.worker_id.clone(),
            cores: config.cores,
        },
    )?;

    let writer = Mutex::new(stream.try_clone().map_err(|source| NetError::Io {
        context: "cloning control socket".into(),
        source,
    })?);
    let (tx, rx) = mpsc::channel::<Assignment>();
    let rx = Mutex::new(rx);
    let done = AtomicU64::new(0);
    let failed = AtomicU64::new(0);

    let outcome = std::thread::scope(|scope| {
        for _ in 0..config.cores {
            scope.spawn(|| pool_loop(config, &rx, &writer, &done, &failed));
        }

        let outcome = loop {
            match read_message(&mut stream) {
                Ok(Message::Assign(assignment)) => {
                    if tx.send(assignment).is_err() {
                        break Err(NetError::ConnectionLost);
                    }
                }
                Ok(Message::Shutdown) => break Ok(()),
                Ok(_) => break Err(NetError::UnexpectedMessage("worker got a worker message")),
                Err(ProtocolError::Closed) => break Err(NetError::ConnectionLost),
                Err(e) => break Err(e.into()),
            }
        };
        // Closing the channel drains the pool; in-flight blocks finish
        // (their completed parts are valid and idempotent), queued ones are
        // dropped with the receiver.
        drop(tx);
        outcome
    });

    outcome.map(|()| WorkerSummary {
        blocks_done: done.load(Ordering::Relaxed),
        blocks_failed: failed.load(Ordering::Relaxed),
    })
}

type PlanKey = (u64, u32, bool, bool);

fn pool_loop(
    config: &WorkerConfig,
    rx: &Mutex<mpsc::Receiver<Assignment>>,
    writer: &Mutex<TcpStream>,
    done: &AtomicU64,
    failed: &AtomicU64,
) {
    let mut input = File::open(&config.input_path);
    let mut plans: HashMap<PlanKey, FftPlan> = HashMap::new();

    loop {
        let assignment = {
            let guard = rx.lock().unwrap();
            match guard.recv() {
                Ok(a) => a,
                Err(_) => return,
            }
        };

        let reply = match &mut input {
            Err(e) => Message::BlockFailed {
                block_index: assignment.descriptor.block_index,
                reason: truncate_reason(&format!(
                    "cannot open input {}: {e}",
                    config.input_path.display()
                )),
            },
            Ok(file) => run_assignment(file, config, &assignment, &mut plans),
        };

        match &reply {
            Message::BlockDone { .. } => done.fetch_add(1, Ordering::Relaxed),
            _ => failed.fetch_add(1, Ordering::Relaxed),
        };

        let mut w = writer.lock().unwrap();
        if write_message(&mut *w, &reply).is_err() {
            // Socket is gone; the reader thread is on its way out too.
            return;
        }
    }
}

fn run_assignment(
    file: &mut File,
    config: &WorkerConfig,
    assignment: &Assignment,
    plans: &mut HashMap<PlanKey, FftPlan>,
) -> Message {
    let block_index = assignment.descriptor.block_index;
    let fft_size = assignment.fft_size as usize;

    let plan = match assignment.kernel.direction() {
        None => None,
        Some(direction) => {
            let key: PlanKey = (
                assignment.descriptor.record_count,
                assignment.fft_size,
                assignment.kernel == crate::engine::Kernel::FftInverse,
                assignment.scale_inverse,
            );
            if let std::collections::hash_map::Entry::Vacant(slot) = plans.entry(key) {
                match FftPlan::new(
                    fft_size,
                    assignment.descriptor.record_count as usize,
                    direction,
                ) {
                    Ok(plan) => {
                        slot.insert(if assignment.scale_inverse {
                            plan
                        } else {
                            plan.without_inverse_scaling()
                        });
                    }
                    Err(e) => {
                        return Message::BlockFailed {
                            block_index,
                            reason: truncate_reason(&format!("plan setup failed: {e}")),
                        }
                    }
                }
            }
            plans.get(&key)
        }
    };

    let ctx = BlockContext {
        input_path: &config.input_path,
        output_dir: &config.output_dir,
        sample_format: assignment.sample_format,
        fft_size,
        kernel: assignment.kernel,
        plan,
    };
    match process_block(file, &assignment.descriptor, assignment.input_crc, &ctx) {
        Ok((part, timing)) => Message::BlockDone {
            block_index,
            output_crc: part.crc64,
            read_ns: timing.read_ns,
            compute_ns: timing.compute_ns,
            write_ns: timing.write_ns,
        },
        Err(e) => Message::BlockFailed {
            block_index,
            reason: failure_reason(&e),
        },
    }
}

/// Stable reason string for input verification failures; anything else is
/// reported verbatim.
fn failure_reason(err: &EngineError) -> String {
    match err {
        EngineError::BlockIo {
            source: BlockError::ChecksumMismatch { .. },
            ..
        } => truncate_reason(&format!("input mismatch: {err}")),
        other => truncate_reason(&other.to_string()),
    }
}

fn truncate_reason(reason: &str) -> String {
    const LIMIT: usize = 512;
    if reason.len() <= LIMIT {
        return reason.to_string();
    }
    let mut cut = LIMIT;
    while !reason.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}…", &reason[..cut])
}
