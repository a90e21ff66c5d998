//! Block assignment over worker connections.
//!
//! One reader thread per connection, one accept thread, and a dispatch loop
//! that pushes assignments whenever a worker has spare capacity. All state
//! transitions go through one mutex; threads nudge the dispatcher through a
//! condvar. Each worker may hold as many in-flight blocks as the core count
//! it announced in its Hello.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::net::{Shutdown as SocketShutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::message::{read_message, write_message, Assignment, Message, ProtocolError};
use super::NetError;
use crate::block::BlockManifest;
use crate::engine::{
    parts_checksum, BlockStatus, BlockTiming, JobResult, Kernel, TimingBreakdown,
};

#[derive(Clone, Debug)]
pub struct CoordinatorConfig {
    pub kernel: Kernel,
    pub scale_inverse: bool,
    /// Fail the job when no registered worker is connected for this long
    /// while blocks remain unfinished.
    pub worker_timeout: Duration,
}

impl CoordinatorConfig {
    pub fn new(kernel: Kernel) -> Self {
        CoordinatorConfig {
            kernel,
            scale_inverse: true,
            worker_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Clone, Copy)]
struct DoneRecord {
    output_crc: u64,
    read_ns: u64,
    compute_ns: u64,
    write_ns: u64,
}

struct ConnEntry {
    writer: TcpStream,
    cores: u16,
    registered: bool,
    assigned: HashSet<u64>,
}

struct State {
    pending: VecDeque<u64>,
    conns: HashMap<u64, ConnEntry>,
    done: HashMap<u64, DoneRecord>,
    failed: BTreeMap<u64, String>,
    next_conn_id: u64,
    /// Registered (post-Hello) connections currently alive.
    registered_live: u32,
    live_cores: u32,
    peak_cores: u32,
    /// Start of the current no-worker window; meaningful while
    /// `registered_live == 0`.
    no_worker_since: Instant,
}

struct Shared {
    state: Mutex<State>,
    cv: Condvar,
    stop: AtomicBool,
}

pub struct Coordinator {
    listener: TcpListener,
    local_addr: SocketAddr,
}

impl Coordinator {
    pub fn bind(addr: &str) -> Result<Self, NetError> {
        let listener = TcpListener::bind(addr).map_err(|source| NetError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        let local_addr = listener.local_addr().map_err(|source| NetError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Coordinator {
            listener,
            local_addr,
        })
    }

    /// The bound address; useful when binding port 0.
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Runs one job to completion: every block assigned to exactly one
    /// worker at a time, in-flight blocks of a dropped connection returned
    /// to the queue, finished when every block reported done or failed.
    ///
    /// Like the local engine, per-block failures reported by workers do not
    /// abort the job; they surface in the returned [`JobResult`]. The only
    /// fatal outcomes are bind/socket setup problems and running out of
    /// workers for longer than `worker_timeout`.
    pub fn serve(
        &self,
        manifest: &BlockManifest,
        config: &CoordinatorConfig,
    ) -> Result<JobResult, NetError> {
        let fft_size: u32 = manifest
            .fft_size
            .try_into()
            .map_err(|_| NetError::InvalidConfig(format!("fft_size {} exceeds u32", manifest.fft_size)))?;
        self.listener
            .set_nonblocking(true)
            .map_err(|source| NetError::Io {
                context: "listener".into(),
                source,
            })?;

        let total = manifest.blocks.len() as u64;
        let shared = Shared {
            state: Mutex::new(State {
                pending: (0..total).collect(),
                conns: HashMap::new(),
                done: HashMap::new(),
                failed: BTreeMap::new(),
                next_conn_id: 0,
                registered_live: 0,
                live_cores: 0,
                peak_cores: 0,
                no_worker_since: Instant::now(),
            }),
            cv: Condvar::new(),
            stop: AtomicBool::new(false),
        };

        let start = Instant::now();
        let outcome = std::thread::scope(|scope| {
            let shared = &shared;
            scope.spawn(move || accept_loop(&self.listener, shared, scope));
            dispatch_loop(shared, manifest, config, fft_size, total)
        });
        let wall_clock_ns = start.elapsed().as_nanos() as u64;

        let (done, failed, peak_cores) = outcome?;

        let mut statuses = Vec::with_capacity(manifest.blocks.len());
        let mut timings = Vec::with_capacity(done.len());
        let mut parts = Vec::with_capacity(done.len());
        for block in &manifest.blocks {
            let index = block.block_index;
            if let Some(rec) = done.get(&index) {
                statuses.push(BlockStatus::Done);
                timings.push(BlockTiming {
                    block_index: index,
                    read_ns: rec.read_ns,
                    compute_ns: rec.compute_ns,
                    write_ns: rec.write_ns,
                });
                parts.push((block.byte_offset, rec.output_crc));
            } else {
                let reason = failed
                    .get(&index)
                    .cloned()
                    .unwrap_or_else(|| "not processed".into());
                statuses.push(BlockStatus::Failed { reason });
            }
        }
        parts.sort_unstable();

        Ok(JobResult {
            manifest: manifest.clone(),
            kernel: config.kernel,
            worker_count: peak_cores.max(1) as usize,
            timings: TimingBreakdown::from_blocks(timings, wall_clock_ns),
            block_statuses: statuses,
            output_checksum: parts_checksum(&parts),
        })
    }
}

/// Binds `listen_addr` and serves one job.
pub fn coordinator_serve(
    listen_addr: &str,
    manifest: &BlockManifest,
    config: &CoordinatorConfig,
) -> Result<JobResult, NetError> {
    Coordinator::bind(listen_addr)?.serve(manifest, config)
}

fn accept_loop<'scope>(
    listener: &'scope TcpListener,
    shared: &'scope Shared,
    scope: &'scope std::thread::Scope<'scope, '_>,
) {
    loop {
        if shared.stop.load(Ordering::Acquire) {
            return;
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nodelay(true);
                let Ok(writer) = stream.try_clone() else {
                    continue;
                };
                // Registration and the teardown's stop flag are serialized by
                // the state lock: a connection added here is either seen by
                // the teardown sweep or rejected now. Without the re-check, a
                // late joiner could slip in after the sweep and block forever.
                let mut st = shared.state.lock().unwrap();
                if shared.stop.load(Ordering::Acquire) {
                    drop(st);
                    let _ = stream.shutdown(SocketShutdown::Both);
                    continue;
                }
                let conn_id = st.next_conn_id;
                st.next_conn_id += 1;
                st.conns.insert(
                    conn_id,
                    ConnEntry {
                        writer,
                        cores: 0,
                        registered: false,
                        assigned: HashSet::new(),
                    },
                );
                drop(st);
                scope.spawn(move || conn_loop(conn_id, stream, shared));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

/// Reads one connection until it closes or misbehaves; any protocol
/// violation closes the connection (never the whole job). On exit the
/// connection's in-flight blocks go back to the queue.
fn conn_loop(conn_id: u64, mut stream: TcpStream, shared: &Shared) {
    let mut registered = false;
    let violation: Option<String> = loop {
        match read_message(&mut stream) {
            Ok(Message::Hello { worker_id, cores }) => {
                if registered {
                    break Some("duplicate Hello".into());
                }
                if cores == 0 {
                    break Some(format!("worker {worker_id:?} announced zero cores"));
                }
                let mut st = shared.state.lock().unwrap();
                let entry = st.conns.get_mut(&conn_id).expect("conn registered");
                entry.cores = cores;
                entry.registered = true;
                st.registered_live += 1;
                st.live_cores += cores as u32;
                st.peak_cores = st.peak_cores.max(st.live_cores);
                registered = true;
                shared.cv.notify_all();
            }
            Ok(Message::BlockDone {
                block_index,
                output_crc,
                read_ns,
                compute_ns,
                write_ns,
            }) => {
                let mut st = shared.state.lock().unwrap();
                let entry = st.conns.get_mut(&conn_id).expect("conn registered");
                if !entry.assigned.remove(&block_index) {
                    break Some(format!("BlockDone for block {block_index} it does not hold"));
                }
                if st.done.contains_key(&block_index) {
                    break Some(format!("duplicate BlockDone for block {block_index}"));
                }
                st.done.insert(
                    block_index,
                    DoneRecord {
                        output_crc,
                        read_ns,
                        compute_ns,
                        write_ns,
                    },
                );
                shared.cv.notify_all();
            }
            Ok(Message::BlockFailed {
                block_index,
                reason,
            }) => {
                let mut st = shared.state.lock().unwrap();
                let entry = st.conns.get_mut(&conn_id).expect("conn registered");
                if !entry.assigned.remove(&block_index) {
                    break Some(format!("BlockFailed for block {block_index} it does not hold"));
                }
                st.failed.insert(block_index, reason);
                shared.cv.notify_all();
            }
            Ok(Message::Assign(_)) | Ok(Message::Shutdown) => {
                break Some("coordinator-bound stream carried a coordinator message".into());
            }
            Err(ProtocolError::Closed) => break None,
            Err(e) => break Some(format!("protocol error: {e}")),
        }
    };

    if let Some(reason) = violation {
        eprintln!("coordinator: closing worker connection {conn_id}: {reason}");
    }
    let _ = stream.shutdown(SocketShutdown::Both);

    let mut st = shared.state.lock().unwrap();
    if let Some(entry) = st.conns.remove(&conn_id) {
        for block in entry.assigned {
            st.pending.push_back(block);
        }
        if entry.registered {
            st.registered_live -= 1;
            st.live_cores -= entry.cores as u32;
            if st.registered_live == 0 {
                st.no_worker_since = Instant::now();
            }
        }
    }
    shared.cv.notify_all();
}

type DispatchOutcome = (HashMap<u64, DoneRecord>, BTreeMap<u64, String>, u32);

fn dispatch_loop(
    shared: &Shared,
    manifest: &BlockManifest,
    config: &CoordinatorConfig,
    fft_size: u32,
    total: u64,
) -> Result<DispatchOutcome, NetError> {
    let mut st = shared.state.lock().unwrap();
    loop {
        if (st.done.len() + st.failed.len()) as u64 == total {
            break;
        }

        if st.registered_live == 0 {
            let waited = st.no_worker_since.elapsed();
            if waited >= config.worker_timeout {
                let mut pending: Vec<u64> = st.pending.iter().copied().collect();
                pending.sort_unstable();
                shared.stop.store(true, Ordering::Release);
                for entry in st.conns.values() {
                    let _ = entry.writer.shutdown(SocketShutdown::Both);
                }
                return Err(NetError::TimedOut { waited, pending });
            }
        }

        // Fill every worker up to its announced core count.
        let mut batch: Vec<(TcpStream, Assignment)> = Vec::new();
        if !st.pending.is_empty() {
            let state = &mut *st;
            let conn_ids: Vec<u64> = state
                .conns
                .iter()
                .filter(|(_, e)| e.registered)
                .map(|(id, _)| *id)
                .collect();
            'conns: for id in conn_ids {
                loop {
                    let entry = state.conns.get_mut(&id).expect("conn present");
                    if entry.assigned.len() >= entry.cores as usize {
                        break;
                    }
                    let Some(block) = state.pending.pop_front() else {
                        break 'conns;
                    };
                    let Ok(writer) = entry.writer.try_clone() else {
                        // Dying socket: its reader will requeue; put the
                        // block back for someone else.
                        state.pending.push_front(block);
                        break;
                    };
                    entry.assigned.insert(block);
                    let descriptor = manifest.blocks[block as usize].clone();
                    batch.push((
                        writer,
                        Assignment {
                            descriptor,
                            fft_size,
                            sample_format: manifest.sample_format,
                            kernel: config.kernel,
                            scale_inverse: config.scale_inverse,
                            input_crc: manifest.block_checksum(block),
                        },
                    ));
                }
            }
        }

        if !batch.is_empty() {
            drop(st);
            for (mut writer, assignment) in batch {
                // A failed write means a dead socket; its reader thread
                // observes the close and requeues the block.
                let _ = write_message(&mut writer, &Message::Assign(assignment));
            }
            st = shared.state.lock().unwrap();
            continue;
        }

        st = shared
            .cv
            .wait_timeout(st, Duration::from_millis(100))
            .unwrap()
            .0;
    }

    // All blocks accounted for: stop accepting, tell workers to go home.
    shared.stop.store(true, Ordering::Release);
    let done = std::mem::take(&mut st.done);
    let failed = std::mem::take(&mut st.failed);
    let peak_cores = st.peak_cores;
    let writers: Vec<TcpStream> = st
        .conns
        .values()
        .filter_map(|e| e.writer.try_clone().ok())
        .collect();
    drop(st);
    for mut writer in writers {
        let _ = write_message(&mut writer, &Message::Shutdown);
        let _ = writer.shutdown(SocketShutdown::Both);
    }
    Ok((done, failed, peak_cores))
}
