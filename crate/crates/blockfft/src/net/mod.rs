//! Distribution over TCP: a coordinator hands blocks to remote workers.
//!
//! This is the control plane only. Workers read input blocks from their own
//! copy (or a shared filesystem path) of the input file and write parts to
//! their own output directory; only assignments and completion reports cross
//! the network, framed as in [`message`]. Input CRCs ride along with each
//! assignment so a worker with a stale or wrong input file fails loudly
//! instead of producing garbage.
//!
//! There is no authentication or encryption — loopback and trusted-LAN use
//! only. TCP connection liveness is the failure detector: when a worker's
//! connection drops, its in-flight blocks simply return to the queue.

mod coordinator;
mod message;
mod worker;

use std::time::Duration;

use thiserror::Error;

pub use coordinator::{coordinator_serve, Coordinator, CoordinatorConfig};
pub use message::{
    decode_message, encode_message, read_message, write_message, Assignment, Message,
    ProtocolError, DEFAULT_PORT, MAX_FRAME_LEN, MAX_WORKER_ID_LEN,
};
pub use worker::{worker_run, WorkerConfig, WorkerSummary};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("failed to bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to connect to {addr}: {source}")]
    Connect {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("unexpected message from peer: {0}")]
    UnexpectedMessage(&'static str),
    #[error("no workers for {waited:?}; unfinished blocks: {pending:?}")]
    TimedOut { waited: Duration, pending: Vec<u64> },
    #[error("connection to coordinator lost")]
    ConnectionLost,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}
