//! Out-of-core batched FFT pipeline.
//!
//! `blockfft` processes sample files that are far too large to transform in
//! one piece. The input is split into fixed-size blocks, each block is decoded
//! into a contiguous buffer of equal-length segments and transformed with a
//! batched radix-2 FFT, and every block's output is written to its own
//! offset-named part file. Because part names sort in file order, the parts
//! concatenate back into a single result with a plain merge pass. Blocks are
//! independent, so they can be fanned out across local worker threads
//! ([`engine::run_local`]) or across machines over a small TCP protocol
//! ([`net::coordinator_serve`] / [`net::worker_run`]).
//!
//! ```
//! use blockfft::block::{BlockManifest, SampleFormat};
//!
//! // Pure arithmetic: a 1 TiB file in 512 MiB blocks is 2048 work units.
//! let manifest = BlockManifest::plan(1 << 40, 1 << 29, 1024, SampleFormat::RealF32).unwrap();
//! assert_eq!(manifest.blocks.len(), 2048);
//! ```
//!
//! The [`perf`] module carries the analytic side: Amdahl's speedup bound, the
//! estimation of the parallelizable fraction from measured phase timings, and
//! a calibrated `n log n` runtime prediction for a cluster.

pub mod block;
pub mod checksum;
pub mod engine;
pub mod fft;
pub mod net;
pub mod perf;
pub mod signal;

pub use fft::ComplexSample;
