//! On-disk sample formats, the block split plan, and part-file handling.
//!
//! An input file is raw headerless samples, little-endian, either real f32 or
//! interleaved complex f32. [`BlockManifest::plan`] partitions it into
//! fixed-size blocks; each block decodes into whole records of `fft_size`
//! samples (the batch one FFT execution processes), with the final record
//! zero-padded when the file does not divide evenly. Each processed block
//! becomes one part file named by its byte offset, so lexicographic part
//! order equals file order and [`merge_parts`] is a plain concatenation.

mod format;
mod io;
mod manifest;

use std::path::PathBuf;

use thiserror::Error;

pub use format::{encode_sample, SampleFormat, OUTPUT_BYTES_PER_SAMPLE};
pub use io::{
    merge_parts, part_done_name, part_file_name, part_tmp_name, read_block, write_part,
    MergeOptions, MergeSummary, OutputPart,
};
pub use manifest::{BlockDescriptor, BlockManifest, MANIFEST_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("input file is empty")]
    EmptyInput,
    #[error("block size {block_size} is not a positive multiple of the {record_bytes}-byte record size")]
    MisalignedBlockSize { block_size: u64, record_bytes: u64 },
    #[error("block {block_index}: expected {expected} bytes at offset {offset}, file provided {actual}")]
    Integrity {
        block_index: u64,
        offset: u64,
        expected: u64,
        actual: u64,
    },
    #[error("block {block_index}: checksum mismatch (manifest {expected:#018x}, file {actual:#018x})")]
    ChecksumMismatch {
        block_index: u64,
        expected: u64,
        actual: u64,
    },
    #[error("payload shape mismatch: expected {expected} samples, got {actual}")]
    PayloadShape { expected: usize, actual: usize },
    #[error("part {part} already exists with {existing} bytes, refusing to replace with {expected}")]
    PartConflict {
        part: String,
        existing: u64,
        expected: u64,
    },
    #[error("part {part} has {actual} bytes, manifest expects {expected}")]
    PartSize {
        part: String,
        expected: u64,
        actual: u64,
    },
    #[error("missing parts for blocks {0:?}")]
    MissingParts(Vec<u64>),
    #[error("unexpected files in parts directory (pass --force to ignore): {0:?}")]
    UnknownFiles(Vec<String>),
    #[error("manifest format version {found} is not supported (expected {expected})")]
    ManifestVersion { found: u32, expected: u32 },
    #[error("manifest block list is inconsistent: {0}")]
    ManifestInvalid(String),
    #[error("failed to parse manifest: {0}")]
    ManifestParse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BlockError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BlockError::Io {
            path: path.into(),
            source,
        }
    }
}
