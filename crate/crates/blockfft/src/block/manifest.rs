//! The split plan: where every block and record lives in the input file.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::SampleFormat;
use super::BlockError;
use crate::checksum::CRC64;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// One block of the input: a contiguous byte range holding whole records
/// (the last record possibly zero-padded).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDescriptor {
    pub block_index: u64,
    pub byte_offset: u64,
    pub byte_length: u64,
    pub record_count: u64,
    /// Zero samples appended to the final record when the block's bytes do
    /// not fill it. Non-zero only in the last block of a file.
    pub pad_samples: u32,
}

impl BlockDescriptor {
    /// Samples a decoded block buffer holds: `record_count * fft_size`.
    pub fn decoded_samples(&self, fft_size: usize) -> u64 {
        self.record_count * fft_size as u64
    }

    /// Bytes the block's output part occupies.
    pub fn output_bytes(&self, fft_size: usize) -> u64 {
        self.record_count * SampleFormat::record_output_bytes(fft_size)
    }
}

/// The full split plan for one input file, serialized as versioned JSON.
///
/// `input_path` and the checksums are filled in by [`BlockManifest::for_file`];
/// a manifest produced by [`BlockManifest::plan`] is pure arithmetic and
/// carries neither.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockManifest {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_path: Option<PathBuf>,
    pub input_file_size: u64,
    pub block_size: u64,
    pub fft_size: usize,
    pub sample_format: SampleFormat,
    pub blocks: Vec<BlockDescriptor>,
    /// CRC-64/XZ of the whole input file, if computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_checksum: Option<u64>,
    /// Per-block CRC-64/XZ, parallel to `blocks`; empty if not computed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block_checksums: Vec<u64>,
}

impl BlockManifest {
    /// Computes the split plan from sizes alone. Every input byte lands in
    /// exactly one block; block count is `ceil(file_size / block_size)`.
    pub fn plan(
        file_size: u64,
        block_size: u64,
        fft_size: usize,
        sample_format: SampleFormat,
    ) -> Result<Self, BlockError> {
        if file_size == 0 {
            return Err(BlockError::EmptyInput);
        }
        let record_bytes = sample_format.record_input_bytes(fft_size);
        if block_size == 0 || record_bytes == 0 || !block_size.is_multiple_of(record_bytes) {
            return Err(BlockError::MisalignedBlockSize {
                block_size,
                record_bytes,
            });
        }

        let block_count = file_size.div_ceil(block_size);
        let mut blocks = Vec::with_capacity(block_count as usize);
        for index in 0..block_count {
            let byte_offset = index * block_size;
            let byte_length = block_size.min(file_size - byte_offset);
            let record_count = byte_length.div_ceil(record_bytes);
            let samples = sample_format.samples_in_bytes(byte_length);
            let pad_samples = (record_count * fft_size as u64 - samples) as u32;
            blocks.push(BlockDescriptor {
                block_index: index,
                byte_offset,
                byte_length,
                record_count,
                pad_samples,
            });
        }

        Ok(BlockManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            input_path: None,
            input_file_size: file_size,
            block_size,
            fft_size,
            sample_format,
            blocks,
            input_checksum: None,
            block_checksums: Vec::new(),
        })
    }

    /// Plans the split for a real file and records its whole-file and
    /// per-block checksums, so later reads can detect input mutation.
    pub fn for_file(
        path: &Path,
        block_size: u64,
        fft_size: usize,
        sample_format: SampleFormat,
    ) -> Result<Self, BlockError> {
        let file = File::open(path).map_err(|e| BlockError::io(path, e))?;
        let file_size = file
            .metadata()
            .map_err(|e| BlockError::io(path, e))?
            .len();
        let mut manifest = Self::plan(file_size, block_size, fft_size, sample_format)?;

        let mut reader = BufReader::with_capacity(1 << 20, file);
        let mut whole = CRC64.digest();
        let mut per_block = Vec::with_capacity(manifest.blocks.len());
        let mut buf = vec![0u8; 1 << 20];
        for block in &manifest.blocks {
            let mut digest = CRC64.digest();
            let mut remaining = block.byte_length;
            while remaining > 0 {
                let want = buf.len().min(remaining as usize);
                reader
                    .read_exact(&mut buf[..want])
                    .map_err(|e| BlockError::io(path, e))?;
                digest.update(&buf[..want]);
                whole.update(&buf[..want]);
                remaining -= want as u64;
            }
            per_block.push(digest.finalize());
        }

        manifest.input_path = Some(path.to_path_buf());
        manifest.input_checksum = Some(whole.finalize());
        manifest.block_checksums = per_block;
        Ok(manifest)
    }

    /// Checksum recorded for a block, if the manifest carries checksums.
    pub fn block_checksum(&self, block_index: u64) -> Option<u64> {
        self.block_checksums.get(block_index as usize).copied()
    }

    pub fn total_records(&self) -> u64 {
        self.blocks.iter().map(|b| b.record_count).sum()
    }

    /// Records in a full-size block: the batch count of the common plan.
    pub fn records_per_full_block(&self) -> u64 {
        self.block_size / self.sample_format.record_input_bytes(self.fft_size)
    }

    /// Size of the merged output file.
    pub fn output_bytes(&self) -> u64 {
        self.total_records() * SampleFormat::record_output_bytes(self.fft_size)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, BlockError> {
        let manifest: BlockManifest = serde_json::from_str(json)?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(BlockError::ManifestVersion {
                found: manifest.format_version,
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), BlockError> {
        let mut file = File::create(path).map_err(|e| BlockError::io(path, e))?;
        file.write_all(self.to_json().as_bytes())
            .map_err(|e| BlockError::io(path, e))?;
        file.write_all(b"\n").map_err(|e| BlockError::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BlockError> {
        let json = std::fs::read_to_string(path).map_err(|e| BlockError::io(path, e))?;
        Self::from_json(&json)
    }

    /// Structural checks on a deserialized manifest: blocks must tile the
    /// file contiguously with ascending indices.
    fn validate(&self) -> Result<(), BlockError> {
        if self.blocks.is_empty() {
            return Err(BlockError::ManifestInvalid("no blocks".into()));
        }
        if !self.block_checksums.is_empty() && self.block_checksums.len() != self.blocks.len() {
            return Err(BlockError::ManifestInvalid(format!(
                "{} checksums for {} blocks",
                self.block_checksums.len(),
                self.blocks.len()
            )));
        }
        let mut expected_offset = 0u64;
        for (i, block) in self.blocks.iter().enumerate() {
            if block.block_index != i as u64 {
                return Err(BlockError::ManifestInvalid(format!(
                    "block {} carries index {}",
                    i, block.block_index
                )));
            }
            if block.byte_offset != expected_offset {
                return Err(BlockError::ManifestInvalid(format!(
                    "block {} starts at {} (expected {})",
                    i, block.byte_offset, expected_offset
                )));
            }
            if block.byte_length == 0 || block.byte_length > self.block_size {
                return Err(BlockError::ManifestInvalid(format!(
                    "block {} has length {}",
                    i, block.byte_length
                )));
            }
            expected_offset += block.byte_length;
        }
        if expected_offset != self.input_file_size {
            return Err(BlockError::ManifestInvalid(format!(
                "blocks cover {} bytes of a {}-byte file",
                expected_offset, self.input_file_size
            )));
        }
        Ok(())
    }
}
