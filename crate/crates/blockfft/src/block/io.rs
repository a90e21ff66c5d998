//! Block reads, atomic part writes, and the merge pass.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::format::{encode_sample, SampleFormat};
use super::manifest::{BlockDescriptor, BlockManifest};
use super::BlockError;
use crate::checksum::CRC64;
use crate::fft::ComplexSample;

/// Scratch size for streaming reads/writes. A multiple of every sample width,
/// so only the final chunk of a block can end in a partial sample.
const CHUNK: usize = 256 * 1024;

/// `part-<20-digit zero-padded byte offset>`: lexicographic name order equals
/// numeric offset order for all offsets below 10^20 (beyond 2^63).
pub fn part_file_name(byte_offset: u64) -> String {
    format!("part-{byte_offset:020}")
}

/// Name a part carries while it is being written.
pub fn part_tmp_name(byte_offset: u64) -> String {
    format!("part-{byte_offset:020}.tmp")
}

/// Completion marker created after the part is renamed into place.
pub fn part_done_name(byte_offset: u64) -> String {
    format!("part-{byte_offset:020}.done")
}

/// One written part: a block's transformed payload on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPart {
    pub part_name: String,
    pub byte_offset: u64,
    pub byte_count: u64,
    /// CRC-64/XZ of the encoded payload as written.
    pub crc64: u64,
}

/// Reads one block into a contiguous buffer of `record_count * fft_size`
/// samples, zero-padding the final record.
///
/// When `expected_crc` is given (from the manifest), the block's bytes are
/// checksummed while streaming and a mismatch fails the read — the file
/// changed since the split was planned.
pub fn read_block(
    file: &mut File,
    input_path: &Path,
    desc: &BlockDescriptor,
    format: SampleFormat,
    fft_size: usize,
    expected_crc: Option<u64>,
) -> Result<Vec<ComplexSample>, BlockError> {
    file.seek(SeekFrom::Start(desc.byte_offset))
        .map_err(|e| BlockError::io(input_path, e))?;

    let total_samples = desc.decoded_samples(fft_size) as usize;
    let mut samples = Vec::with_capacity(total_samples);
    let mut digest = CRC64.digest();
    let mut scratch = vec![0u8; CHUNK.min(desc.byte_length as usize).max(1)];
    let mut remaining = desc.byte_length;
    while remaining > 0 {
        let want = scratch.len().min(remaining as usize);
        if let Err(e) = file.read_exact(&mut scratch[..want]) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                let available = file
                    .metadata()
                    .map(|m| m.len().saturating_sub(desc.byte_offset))
                    .unwrap_or(0);
                return Err(BlockError::Integrity {
                    block_index: desc.block_index,
                    offset: desc.byte_offset,
                    expected: desc.byte_length,
                    actual: available.min(desc.byte_length),
                });
            }
            return Err(BlockError::io(input_path, e));
        }
        digest.update(&scratch[..want]);
        format.decode_into(&scratch[..want], &mut samples);
        remaining -= want as u64;
    }

    if let Some(expected) = expected_crc {
        let actual = digest.finalize();
        if actual != expected {
            return Err(BlockError::ChecksumMismatch {
                block_index: desc.block_index,
                expected,
                actual,
            });
        }
    }

    debug_assert!(samples.len() <= total_samples);
    samples.resize(total_samples, ComplexSample::new(0.0, 0.0));
    Ok(samples)
}

/// Writes a block's transformed payload as an offset-named part file.
///
/// The part is written under a `.tmp` name and renamed into place, then a
/// `.done` marker is created; readers never observe a half-written part.
pub fn write_part(
    output_dir: &Path,
    desc: &BlockDescriptor,
    fft_size: usize,
    payload: &[ComplexSample],
) -> Result<OutputPart, BlockError> {
    let expected_samples = desc.decoded_samples(fft_size) as usize;
    if payload.len() != expected_samples {
        return Err(BlockError::PayloadShape {
            expected: expected_samples,
            actual: payload.len(),
        });
    }

    let part_name = part_file_name(desc.byte_offset);
    let final_path = output_dir.join(&part_name);
    let byte_count = expected_samples as u64 * 8;
    if let Ok(meta) = fs::metadata(&final_path) {
        if meta.len() != byte_count {
            return Err(BlockError::PartConflict {
                part: part_name,
                existing: meta.len(),
                expected: byte_count,
            });
        }
    }

    let tmp_path = output_dir.join(part_tmp_name(desc.byte_offset));
    let mut digest = CRC64.digest();
    {
        let file = File::create(&tmp_path).map_err(|e| BlockError::io(&tmp_path, e))?;
        let mut writer = BufWriter::with_capacity(CHUNK, file);
        let mut encoded = Vec::with_capacity(CHUNK);
        for batch in payload.chunks(CHUNK / 8) {
            encoded.clear();
            for sample in batch {
                encoded.extend_from_slice(&encode_sample(*sample));
            }
            digest.update(&encoded);
            writer
                .write_all(&encoded)
                .map_err(|e| BlockError::io(&tmp_path, e))?;
        }
        writer.flush().map_err(|e| BlockError::io(&tmp_path, e))?;
    }
    fs::rename(&tmp_path, &final_path).map_err(|e| BlockError::io(&final_path, e))?;

    let done_path = output_dir.join(part_done_name(desc.byte_offset));
    File::create(&done_path).map_err(|e| BlockError::io(&done_path, e))?;

    Ok(OutputPart {
        part_name,
        byte_offset: desc.byte_offset,
        byte_count,
        crc64: digest.finalize(),
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MergeOptions {
    /// Ignore files in the parts directory that the manifest does not expect.
    pub force: bool,
    /// Remove parts and markers after the merged file is fully written.
    pub delete_parts: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeSummary {
    pub parts_merged: usize,
    pub bytes_written: u64,
    /// CRC-64/XZ of the merged output.
    pub output_crc64: u64,
}

/// Concatenates one part per manifest block, in ascending offset order, into
/// a single output file.
///
/// Every expected part must exist with its `.done` marker and the exact size
/// the manifest implies. Unexpected files in the directory are rejected
/// unless `force` is set. The output is written to a `.tmp` sibling and
/// renamed; source parts are deleted only after that rename succeeds.
pub fn merge_parts(
    parts_dir: &Path,
    manifest: &BlockManifest,
    dest: &Path,
    options: MergeOptions,
) -> Result<MergeSummary, BlockError> {
    let fft_size = manifest.fft_size;
    let expected: Vec<(u64, String, String, u64)> = manifest
        .blocks
        .iter()
        .map(|b| {
            (
                b.block_index,
                part_file_name(b.byte_offset),
                part_done_name(b.byte_offset),
                b.output_bytes(fft_size),
            )
        })
        .collect();

    let known: HashSet<&str> = expected
        .iter()
        .flat_map(|(_, part, done, _)| [part.as_str(), done.as_str()])
        .collect();
    let mut unknown = Vec::new();
    for entry in fs::read_dir(parts_dir).map_err(|e| BlockError::io(parts_dir, e))? {
        let entry = entry.map_err(|e| BlockError::io(parts_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !known.contains(name.as_str()) {
            unknown.push(name);
        }
    }
    if !unknown.is_empty() && !options.force {
        unknown.sort();
        return Err(BlockError::UnknownFiles(unknown));
    }

    let mut missing = Vec::new();
    for (index, part, done, _) in &expected {
        if !parts_dir.join(part).is_file() || !parts_dir.join(done).is_file() {
            missing.push(*index);
        }
    }
    if !missing.is_empty() {
        return Err(BlockError::MissingParts(missing));
    }

    for (_, part, _, bytes) in &expected {
        let path = parts_dir.join(part);
        let meta = fs::metadata(&path).map_err(|e| BlockError::io(&path, e))?;
        if meta.len() != *bytes {
            return Err(BlockError::PartSize {
                part: part.clone(),
                expected: *bytes,
                actual: meta.len(),
            });
        }
    }

    let mut tmp_name = dest.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let dest_tmp = dest.with_file_name(tmp_name);
    let mut digest = CRC64.digest();
    let mut bytes_written = 0u64;
    {
        let file = File::create(&dest_tmp).map_err(|e| BlockError::io(&dest_tmp, e))?;
        let mut writer = BufWriter::with_capacity(CHUNK, file);
        let mut buf = vec![0u8; CHUNK];
        for (_, part, _, _) in &expected {
            let path = parts_dir.join(part);
            let mut reader = File::open(&path).map_err(|e| BlockError::io(&path, e))?;
            loop {
                let n = reader.read(&mut buf).map_err(|e| BlockError::io(&path, e))?;
                if n == 0 {
                    break;
                }
                digest.update(&buf[..n]);
                writer
                    .write_all(&buf[..n])
                    .map_err(|e| BlockError::io(&dest_tmp, e))?;
                bytes_written += n as u64;
            }
        }
        writer.flush().map_err(|e| BlockError::io(&dest_tmp, e))?;
    }
    fs::rename(&dest_tmp, dest).map_err(|e| BlockError::io(dest, e))?;

    if options.delete_parts {
        for (_, part, done, _) in &expected {
            fs::remove_file(parts_dir.join(part)).map_err(|e| BlockError::io(parts_dir, e))?;
            fs::remove_file(parts_dir.join(done)).map_err(|e| BlockError::io(parts_dir, e))?;
        }
    }

    Ok(MergeSummary {
        parts_merged: expected.len(),
        bytes_written,
        output_crc64: digest.finalize(),
    })
}
