//! Sample encodings. Everything on disk and on the wire is little-endian.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fft::ComplexSample;

/// How raw input bytes map to samples.
///
/// Output records are always the full complex spectrum regardless of input
/// mode, so real input produces output twice its size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFormat {
    /// One f32 per sample; promoted to a complex sample with zero imaginary part.
    RealF32,
    /// Interleaved f32 pairs (re, im).
    ComplexF32,
}

/// Bytes per sample in the output encoding (always complex f32).
pub const OUTPUT_BYTES_PER_SAMPLE: u64 = 8;

impl SampleFormat {
    pub fn input_bytes_per_sample(self) -> u64 {
        match self {
            SampleFormat::RealF32 => 4,
            SampleFormat::ComplexF32 => 8,
        }
    }

    /// Input bytes occupied by one record of `fft_size` samples.
    pub fn record_input_bytes(self, fft_size: usize) -> u64 {
        fft_size as u64 * self.input_bytes_per_sample()
    }

    /// Output bytes produced by one record: the full complex spectrum.
    pub fn record_output_bytes(fft_size: usize) -> u64 {
        fft_size as u64 * OUTPUT_BYTES_PER_SAMPLE
    }

    /// Decodes `bytes` and appends the samples to `out`. A trailing partial
    /// sample (possible only at the very end of a file) is completed with
    /// zero bytes rather than dropped.
    pub fn decode_into(self, bytes: &[u8], out: &mut Vec<ComplexSample>) {
        let width = self.input_bytes_per_sample() as usize;
        let mut chunks = bytes.chunks_exact(width);
        match self {
            SampleFormat::RealF32 => {
                for c in &mut chunks {
                    let re = f32::from_le_bytes(c.try_into().unwrap());
                    out.push(ComplexSample::new(re, 0.0));
                }
            }
            SampleFormat::ComplexF32 => {
                for c in &mut chunks {
                    let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                    let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                    out.push(ComplexSample::new(re, im));
                }
            }
        }
        let rem = chunks.remainder();
        if !rem.is_empty() {
            let mut padded = [0u8; 8];
            padded[..rem.len()].copy_from_slice(rem);
            let re = f32::from_le_bytes(padded[0..4].try_into().unwrap());
            let im = match self {
                SampleFormat::RealF32 => 0.0,
                SampleFormat::ComplexF32 => f32::from_le_bytes(padded[4..8].try_into().unwrap()),
            };
            out.push(ComplexSample::new(re, im));
        }
    }

    /// Samples encoded by `byte_len` input bytes, counting a partial one.
    pub fn samples_in_bytes(self, byte_len: u64) -> u64 {
        byte_len.div_ceil(self.input_bytes_per_sample())
    }
}

/// Encodes samples in the output format: little-endian interleaved (re, im).
pub fn encode_sample(sample: ComplexSample) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[0..4].copy_from_slice(&sample.re.to_le_bytes());
    out[4..8].copy_from_slice(&sample.im.to_le_bytes());
    out
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleFormat::RealF32 => write!(f, "real-f32"),
            SampleFormat::ComplexF32 => write!(f, "complex-f32"),
        }
    }
}

impl FromStr for SampleFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real-f32" => Ok(SampleFormat::RealF32),
            "complex-f32" => Ok(SampleFormat::ComplexF32),
            other => Err(format!(
                "unknown sample format {other:?} (expected real-f32 or complex-f32)"
            )),
        }
    }
}
