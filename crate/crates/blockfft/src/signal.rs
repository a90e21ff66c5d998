//! Deterministic test-signal generation.
//!
//! Signals repeat per record so every record of a generated file has the
//! same known spectrum: an impulse transforms to a flat spectrum, a constant
//! to a delta at bin 0, and `sine:k` — `cos(2πk·j/fft_size)` — concentrates
//! its energy in bins `k` and `fft_size − k` with magnitude `fft_size / 2`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::SampleFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signal {
    /// 1 at the first sample of each record, 0 elsewhere.
    Impulse,
    /// 1 everywhere.
    Constant,
    /// `cos(2πk·j/fft_size)` per record position `j`.
    Sine { bin: u32 },
    /// Uniform samples in `[-1, 1]`, reproducible from the seed.
    Random { seed: u64 },
}

impl FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "impulse" => return Ok(Signal::Impulse),
            "constant" => return Ok(Signal::Constant),
            _ => {}
        }
        if let Some(bin) = s.strip_prefix("sine:") {
            return bin
                .parse()
                .map(|bin| Signal::Sine { bin })
                .map_err(|_| format!("bad sine bin {bin:?}"));
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(|seed| Signal::Random { seed })
                .map_err(|_| format!("bad random seed {seed:?}"));
        }
        Err(format!(
            "unknown signal {s:?} (expected impulse, constant, sine:<bin> or random:<seed>)"
        ))
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Impulse => write!(f, "impulse"),
            Signal::Constant => write!(f, "constant"),
            Signal::Sine { bin } => write!(f, "sine:{bin}"),
            Signal::Random { seed } => write!(f, "random:{seed}"),
        }
    }
}

/// Writes `samples` samples of `signal` in the given format. Byte-for-byte
/// deterministic for identical arguments.
pub fn generate(
    out: &mut impl Write,
    samples: u64,
    format: SampleFormat,
    signal: Signal,
    fft_size: usize,
) -> io::Result<()> {
    let mut rng = match signal {
        Signal::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut write_sample = |out: &mut dyn Write, j: u64| -> io::Result<()> {
        let position = (j % fft_size as u64) as f64;
        let (re, im): (f32, f32) = match (signal, &mut rng) {
            (Signal::Impulse, _) => (if position == 0.0 { 1.0 } else { 0.0 }, 0.0),
            (Signal::Constant, _) => (1.0, 0.0),
            (Signal::Sine { bin }, _) => {
                let phase = 2.0 * std::f64::consts::PI * bin as f64 * position / fft_size as f64;
                (phase.cos() as f32, 0.0)
            }
            (Signal::Random { .. }, Some(rng)) => match format {
                SampleFormat::RealF32 => (rng.random_range(-1.0..=1.0), 0.0),
                SampleFormat::ComplexF32 => {
                    (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
                }
            },
            (Signal::Random { .. }, None) => unreachable!(),
        };
        out.write_all(&re.to_le_bytes())?;
        if format == SampleFormat::ComplexF32 {
            out.write_all(&im.to_le_bytes())?;
        }
        Ok(())
    };

    for j in 0..samples {
        write_sample(out, j)?;
    }
    Ok(())
}

/// [`generate`] into a freshly created file.
pub fn generate_file(
    path: &Path,
    samples: u64,
    format: SampleFormat,
    signal: Signal,
    fft_size: usize,
) -> io::Result<u64> {
    let mut writer = BufWriter::new(File::create(path)?);
    generate(&mut writer, samples, format, signal, fft_size)?;
    writer.flush()?;
    Ok(samples * format.input_bytes_per_sample())
}
