//! Batched iterative radix-2 FFT.
//!
//! A [`FftPlan`] fixes the transform once — size, direction, twiddle factors,
//! bit-reversal permutation — and is then executed over a contiguous buffer
//! holding `batch_count` segments of `fft_size` samples each. Precomputing the
//! plan amortizes table construction across the many segments inside one block
//! and keeps the hot loop free of trigonometry.
//!
//! Payload samples are single precision ([`ComplexSample`]); twiddle factors
//! are stored in double precision and each butterfly is evaluated in double
//! precision before rounding back, so table error stays negligible against the
//! f32 payload. The forward transform is unnormalized; the inverse scales by
//! `1/fft_size` (disable with [`FftPlan::without_inverse_scaling`]), making
//! forward-then-inverse the identity up to rounding.

pub mod oracle;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One complex sample: interleaved single-precision real and imaginary parts.
pub type ComplexSample = Complex32;

#[derive(Debug, Error)]
pub enum FftError {
    #[error("unsupported transform size {0}: must be a power of two >= 2")]
    UnsupportedSize(usize),
    #[error("batch count must be >= 1, got {0}")]
    InvalidBatchCount(usize),
    #[error("buffer shape mismatch: expected {expected} samples ({batch_count} x {fft_size}), got {actual}")]
    ShapeMismatch {
        expected: usize,
        actual: usize,
        batch_count: usize,
        fft_size: usize,
    },
    #[error("non-finite input sample at index {0}")]
    NonFiniteInput(usize),
    #[error("non-finite output sample at index {0} (overflow during transform)")]
    NonFiniteOutput(usize),
}

/// Transform direction. Forward applies `exp(-2πi jk/n)` phases and is
/// unnormalized; inverse conjugates the phases and scales by `1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Inverse,
}

/// Immutable description of one batched transform.
///
/// Cheap to share between threads; executing a plan never mutates it.
#[derive(Clone, Debug)]
pub struct FftPlan {
    fft_size: usize,
    batch_count: usize,
    direction: Direction,
    scale_inverse: bool,
    /// `twiddles[k] = exp(-2πi k/n)` for forward, conjugated for inverse.
    twiddles: Vec<Complex64>,
    /// Bit-reversal permutation of `[0, fft_size)`; its own inverse.
    bitrev: Vec<usize>,
}

impl FftPlan {
    /// Builds a plan for `batch_count` segments of `fft_size` samples each.
    ///
    /// `fft_size` must be a power of two >= 2; `batch_count` must be >= 1.
    pub fn new(fft_size: usize, batch_count: usize, direction: Direction) -> Result<Self, FftError> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(FftError::UnsupportedSize(fft_size));
        }
        if batch_count < 1 {
            return Err(FftError::InvalidBatchCount(batch_count));
        }

        let half = fft_size / 2;
        let sign = match direction {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        };
        let step = sign * 2.0 * std::f64::consts::PI / fft_size as f64;
        let twiddles = (0..half)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();

        let bits = fft_size.trailing_zeros();
        let bitrev = (0..fft_size)
            .map(|i| reverse_bits(i, bits))
            .collect();

        Ok(FftPlan {
            fft_size,
            batch_count,
            direction,
            scale_inverse: true,
            twiddles,
            bitrev,
        })
    }

    /// Leaves the inverse transform unnormalized, matching the forward one.
    pub fn without_inverse_scaling(mut self) -> Self {
        self.scale_inverse = false;
        self
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn batch_count(&self) -> usize {
        self.batch_count
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Total samples one execution consumes: `batch_count * fft_size`.
    pub fn total_samples(&self) -> usize {
        self.batch_count * self.fft_size
    }

    pub fn twiddles(&self) -> &[Complex64] {
        &self.twiddles
    }

    pub fn bitrev_table(&self) -> &[usize] {
        &self.bitrev
    }

    /// Transforms every `fft_size`-long segment of `buffer` in place.
    ///
    /// The buffer is segment-major: segment `b` occupies
    /// `buffer[b * fft_size .. (b + 1) * fft_size]`. Segments never interact,
    /// so a batch of B segments produces bit-identical results to B separate
    /// single-segment executions.
    pub fn execute(&self, buffer: &mut [ComplexSample]) -> Result<(), FftError> {
        let expected = self.total_samples();
        if buffer.len() != expected {
            return Err(FftError::ShapeMismatch {
                expected,
                actual: buffer.len(),
                batch_count: self.batch_count,
                fft_size: self.fft_size,
            });
        }
        if let Some(idx) = find_non_finite(buffer) {
            return Err(FftError::NonFiniteInput(idx));
        }

        for segment in buffer.chunks_exact_mut(self.fft_size) {
            self.transform_segment(segment);
        }

        if let Some(idx) = find_non_finite(buffer) {
            return Err(FftError::NonFiniteOutput(idx));
        }
        Ok(())
    }

    /// Iterative decimation-in-time radix-2 transform of one segment.
    fn transform_segment(&self, seg: &mut [ComplexSample]) {
        let n = self.fft_size;

        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                seg.swap(i, j);
            }
        }

        // Butterfly stages: group size doubles each stage; butterfly k of a
        // group uses twiddle exp(+-2πi k/m) = twiddles[k * (n/m)].
        let mut half = 1;
        while half < n {
            let stride = n / (half * 2);
            for group in seg.chunks_exact_mut(half * 2) {
                let (lo, hi) = group.split_at_mut(half);
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = lo[k];
                    let b = hi[k];
                    let t_re = w.re * b.re as f64 - w.im * b.im as f64;
                    let t_im = w.re * b.im as f64 + w.im * b.re as f64;
                    lo[k] = ComplexSample::new(
                        (a.re as f64 + t_re) as f32,
                        (a.im as f64 + t_im) as f32,
                    );
                    hi[k] = ComplexSample::new(
                        (a.re as f64 - t_re) as f32,
                        (a.im as f64 - t_im) as f32,
                    );
                }
            }
            half *= 2;
        }

        if self.direction == Direction::Inverse && self.scale_inverse {
            // 1/n is a power of two, so this scaling is exact in f32.
            let scale = 1.0 / n as f32;
            for v in seg.iter_mut() {
                v.re *= scale;
                v.im *= scale;
            }
        }
    }
}

fn reverse_bits(value: usize, bits: u32) -> usize {
    let mut v = value;
    let mut out = 0;
    for _ in 0..bits {
        out = (out << 1) | (v & 1);
        v >>= 1;
    }
    out
}

fn find_non_finite(buffer: &[ComplexSample]) -> Option<usize> {
    buffer
        .iter()
        .position(|s| !s.re.is_finite() || !s.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::oracle::{dft_oracle, relative_l2_error, widen};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_segment(rng: &mut ChaCha8Rng, n: usize) -> Vec<ComplexSample> {
        (0..n)
            .map(|_| {
                ComplexSample::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
            })
            .collect()
    }

    #[test]
    fn rejects_non_power_of_two_sizes() {
        for n in [0usize, 1, 3, 6, 1000] {
            match FftPlan::new(n, 1, Direction::Forward) {
                Err(FftError::UnsupportedSize(got)) => assert_eq!(got, n),
                other => panic!("size {n}: expected UnsupportedSize, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_zero_batch() {
        assert!(matches!(
            FftPlan::new(8, 0, Direction::Forward),
            Err(FftError::InvalidBatchCount(0))
        ));
    }

    #[test]
    fn twiddles_for_size_four() {
        let plan = FftPlan::new(4, 1, Direction::Forward).unwrap();
        let tw = plan.twiddles();
        assert_eq!(tw.len(), 2);
        assert!((tw[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((tw[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn twiddles_have_unit_modulus() {
        for n in [2usize, 16, 1024] {
            let plan = FftPlan::new(n, 1, Direction::Forward).unwrap();
            for w in plan.twiddles() {
                assert!((w.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bitrev_is_an_involution() {
        for n in [2usize, 8, 64, 4096] {
            let plan = FftPlan::new(n, 1, Direction::Forward).unwrap();
            let table = plan.bitrev_table();
            for i in 0..n {
                assert_eq!(table[table[i]], i, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn impulse_transforms_to_all_ones() {
        let plan = FftPlan::new(4, 1, Direction::Forward).unwrap();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); 4];
        buf[0] = ComplexSample::new(1.0, 0.0);
        plan.execute(&mut buf).unwrap();
        for v in &buf {
            assert!((v.re - 1.0).abs() < 1e-6 && v.im.abs() < 1e-6);
        }
    }

    #[test]
    fn constant_transforms_to_scaled_delta() {
        let plan = FftPlan::new(4, 1, Direction::Forward).unwrap();
        let mut buf = vec![ComplexSample::new(1.0, 0.0); 4];
        plan.execute(&mut buf).unwrap();
        assert!((buf[0].re - 4.0).abs() < 1e-6 && buf[0].im.abs() < 1e-6);
        for v in &buf[1..] {
            assert!(v.re.abs() < 1e-6 && v.im.abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_reports_expected_and_actual() {
        let plan = FftPlan::new(8, 2, Direction::Forward).unwrap();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); 9];
        match plan.execute(&mut buf) {
            Err(FftError::ShapeMismatch {
                expected, actual, ..
            }) => {
                assert_eq!(expected, 16);
                assert_eq!(actual, 9);
            }
            other => panic!("expected ShapeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let plan = FftPlan::new(4, 1, Direction::Forward).unwrap();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); 4];
        buf[2].im = f32::NAN;
        assert!(matches!(
            plan.execute(&mut buf),
            Err(FftError::NonFiniteInput(2))
        ));
    }

    #[test]
    fn matches_oracle_across_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut n = 2usize;
        while n <= 4096 {
            let plan = FftPlan::new(n, 1, Direction::Forward).unwrap();
            for _ in 0..4 {
                let input = random_segment(&mut rng, n);
                let expected = dft_oracle(&input);
                let mut actual = input.clone();
                plan.execute(&mut actual).unwrap();
                let err = relative_l2_error(&widen(&actual), &expected);
                assert!(err <= 1e-4, "n={n}: relative L2 error {err}");
            }
            n *= 2;
        }
    }

    #[test]
    fn linearity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 256;
        let plan = FftPlan::new(n, 1, Direction::Forward).unwrap();
        let x = random_segment(&mut rng, n);
        let y = random_segment(&mut rng, n);
        let (a, b) = (0.37f32, -1.25f32);

        let mut combined: Vec<ComplexSample> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| ComplexSample::new(a * xi.re + b * yi.re, a * xi.im + b * yi.im))
            .collect();
        plan.execute(&mut combined).unwrap();

        let mut fx = x.clone();
        let mut fy = y.clone();
        plan.execute(&mut fx).unwrap();
        plan.execute(&mut fy).unwrap();
        let reference: Vec<Complex64> = fx
            .iter()
            .zip(&fy)
            .map(|(xi, yi)| {
                Complex64::new(
                    a as f64 * xi.re as f64 + b as f64 * yi.re as f64,
                    a as f64 * xi.im as f64 + b as f64 * yi.im as f64,
                )
            })
            .collect();

        let err = relative_l2_error(&widen(&combined), &reference);
        assert!(err <= 1e-4, "linearity violated: {err}");
    }

    #[test]
    fn parseval_holds_for_forward_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [8usize, 128, 1024] {
            let plan = FftPlan::new(n, 1, Direction::Forward).unwrap();
            let input = random_segment(&mut rng, n);
            let time_energy: f64 = input.iter().map(|v| v.norm_sqr() as f64).sum();
            let mut spectrum = input.clone();
            plan.execute(&mut spectrum).unwrap();
            let freq_energy: f64 =
                spectrum.iter().map(|v| v.norm_sqr() as f64).sum::<f64>() / n as f64;
            let rel = (time_energy - freq_energy).abs() / time_energy;
            assert!(rel <= 1e-3, "n={n}: Parseval relative error {rel}");
        }
    }

    #[test]
    fn roundtrip_recovers_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1024;
        let forward = FftPlan::new(n, 1, Direction::Forward).unwrap();
        let inverse = FftPlan::new(n, 1, Direction::Inverse).unwrap();

        let input = random_segment(&mut rng, n);
        let mut buf = input.clone();
        forward.execute(&mut buf).unwrap();
        inverse.execute(&mut buf).unwrap();

        let err = relative_l2_error(&widen(&buf), &widen(&input));
        assert!(err <= 1e-5, "roundtrip error {err}");
    }

    #[test]
    fn roundtrip_of_zeros_is_exact() {
        let n = 64;
        let forward = FftPlan::new(n, 1, Direction::Forward).unwrap();
        let inverse = FftPlan::new(n, 1, Direction::Inverse).unwrap();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); n];
        forward.execute(&mut buf).unwrap();
        inverse.execute(&mut buf).unwrap();
        assert!(buf.iter().all(|v| v.re == 0.0 && v.im == 0.0));
    }

    #[test]
    fn roundtrip_of_impulse_is_tight() {
        let n = 256;
        let forward = FftPlan::new(n, 1, Direction::Forward).unwrap();
        let inverse = FftPlan::new(n, 1, Direction::Inverse).unwrap();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); n];
        buf[0] = ComplexSample::new(1.0, 0.0);
        forward.execute(&mut buf).unwrap();
        inverse.execute(&mut buf).unwrap();
        assert!((buf[0].re - 1.0).abs() <= 1e-6);
        for v in &buf[1..] {
            assert!(v.re.abs() <= 1e-6 && v.im.abs() <= 1e-6);
        }
    }

    #[test]
    fn unscaled_inverse_leaves_factor_n() {
        let n = 16;
        let forward = FftPlan::new(n, 1, Direction::Forward).unwrap();
        let inverse = FftPlan::new(n, 1, Direction::Inverse)
            .unwrap()
            .without_inverse_scaling();
        let mut buf = vec![ComplexSample::new(0.0, 0.0); n];
        buf[3] = ComplexSample::new(1.0, 0.0);
        forward.execute(&mut buf).unwrap();
        inverse.execute(&mut buf).unwrap();
        assert!((buf[3].re - n as f32).abs() < 1e-3);
    }

    #[test]
    fn batched_execution_is_bit_identical_to_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 128;
        let batch = 8;
        let batched_plan = FftPlan::new(n, batch, Direction::Forward).unwrap();
        let single_plan = FftPlan::new(n, 1, Direction::Forward).unwrap();

        let mut buffer = random_segment(&mut rng, n * batch);
        let mut segments: Vec<Vec<ComplexSample>> =
            buffer.chunks(n).map(|c| c.to_vec()).collect();

        batched_plan.execute(&mut buffer).unwrap();
        for seg in &mut segments {
            single_plan.execute(seg).unwrap();
        }

        for (b, seg) in segments.iter().enumerate() {
            for (i, v) in seg.iter().enumerate() {
                let got = buffer[b * n + i];
                assert_eq!(v.re.to_bits(), got.re.to_bits(), "batch {b} sample {i}");
                assert_eq!(v.im.to_bits(), got.im.to_bits(), "batch {b} sample {i}");
            }
        }
    }
}
