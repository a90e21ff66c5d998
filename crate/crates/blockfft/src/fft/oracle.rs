//! Naive reference DFT and comparison helpers.
//!
//! [`dft_oracle`] is the O(n^2) textbook definition, computed entirely in
//! double precision. It shares no code with [`FftPlan`](super::FftPlan) — no
//! plans, no bit reversal, no shared tables — so the two can check each other.
//! Unlike the fast path it accepts any length, not just powers of two.

use num_complex::Complex64;

use super::ComplexSample;

/// `X[k] = Σ_j x[j] · exp(-2πi jk/n)`, evaluated directly.
pub fn dft_oracle(input: &[ComplexSample]) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    // One table of the n distinct roots; exponents reduce mod n.
    let step = -2.0 * std::f64::consts::PI / n as f64;
    let roots: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect();

    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, x) in input.iter().enumerate() {
                acc += Complex64::new(x.re as f64, x.im as f64) * roots[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// Promotes a single-precision buffer for comparison against oracle output.
pub fn widen(samples: &[ComplexSample]) -> Vec<Complex64> {
    samples
        .iter()
        .map(|s| Complex64::new(s.re as f64, s.im as f64))
        .collect()
}

/// Relative L2 error `‖a − b‖ / ‖b‖`, with `‖a‖` as fallback when `b` is zero.
///
/// Panics if the slices differ in length; comparing mismatched shapes is a
/// bug in the caller, not a measurement.
pub fn relative_l2_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_l2_error: length mismatch");
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y).norm_sqr();
        norm += y.norm_sqr();
    }
    if norm == 0.0 {
        return diff.sqrt();
    }
    (diff / norm).sqrt()
}
