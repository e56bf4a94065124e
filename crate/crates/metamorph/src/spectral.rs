//! Window-length selection by spectral reconstruction loss.
//!
//! For every candidate window length, each stride-1 window of the series is
//! taken to the frequency domain, center-shifted so the informative low
//! frequencies sit mid-array, stripped of its two edge bins (the least
//! informative bands), and reconstructed. The squared reconstruction error,
//! normalized by window count and length, is summed into a loss curve over
//! window lengths; the elbow of that curve suggests how many past steps a
//! forecaster should see.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Reconstruction-loss curve over candidate window lengths, plus the
/// detected elbow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepLossCurve {
    /// `(window length, loss)` points, window length running from 5 upward.
    pub points: Vec<(usize, f64)>,
    /// Smallest window length where the backward slope magnitude drops
    /// below 10% of the curve's maximum slope magnitude.
    pub elbow: usize,
}

pub const MIN_TIMESTEP: usize = 5;
const MIN_SERIES_LEN: usize = 6;
const ELBOW_SLOPE_FRACTION: f64 = 0.1;

/// Sweeps window lengths from 5 to `max_timestep` (default: series length)
/// and accumulates the per-length reconstruction loss.
pub fn timestep_loss_curve(series: &TimeSeries, max_timestep: Option<usize>) -> Result<TimestepLossCurve> {
    let values = series.dense()?;
    let len = values.len();
    if len < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            len,
            min: MIN_SERIES_LEN,
        });
    }
    let hi = max_timestep.unwrap_or(len).min(len);
    let mut planner = FftPlanner::new();
    let mut points = Vec::with_capacity(hi + 1 - MIN_TIMESTEP);
    for t in MIN_TIMESTEP..=hi {
        let fft = planner.plan_fft_forward(t);
        let ifft = planner.plan_fft_inverse(t);
        let n_windows = len - t + 1;
        let mut loss = 0.0;
        let mut buf = vec![Complex::new(0.0, 0.0); t];
        for start in 0..n_windows {
            let window = &values[start..start + t];
            for (b, &v) in buf.iter_mut().zip(window) {
                *b = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            let mut shifted = fft_shift(&buf);
            shifted[0] = Complex::new(0.0, 0.0);
            shifted[t - 1] = Complex::new(0.0, 0.0);
            buf = inverse_fft_shift(&shifted);
            ifft.process(&mut buf);
            let scale = 1.0 / t as f64;
            let mut l = 0.0;
            for (b, &v) in buf.iter().zip(window) {
                let diff = Complex::new(b.re * scale - v, b.im * scale);
                l += diff.norm_sqr();
            }
            loss += l / (n_windows as f64 * t as f64);
        }
        points.push((t, loss));
    }
    let elbow = detect_elbow(&points);
    Ok(TimestepLossCurve { points, elbow })
}

/// Rotates the spectrum so the zero-frequency bin lands mid-array.
fn fft_shift(f: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = f.len();
    let pivot = n - n / 2; // DC moves from 0 to n/2
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&f[pivot..]);
    out.extend_from_slice(&f[..pivot]);
    out
}

fn inverse_fft_shift(f: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = f.len();
    let pivot = n / 2;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&f[pivot..]);
    out.extend_from_slice(&f[..pivot]);
    out
}

fn detect_elbow(points: &[(usize, f64)]) -> usize {
    let slopes: Vec<(usize, f64)> = points
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 - w[0].1).abs()))
        .collect();
    let max_slope = slopes.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    if max_slope == 0.0 {
        return points[0].0;
    }
    slopes
        .iter()
        .find(|(_, s)| *s < ELBOW_SLOPE_FRACTION * max_slope)
        .map(|(t, _)| *t)
        .unwrap_or_else(|| points[points.len() - 1].0)
}
