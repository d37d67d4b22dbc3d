//! Secular frequencies from trajectory spectra.
//!
//! Each axis series is mean-removed, Hann-windowed, zero-padded to four
//! times the next power of two and transformed. The secular peak is the
//! largest local maximum below half the drive frequency, refined by a
//! three-point parabola through the log magnitudes.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::mathieu::Axis;

pub const MIN_SAMPLES: usize = 512;
pub const ZERO_PAD_FACTOR: usize = 4;
/// Peak power below this fraction of the total spectral power counts as noise.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz.
    pub bin_width: f64,
    pub magnitudes: Vec<f64>,
    pub source_axis: Axis,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    pub fn nyquist(&self) -> f64 {
        self.frequency(self.magnitudes.len() - 1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "frequency_hz,magnitude")?;
        for (k, m) in self.magnitudes.iter().enumerate() {
            writeln!(w, "{:.6},{:.9e}", self.frequency(k), m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    /// Hz.
    pub frequency: f64,
    pub magnitude: f64,
    pub interpolated: bool,
}

pub fn spectrum_of(traj: &Trajectory, axis: Axis) -> Result<Spectrum> {
    if let Some(e) = traj.escape {
        return Err(Error::Escaped {
            axis: e.axis,
            time: e.time,
        });
    }
    spectrum_of_series(&traj.axis_series(axis), traj.sample_interval, axis)
}

/// Spectrum of a uniformly sampled series with spacing `dt` seconds.
pub fn spectrum_of_series(series: &[f64], dt: f64, axis: Axis) -> Result<Spectrum> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(invalid("series", format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "sample interval must be positive"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let padded = n.next_power_of_two() * ZERO_PAD_FACTOR;
    let denom = (n - 1) as f64;
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos());
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    buf.resize(padded, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let magnitudes = buf[..=padded / 2].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        bin_width: 1.0 / (padded as f64 * dt),
        magnitudes,
        source_axis: axis,
    })
}

/// Locates the secular peak strictly below `drive_frequency / 2` (Hz).
pub fn find_secular_peak(spec: &Spectrum, drive_frequency: f64) -> Result<PeakEstimate> {
    let limit = 0.5 * drive_frequency;
    let no_peak = Error::NoPeak { limit };
    let m = &spec.magnitudes;
    if m.len() < 3 {
        return Err(no_peak);
    }
    let total_power: f64 = m.iter().map(|v| v * v).sum();
    let mut best: Option<usize> = None;
    for k in 1..m.len() - 1 {
        if spec.frequency(k) >= limit {
            break;
        }
        if m[k] > m[k - 1] && m[k] >= m[k + 1] && best.is_none_or(|b| m[k] > m[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(no_peak.clone())?;
    if !(total_power > 0.0) || m[k] * m[k] < NOISE_FLOOR * total_power {
        return Err(no_peak);
    }
    let (l, c, r) = (m[k - 1], m[k], m[k + 1]);
    if l > 0.0 && r > 0.0 {
        let (l, c, r) = (l.ln(), c.ln(), r.ln());
        let curvature = l - 2.0 * c + r;
        if curvature < 0.0 {
            let delta = 0.5 * (l - r) / curvature;
            return Ok(PeakEstimate {
                frequency: (k as f64 + delta) * spec.bin_width,
                magnitude: (c - 0.25 * (l - r) * delta).exp(),
                interpolated: true,
            });
        }
    }
    Ok(PeakEstimate {
        frequency: spec.frequency(k),
        magnitude: c,
        interpolated: false,
    })
}

/// Secular frequency of one axis of a trajectory, Hz.
pub fn secular_peak_of(traj: &Trajectory, axis: Axis, drive_frequency: f64) -> Result<PeakEstimate> {
    find_secular_peak(&spectrum_of(traj, axis)?, drive_frequency)
}
