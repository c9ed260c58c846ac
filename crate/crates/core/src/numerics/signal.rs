//! Signal metrics: zero-crossing frequency, settling time, low-pass filtering.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Linear interpolation of the instant where the segment crosses zero.
#[inline]
fn crossing_instant(t0: f64, v0: f64, t1: f64, v1: f64) -> f64 {
    t0 + (t1 - t0) * (-v0) / (v1 - v0)
}

/// Rising zero crossings of `values`, linearly interpolated.
pub fn rising_crossings(times: &[f64], values: &[f64]) -> Vec<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .filter(|(_, v)| v[0] < 0.0 && v[1] >= 0.0)
        .map(|(t, v)| crossing_instant(t[0], v[0], t[1], v[1]))
        .collect()
}

fn frequency_from_crossings(crossings: &[f64]) -> Result<f64> {
    match crossings {
        [first, .., last] if last > first => Ok((crossings.len() - 1) as f64 / (last - first)),
        _ => Err(Error::InsufficientCrossings),
    }
}

/// Frequency over the trailing `window` seconds of a sampled signal,
/// from linearly interpolated rising zero crossings.
pub fn estimate_frequency(times: &[f64], values: &[f64], window: f64) -> Result<f64> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let Some(&t_end) = times.last() else {
        return Err(Error::InsufficientCrossings);
    };
    let start = times.partition_point(|&t| t < t_end - window);
    // the sample before the window lets a crossing right at its edge count
    let start = start.saturating_sub(1);
    let crossings: Vec<f64> = rising_crossings(&times[start..], &values[start..])
        .into_iter()
        .filter(|&t| t >= t_end - window)
        .collect();
    frequency_from_crossings(&crossings)
}

/// Streaming version of [`estimate_frequency`].
///
/// A rising crossing is only accepted once the signal has been below
/// `-hysteresis` since the previous accepted crossing, which keeps
/// switching ripple around zero from producing spurious crossings.
#[derive(Debug, Clone)]
pub struct FrequencyTracker {
    window: f64,
    hysteresis: f64,
    armed: bool,
    last: Option<(f64, f64)>,
    crossings: VecDeque<f64>,
}

impl FrequencyTracker {
    pub fn new(window: f64, hysteresis: f64) -> Self {
        Self {
            window,
            hysteresis,
            armed: false,
            last: None,
            crossings: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        if v < -self.hysteresis {
            self.armed = true;
        }
        if let Some((t0, v0)) = self.last {
            if self.armed && v0 < 0.0 && v >= 0.0 {
                self.crossings.push_back(crossing_instant(t0, v0, t, v));
                self.armed = false;
            }
        }
        self.last = Some((t, v));
        while let Some(&front) = self.crossings.front() {
            if front < t - self.window {
                self.crossings.pop_front();
            } else {
                break;
            }
        }
    }

    /// Frequency over the current window, `None` until two crossings exist.
    pub fn frequency(&self) -> Option<f64> {
        let (first, last) = (*self.crossings.front()?, *self.crossings.back()?);
        (last > first).then(|| (self.crossings.len() - 1) as f64 / (last - first))
    }
}

/// Time after `step_time` beyond which the signal stays within
/// `band_pct` percent of its final value (mean of the last 10% of samples).
pub fn settling_time(times: &[f64], values: &[f64], step_time: f64, band_pct: f64) -> Result<f64> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let n = values.len();
    if n == 0 {
        return Err(Error::NeverSettles);
    }
    let tail = (n / 10).max(1);
    let final_value = values[n - tail..].iter().sum::<f64>() / tail as f64;
    let band = band_pct / 100.0 * final_value.abs();
    let start = times.partition_point(|&t| t < step_time);
    let last_violation = (start..n).rev().find(|&i| (values[i] - final_value).abs() > band);
    match last_violation {
        None => Ok(0.0),
        // still leaving the band inside the averaging tail: no final value
        Some(i) if i >= n - tail => Err(Error::NeverSettles),
        Some(i) => Ok(times[i + 1] - step_time),
    }
}

/// First-order low-pass filter for a fixed sample period.
#[derive(Debug, Clone, Copy)]
pub struct LowPass {
    gain: f64,
    value: f64,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, sample_period: f64, initial: f64) -> Self {
        Self {
            gain: 1.0 - (-TAU * cutoff_hz * sample_period).exp(),
            value: initial,
        }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        self.value += self.gain * (x - self.value);
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn reset(&mut self, value: f64) {
        self.value = value;
    }
}
