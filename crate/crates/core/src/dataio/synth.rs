//! Synthetic storm events: Gaussian rain pulses over three gauges drive a
//! nonlinear reservoir that produces the outlet head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::error::{FuzzyError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StormParams {
    /// Number of rain pulses in the event.
    pub pulses: usize,
    /// Upper bound of a pulse peak, mm per interval.
    pub peak_intensity: f64,
    /// Typical pulse half-width, seconds.
    pub pulse_width: f64,
    /// Multiplicative gain of each gauge.
    pub station_gain: [f64; 3],
    /// Arrival offset of the storm at each gauge, in samples.
    pub station_shift: [usize; 3],
    /// Relative multiplicative noise on gauge readings.
    pub station_jitter: f64,
    /// Routing delay from rainfall to head, in samples.
    pub routing_lag: usize,
    /// Reservoir recession factor in `[0, 1)`.
    pub recession: f64,
    pub gain: f64,
    /// Storage exponent applied to the routed rainfall.
    pub exponent: f64,
    /// Standard deviation of additive head noise, mm.
    pub noise: f64,
    pub initial_head: f64,
}

impl Default for StormParams {
    fn default() -> Self {
        Self {
            pulses: 3,
            peak_intensity: 1.5,
            pulse_width: 600.0,
            station_gain: [1.0, 0.7, 1.3],
            station_shift: [0, 2, 4],
            station_jitter: 0.1,
            routing_lag: 6,
            recession: 0.9,
            gain: 2.0,
            exponent: 1.5,
            noise: 0.0,
            initial_head: 0.0,
        }
    }
}

impl StormParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(FuzzyError::invalid(name, "must be positive and finite"))
            }
        };
        positive("peak_intensity", self.peak_intensity)?;
        positive("pulse_width", self.pulse_width)?;
        positive("gain", self.gain)?;
        positive("exponent", self.exponent)?;
        if !(0.0..1.0).contains(&self.recession) {
            return Err(FuzzyError::invalid("recession", "must lie in [0, 1)"));
        }
        if self.station_gain.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(FuzzyError::invalid("station_gain", "must be non-negative"));
        }
        if !(self.station_jitter >= 0.0 && self.station_jitter < 1.0) {
            return Err(FuzzyError::invalid("station_jitter", "must lie in [0, 1)"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(FuzzyError::invalid("noise", "must be non-negative"));
        }
        if !self.initial_head.is_finite() {
            return Err(FuzzyError::invalid("initial_head", "must be finite"));
        }
        Ok(())
    }
}

/// One head step: `recession * previous + gain * routed^exponent`.
pub fn reservoir_step(params: &StormParams, previous: f64, routed_rain: f64) -> f64 {
    params.recession * previous + params.gain * routed_rain.powf(params.exponent)
}

/// Generates a storm of `duration` seconds on a grid of `interval` seconds.
pub fn synth_storm(seed: u64, duration: f64, interval: f64, params: &StormParams) -> Result<EventSeries> {
    params.validate()?;
    if !(interval > 0.0 && duration >= interval) {
        return Err(FuzzyError::invalid(
            "duration",
            "need interval > 0 and duration >= interval",
        ));
    }
    let n = (duration / interval).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width_samples = params.pulse_width / interval;

    let pulses: Vec<(f64, f64, f64)> = (0..params.pulses)
        .map(|_| {
            let center = rng.random_range(0.1..0.6) * n as f64;
            let amp = rng.random_range(0.4..1.0) * params.peak_intensity;
            let width = rng.random_range(0.5..1.5) * width_samples;
            (center, amp, width)
        })
        .collect();

    let rain: [Vec<f64>; 3] = std::array::from_fn(|j| {
        (0..n)
            .map(|k| {
                let t = k as f64 - params.station_shift[j] as f64;
                let clean: f64 = pulses
                    .iter()
                    .map(|&(c, a, w)| a * (-((t - c) / w).powi(2)).exp())
                    .sum();
                let jitter = if params.station_jitter > 0.0 {
                    rng.random_range(-params.station_jitter..params.station_jitter)
                } else {
                    0.0
                };
                (params.station_gain[j] * clean * (1.0 + jitter)).max(0.0)
            })
            .collect()
    });

    let noise = Normal::new(0.0, params.noise.max(f64::MIN_POSITIVE))
        .map_err(|e| FuzzyError::invalid("noise", e.to_string()))?;
    let mut head = Vec::with_capacity(n);
    head.push(params.initial_head);
    for k in 1..n {
        let routed = if k >= params.routing_lag {
            rain.iter().map(|c| c[k - params.routing_lag]).sum()
        } else {
            0.0
        };
        let mut y = reservoir_step(params, head[k - 1], routed);
        if params.noise > 0.0 {
            y += noise.sample(&mut rng);
        }
        head.push(y);
    }

    let timestamps = (0..n).map(|k| k as f64 * interval).collect();
    EventSeries::new(interval, timestamps, rain, head)
}
