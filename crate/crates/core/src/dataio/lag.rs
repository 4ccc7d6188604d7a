use super::EventSeries;
use crate::error::{FuzzyError, Result};

/// Lag estimates in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagEstimate {
    /// From the summed rainfall; applied to every channel.
    pub shared: usize,
    pub per_channel: [usize; 3],
}

/// Pearson correlation of `a[..len - lag]` against `b[lag..]`, or `None`
/// when either segment is constant.
pub(crate) fn lagged_correlation(a: &[f64], b: &[f64], lag: usize) -> Option<f64> {
    let n = a.len().min(b.len()).checked_sub(lag)?;
    if n < 2 {
        return None;
    }
    let x = &a[..n];
    let y = &b[lag..lag + n];
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(y) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx) * (u - mx);
        syy += (v - my) * (v - my);
    }
    if sxx > 0.0 && syy > 0.0 {
        Some(sxy / (sxx * syy).sqrt())
    } else {
        None
    }
}

fn best_lag(rain: &[f64], head: &[f64], max_lag: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for lag in 0..=max_lag {
        if let Some(c) = lagged_correlation(rain, head, lag) {
            if c > best.1 {
                best = (lag, c);
            }
        }
    }
    best.0
}

/// Cross-correlation lag between rainfall and head, searched over
/// `0..=max_lag` samples; ties go to the shorter lag.
pub fn estimate_lag(series: &EventSeries, max_lag: usize) -> Result<LagEstimate> {
    if series.len() <= 2 * max_lag {
        return Err(FuzzyError::DegenerateSeries(format!(
            "lag search up to {max_lag} needs more than {} samples, got {}",
            2 * max_lag,
            series.len()
        )));
    }
    for (j, channel) in series.rain_channels().iter().enumerate() {
        if channel.iter().all(|&v| v == 0.0) {
            return Err(FuzzyError::DegenerateSeries(format!(
                "rain{} is identically zero",
                j + 1
            )));
        }
    }
    let head = series.head();
    let per_channel = [0, 1, 2].map(|j| best_lag(series.rain(j), head, max_lag));
    let shared = best_lag(&series.total_rain(), head, max_lag);
    Ok(LagEstimate {
        shared,
        per_channel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rain(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(0.0..2.0)).collect()
    }

    fn delayed(x: &[f64], lag: usize) -> Vec<f64> {
        (0..x.len()).map(|k| if k >= lag { x[k - lag] } else { 0.0 }).collect()
    }

    fn series(r: [Vec<f64>; 3], head: Vec<f64>) -> EventSeries {
        let n = head.len();
        EventSeries::new(30.0, (0..n).map(|k| 30.0 * k as f64).collect(), r, head).unwrap()
    }

    #[test]
    fn pure_delays_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for lag in 0..=10 {
            let r1 = random_rain(&mut rng, 120);
            let r2: Vec<f64> = r1.iter().map(|v| 0.5 * v).collect();
            let r3: Vec<f64> = r1.iter().map(|v| 2.0 * v).collect();
            let head = delayed(&r1, lag);
            let est = estimate_lag(&series([r1, r2, r3], head), 15).unwrap();
            assert_eq!(est.shared, lag);
            assert_eq!(est.per_channel, [lag; 3]);
        }
    }

    #[test]
    fn shared_lag_with_two_channel_delays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r1 = random_rain(&mut rng, 150);
        let r2 = random_rain(&mut rng, 150);
        let r3 = random_rain(&mut rng, 150);
        let (d1, d2) = (delayed(&r1, 4), delayed(&r2, 6));
        let head: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let s = series([r1.clone(), r2.clone(), r3.clone()], head.clone());
        let est = estimate_lag(&s, 12).unwrap();

        // brute force: correlation of summed rain at every lag
        let total: Vec<f64> = (0..150).map(|k| r1[k] + r2[k] + r3[k]).collect();
        let mut oracle = (0, f64::NEG_INFINITY);
        for l in 0..=12 {
            let n = 150 - l;
            let x = &total[..n];
            let y = &head[l..];
            let mx: f64 = x.iter().sum::<f64>() / n as f64;
            let my: f64 = y.iter().sum::<f64>() / n as f64;
            let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let den = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
                * y.iter().map(|b| (b - my).powi(2)).sum::<f64>())
            .sqrt();
            if num / den > oracle.1 {
                oracle = (l, num / den);
            }
        }
        assert!((4..=6).contains(&est.shared));
        assert_eq!(est.shared, oracle.0);
        assert_eq!(est.per_channel[0], 4);
        assert_eq!(est.per_channel[1], 6);
    }

    #[test]
    fn all_zero_channel_is_an_error() {
        let head: Vec<f64> = (0..40).map(|k| k as f64).collect();
        let s = series([vec![0.0; 40], vec![1.0; 40], vec![0.5; 40]], head);
        assert!(estimate_lag(&s, 5).is_err());
    }

    #[test]
    fn short_series_is_an_error() {
        let s = series([vec![1.0; 10], vec![1.0; 10], vec![1.0; 10]], vec![0.0; 10]);
        assert!(estimate_lag(&s, 5).is_err());
    }
}
