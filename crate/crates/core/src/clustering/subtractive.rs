//! Subtractive (density-peak) clustering.
//!
//! Every sample gets a potential `sum_j exp(-4 |z_k - z_j|^2 / r_a^2)` on
//! min-max normalized data. The highest-potential sample becomes a center,
//! the potentials around it are reduced with the squashed radius
//! `r_b = squash * r_a`, and the search repeats until the accept/reject
//! thresholds end it.

use nalgebra::{DMatrix, DVector};

use super::fuzzy::{fuzzy_scatter, update_memberships};
use super::{
    ClusterConfig, ClusterSet, ClusteringResult, DataMatrix, IterationTrace, SubtractiveParams,
};
use crate::error::{FuzzyError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubtractiveOutcome {
    /// Centers in the original data units, in order of selection.
    pub centers: Vec<DVector<f64>>,
    /// Row indices of the samples chosen as centers.
    pub indices: Vec<usize>,
}

impl SubtractiveOutcome {
    pub fn effective_clusters(&self) -> usize {
        self.centers.len()
    }
}

fn normalized(data: &DataMatrix) -> Vec<DVector<f64>> {
    let bounds = data.bounds();
    (0..data.samples())
        .map(|k| {
            DVector::from_iterator(
                data.dim(),
                bounds.iter().enumerate().map(|(j, &(lo, hi))| {
                    let range = hi - lo;
                    if range > 0.0 {
                        (data.matrix()[(k, j)] - lo) / range
                    } else {
                        0.0
                    }
                }),
            )
        })
        .collect()
}

/// First index holding the maximum value.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn run_sc(data: &DataMatrix, params: &SubtractiveParams) -> Result<SubtractiveOutcome> {
    params.validate()?;
    if data.samples() == 0 {
        return Err(FuzzyError::NoCenters);
    }
    let points = normalized(data);
    let alpha = 4.0 / (params.radius * params.radius);
    let rb = params.squash * params.radius;
    let beta = 4.0 / (rb * rb);

    let mut potential: Vec<f64> = points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| (-alpha * (p - q).norm_squared()).exp())
                .sum()
        })
        .collect();

    let (mut idx, mut peak) = argmax(&potential);
    let reference = peak;
    let mut chosen: Vec<usize> = Vec::new();
    let cap = params.max_centers.unwrap_or(usize::MAX);

    while peak > 0.0 && chosen.len() < cap {
        let ratio = peak / reference;
        let accept = if ratio > params.accept_ratio {
            true
        } else if ratio > params.reject_ratio {
            let min_dist = chosen
                .iter()
                .map(|&c| (&points[idx] - &points[c]).norm() / params.radius)
                .fold(f64::INFINITY, f64::min);
            if ratio + min_dist >= 1.0 {
                true
            } else {
                potential[idx] = 0.0;
                (idx, peak) = argmax(&potential);
                continue;
            }
        } else {
            break;
        };
        debug_assert!(accept);
        chosen.push(idx);
        let center = points[idx].clone();
        for (p, pot) in points.iter().zip(potential.iter_mut()) {
            *pot = (*pot - peak * (-beta * (p - &center).norm_squared()).exp()).max(0.0);
        }
        (idx, peak) = argmax(&potential);
    }

    if chosen.is_empty() {
        return Err(FuzzyError::NoCenters);
    }
    Ok(SubtractiveOutcome {
        centers: chosen.iter().map(|&k| data.sample(k)).collect(),
        indices: chosen,
    })
}

/// Subtractive clustering followed by a membership pass on squared
/// Euclidean distances to the selected centers. `cfg.clusters` caps the
/// number of centers unless the subtractive parameters set their own cap.
pub fn sc_clustering(data: &DataMatrix, cfg: &ClusterConfig) -> Result<ClusteringResult> {
    let mut params = cfg.subtractive;
    params.max_centers = Some(params.max_centers.unwrap_or(cfg.clusters));
    let outcome = run_sc(data, &params)?;
    let centers = outcome.centers;
    let samples = data.sample_vectors();
    let dist = DMatrix::from_fn(centers.len(), samples.len(), |i, k| {
        (&samples[k] - &centers[i]).norm_squared()
    });
    let partition = update_memberships(&dist, cfg.fuzziness);
    let covariances = fuzzy_scatter(data, &partition, &centers, cfg.fuzziness)?;
    let p = data.dim();
    Ok(ClusteringResult {
        clusters: ClusterSet {
            norms: vec![DMatrix::identity(p, p); centers.len()],
            centers,
            covariances,
            volume: 1.0,
        },
        partition,
        trace: IterationTrace {
            records: Vec::new(),
            converged: true,
        },
    })
}
