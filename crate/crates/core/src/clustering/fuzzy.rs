use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ClusterConfig, ClusterSet, ClusteringResult, DataMatrix, IterationRecord, IterationTrace,
    PartitionMatrix, GK_VOLUME,
};
use crate::error::{FuzzyError, Result};

/// Random column-stochastic `C x N` starting partition.
pub fn init_partition(samples: usize, clusters: usize, seed: u64) -> Result<PartitionMatrix> {
    if clusters < 2 {
        return Err(FuzzyError::invalid("clusters", "need at least 2 clusters"));
    }
    if clusters >= samples {
        return Err(FuzzyError::invalid(
            "clusters",
            format!("{clusters} clusters need more than {samples} samples"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::zeros(clusters, samples);
    for k in 0..samples {
        let mut col = u.column_mut(k);
        for v in col.iter_mut() {
            *v = rng.random_range(f64::EPSILON..1.0);
        }
        let s = col.sum();
        col /= s;
    }
    Ok(PartitionMatrix::from_raw(u))
}

fn weights(partition: &PartitionMatrix, fuzziness: f64) -> DMatrix<f64> {
    partition.matrix().map(|mu| mu.powf(fuzziness))
}

/// Membership-weighted means `sum_k mu^m z_k / sum_k mu^m`.
pub fn update_centers(
    data: &DataMatrix,
    partition: &PartitionMatrix,
    fuzziness: f64,
) -> Result<Vec<DVector<f64>>> {
    check_shapes(data, partition)?;
    let w = weights(partition, fuzziness);
    let z = data.matrix();
    (0..partition.clusters())
        .map(|i| {
            let mass: f64 = w.row(i).sum();
            if !(mass > 0.0) {
                return Err(FuzzyError::EmptyCluster { cluster: i });
            }
            let mut v = DVector::zeros(data.dim());
            for k in 0..data.samples() {
                let wk = w[(i, k)];
                for j in 0..data.dim() {
                    v[j] += wk * z[(k, j)];
                }
            }
            Ok(v / mass)
        })
        .collect()
}

fn check_shapes(data: &DataMatrix, partition: &PartitionMatrix) -> Result<()> {
    if data.samples() != partition.samples() {
        return Err(FuzzyError::DimensionMismatch {
            expected: data.samples(),
            actual: partition.samples(),
        });
    }
    Ok(())
}

/// Raw fuzzy covariance of every cluster, without regularization.
pub fn fuzzy_scatter(
    data: &DataMatrix,
    partition: &PartitionMatrix,
    centers: &[DVector<f64>],
    fuzziness: f64,
) -> Result<Vec<DMatrix<f64>>> {
    check_shapes(data, partition)?;
    let w = weights(partition, fuzziness);
    let samples = data.sample_vectors();
    centers
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mass: f64 = w.row(i).sum();
            if !(mass > 0.0) {
                return Err(FuzzyError::EmptyCluster { cluster: i });
            }
            let mut f = DMatrix::zeros(data.dim(), data.dim());
            for (k, z) in samples.iter().enumerate() {
                let d = z - v;
                f.ger(w[(i, k)], &d, &d, 1.0);
            }
            Ok(f / mass)
        })
        .collect()
}

/// Total (biased) covariance of the data.
fn total_scatter(data: &DataMatrix) -> DMatrix<f64> {
    let n = data.samples() as f64;
    let samples = data.sample_vectors();
    let mean = samples
        .iter()
        .fold(DVector::zeros(data.dim()), |acc, z| acc + z)
        / n;
    let mut f = DMatrix::zeros(data.dim(), data.dim());
    for z in &samples {
        let d = z - &mean;
        f.ger(1.0, &d, &d, 1.0);
    }
    f / n
}

/// Scale of the identity term blended into the cluster covariances:
/// `det(F_all)^(1/p)`, or `trace / p` when the data itself is flat.
fn identity_scale(data: &DataMatrix) -> f64 {
    let f = total_scatter(data);
    let p = data.dim() as f64;
    let det = f.determinant();
    if det > 0.0 && det.is_finite() {
        return det.powf(1.0 / p);
    }
    let tr = f.trace() / p;
    if tr > 0.0 {
        tr
    } else {
        1.0
    }
}

/// Fuzzy covariances blended toward a scaled identity:
/// `(1 - gamma) F_i + gamma det(F_all)^(1/p) I`.
pub fn update_covariances(
    data: &DataMatrix,
    partition: &PartitionMatrix,
    centers: &[DVector<f64>],
    fuzziness: f64,
    gamma: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let raw = fuzzy_scatter(data, partition, centers, fuzziness)?;
    let p = data.dim();
    let scale = if gamma > 0.0 { identity_scale(data) } else { 0.0 };
    raw.into_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut f = f * (1.0 - gamma) + DMatrix::identity(p, p) * (gamma * scale);
            f = (&f + f.transpose()) * 0.5;
            check_positive_definite(&f, i)?;
            Ok(f)
        })
        .collect()
}

fn check_positive_definite(f: &DMatrix<f64>, cluster: usize) -> Result<()> {
    let trace = f.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(FuzzyError::SingularCovariance { cluster });
    }
    let eig = SymmetricEigen::new(f.clone());
    if eig.eigenvalues.min() <= 1e-12 * trace {
        return Err(FuzzyError::SingularCovariance { cluster });
    }
    Ok(())
}

/// Induced norm matrix `rho det(F)^(1/p) F^-1`, with `p` the dimension of
/// the clustering space. Its determinant is `rho^p`.
pub fn norm_matrix(covariance: &DMatrix<f64>, volume: f64) -> Result<DMatrix<f64>> {
    let p = covariance.nrows();
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or(FuzzyError::SingularCovariance { cluster: 0 })?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let root = (log_det / p as f64).exp();
    let m = chol.inverse() * (volume * root);
    Ok((&m + m.transpose()) * 0.5)
}

fn quadratic_form(norm: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    (d.transpose() * norm * d)[(0, 0)].max(0.0)
}

/// Squared GK distance `(z - v)^T rho det(F)^(1/p) F^-1 (z - v)`.
pub fn gk_distance(
    z: &DVector<f64>,
    center: &DVector<f64>,
    covariance: &DMatrix<f64>,
    volume: f64,
) -> Result<f64> {
    if z.len() != center.len() || covariance.nrows() != z.len() {
        return Err(FuzzyError::DimensionMismatch {
            expected: z.len(),
            actual: covariance.nrows(),
        });
    }
    let norm = norm_matrix(covariance, volume)?;
    Ok(quadratic_form(&norm, &(z - center)))
}

fn distance_matrix(
    samples: &[DVector<f64>],
    centers: &[DVector<f64>],
    norms: Option<&[DMatrix<f64>]>,
) -> DMatrix<f64> {
    DMatrix::from_fn(centers.len(), samples.len(), |i, k| {
        let d = &samples[k] - &centers[i];
        match norms {
            Some(norms) => quadratic_form(&norms[i], &d),
            None => d.norm_squared(),
        }
    })
}

/// Membership update from squared distances. Samples sitting on one or more
/// centers split their membership equally among those centers.
pub fn update_memberships(distances: &DMatrix<f64>, fuzziness: f64) -> PartitionMatrix {
    let (c, n) = distances.shape();
    let exponent = 1.0 / (fuzziness - 1.0);
    let mut u = DMatrix::zeros(c, n);
    for k in 0..n {
        let col = distances.column(k);
        let zeros = col.iter().filter(|&&d| d <= 0.0).count();
        if zeros > 0 {
            let share = 1.0 / zeros as f64;
            for i in 0..c {
                if col[i] <= 0.0 {
                    u[(i, k)] = share;
                }
            }
            continue;
        }
        for i in 0..c {
            let s: f64 = col.iter().map(|&dq| (col[i] / dq).powf(exponent)).sum();
            u[(i, k)] = 1.0 / s;
        }
    }
    PartitionMatrix::from_raw(u)
}

/// Objective `sum_i sum_k mu_ik^m G_ik^2`.
pub fn objective(partition: &PartitionMatrix, distances: &DMatrix<f64>, fuzziness: f64) -> f64 {
    partition
        .matrix()
        .iter()
        .zip(distances.iter())
        .map(|(mu, d)| mu.powf(fuzziness) * d)
        .sum()
}

fn check_run(data: &DataMatrix, cfg: &ClusterConfig) -> Result<()> {
    cfg.validate()?;
    if data.samples() <= cfg.clusters {
        return Err(FuzzyError::invalid(
            "clusters",
            format!(
                "{} clusters need more than {} samples",
                cfg.clusters,
                data.samples()
            ),
        ));
    }
    Ok(())
}

enum Norm {
    Adaptive,
    Identity,
}

fn alternate(data: &DataMatrix, cfg: &ClusterConfig, norm: Norm) -> Result<ClusteringResult> {
    check_run(data, cfg)?;
    let m = cfg.fuzziness;
    let samples = data.sample_vectors();
    let mut u = init_partition(data.samples(), cfg.clusters, cfg.seed)?;
    let mut trace = IterationTrace::default();

    // centers, covariances, norm-inducing matrices
    type Step = (Vec<DVector<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);
    let step = |u: &PartitionMatrix| -> Result<Step> {
        let centers = update_centers(data, u, m)?;
        match norm {
            Norm::Adaptive => {
                let covs = update_covariances(data, u, &centers, m, cfg.regularization)?;
                let norms = covs
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        norm_matrix(f, GK_VOLUME)
                            .map_err(|_| FuzzyError::SingularCovariance { cluster: i })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((centers, covs, norms))
            }
            Norm::Identity => {
                let p = data.dim();
                let covs = fuzzy_scatter(data, u, &centers, m)?;
                Ok((centers, covs, vec![DMatrix::identity(p, p); cfg.clusters]))
            }
        }
    };

    for iteration in 1..=cfg.max_iter {
        let (centers, _, norms) = step(&u)?;
        let dist = match norm {
            Norm::Adaptive => distance_matrix(&samples, &centers, Some(&norms)),
            Norm::Identity => distance_matrix(&samples, &centers, None),
        };
        let next = update_memberships(&dist, m);
        let delta = next.max_abs_diff(&u);
        trace.records.push(IterationRecord {
            iteration,
            objective: objective(&next, &dist, m),
            delta,
        });
        u = next;
        if delta <= cfg.tolerance {
            trace.converged = true;
            break;
        }
    }

    let (centers, covariances, norms) = step(&u)?;
    Ok(ClusteringResult {
        partition: u,
        clusters: ClusterSet {
            centers,
            covariances,
            norms,
            volume: GK_VOLUME,
        },
        trace,
    })
}

/// Gustafson-Kessel clustering with the adaptive per-cluster norm.
pub fn run_gk(data: &DataMatrix, cfg: &ClusterConfig) -> Result<ClusteringResult> {
    alternate(data, cfg, Norm::Adaptive)
}

/// Fuzzy c-means: the GK iteration with the norm fixed to the identity.
pub fn run_fcm(data: &DataMatrix, cfg: &ClusterConfig) -> Result<ClusteringResult> {
    alternate(data, cfg, Norm::Identity)
}
