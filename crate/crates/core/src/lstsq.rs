//! Minimum-norm linear least squares through a complete orthogonal
//! decomposition: Householder QR with column pivoting, followed by a second
//! orthogonal reduction of the trailing block when the matrix is rank
//! deficient.

use nalgebra::{DMatrix, DVector};

use crate::error::{FuzzyError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    pub rank: usize,
}

/// A Householder reflector `I - beta v v^T` acting on rows `offset..`.
struct Reflector {
    offset: usize,
    v: DVector<f64>,
    beta: f64,
}

impl Reflector {
    /// Reflector mapping `x` onto `alpha e_1`; `None` when `x` is zero.
    fn new(x: DVector<f64>, offset: usize) -> Option<(Self, f64)> {
        let norm = x.norm();
        if norm == 0.0 {
            return None;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vv = v.norm_squared();
        if vv == 0.0 {
            return None;
        }
        Some((
            Self {
                offset,
                v,
                beta: 2.0 / vv,
            },
            alpha,
        ))
    }

    fn apply_to_columns(&self, m: &mut DMatrix<f64>, from_col: usize) {
        let rows = self.v.len();
        for j in from_col..m.ncols() {
            let mut col = m.view_mut((self.offset, j), (rows, 1));
            let mut col = col.column_mut(0);
            let s = self.beta * self.v.dot(&col);
            col.axpy(-s, &self.v, 1.0);
        }
    }

    fn apply_to_vector(&self, x: &mut DVector<f64>) {
        let rows = self.v.len();
        let mut seg = x.rows_mut(self.offset, rows);
        let s = self.beta * self.v.dot(&seg);
        seg.axpy(-s, &self.v, 1.0);
    }
}

/// Solves `min |a x - b|` and returns the solution of smallest norm.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares> {
    let (m, p) = a.shape();
    if b.len() != m {
        return Err(FuzzyError::DimensionMismatch {
            expected: m,
            actual: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(FuzzyError::NonFinite {
            context: "least-squares system".into(),
        });
    }
    if a.iter().all(|&v| v == 0.0) {
        return Err(FuzzyError::ZeroRegressors);
    }

    let mut r = a.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let steps = m.min(p);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        let (pivot, _) = (k..p)
            .map(|j| (j, r.view((k, j), (m - k, 1)).norm_squared()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot != k {
            r.swap_columns(k, pivot);
            perm.swap(k, pivot);
        }
        let x = r.view((k, k), (m - k, 1)).column(0).into_owned();
        match Reflector::new(x, k) {
            Some((h, alpha)) => {
                h.apply_to_columns(&mut r, k + 1);
                h.apply_to_vector(&mut qtb);
                r[(k, k)] = alpha;
                for i in k + 1..m {
                    r[(i, k)] = 0.0;
                }
                diag.push(alpha.abs());
            }
            None => break,
        }
    }

    let tol = diag.first().copied().unwrap_or(0.0) * f64::EPSILON * m.max(p) as f64;
    let rank = diag.iter().take_while(|&&d| d > tol).count();
    if rank == 0 {
        return Err(FuzzyError::ZeroRegressors);
    }

    let c = qtb.rows(0, rank).into_owned();
    let y = if rank == p {
        back_substitute(&r.view((0, 0), (rank, rank)).into_owned(), &c)
    } else {
        minimum_norm_trapezoid(&r.view((0, 0), (rank, p)).into_owned(), &c)
    };

    let mut solution = DVector::zeros(p);
    for (i, &col) in perm.iter().enumerate() {
        solution[col] = y[i];
    }
    let residual = b - a * &solution;
    let residual_norm = residual.norm();
    Ok(LeastSquares {
        solution,
        residual,
        residual_norm,
        rank,
    })
}

/// Solves `t x = c` for upper-triangular `t`.
fn back_substitute(t: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let n = c.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| t[(i, j)] * x[j]).sum();
        x[i] = (c[i] - s) / t[(i, i)];
    }
    x
}

/// Minimum-norm solution of the full-row-rank trapezoidal system
/// `[R11 R12] y = c`. With `[R11 R12]^T = Z T` the solution is
/// `Z [T^-T c; 0]`.
fn minimum_norm_trapezoid(upper: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let (rank, p) = upper.shape();
    let mut w = upper.transpose();
    let mut reflectors = Vec::with_capacity(rank);
    for k in 0..rank {
        let x = w.view((k, k), (p - k, 1)).column(0).into_owned();
        if let Some((h, alpha)) = Reflector::new(x, k) {
            h.apply_to_columns(&mut w, k + 1);
            w[(k, k)] = alpha;
            for i in k + 1..p {
                w[(i, k)] = 0.0;
            }
            reflectors.push(h);
        }
    }
    // forward substitution with T^T (lower triangular)
    let mut z = DVector::zeros(p);
    for i in 0..rank {
        let s: f64 = (0..i).map(|j| w[(j, i)] * z[j]).sum();
        z[i] = (c[i] - s) / w[(i, i)];
    }
    for h in reflectors.iter().rev() {
        h.apply_to_vector(&mut z);
    }
    z
}
