//! Radial basis function interpolation of reduced defect coefficients over
//! the parameter domain.
//!
//! Every scalar coefficient j at every time index k is interpolated
//! separately as a function of the parameter alone. The kernel is the
//! polyharmonic cubic Phi(r) = r^3 augmented with a linear polynomial tail,
//! which is shape-parameter free and reproduces affine functions exactly.
//! All coefficients share the same saddle-point matrix over the centers, so
//! one factorization is solved against n_d * N_t right-hand sides at once.
//! Parameters are mapped to the unit box (logarithmically on log-tagged
//! axes) before any distance is taken, keeping axes with different ranges
//! commensurable.

use crate::error::{Error, Result};
use crate::models::ParamDomain;
use nalgebra::{DMatrix, DVector};

/// Condition-estimate ceiling past which fitting refuses the kernel system.
const CONDITION_LIMIT: f64 = 1e12;
/// Normalized distance under which two centers count as duplicates.
const DUPLICATE_TOL: f64 = 1e-10;

fn kernel(r: f64) -> f64 {
    r * r * r
}

/// Polyharmonic-cubic interpolant of an n_outputs x n_time coefficient
/// array over scattered parameter samples.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RbfInterpolant {
    /// Normalized centers, one row per sample.
    centers: DMatrix<f64>,
    /// Kernel and tail weights, column (k * n_outputs + j) holding the
    /// coefficients of output j at time index k.
    weights: DMatrix<f64>,
    n_outputs: usize,
    n_time: usize,
    domain: ParamDomain,
    hull_lo: Vec<f64>,
    hull_hi: Vec<f64>,
    /// Diagonal-ratio condition estimate of the factorized saddle system.
    pub condition_estimate: f64,
}

impl RbfInterpolant {
    /// Fit one interpolant per (output, time index) from `values[i]`, the
    /// coefficient matrix observed at `params[i]`. Requires at least
    /// p + 2 distinct samples for the linear tail to be determined.
    pub fn fit(
        params: &[Vec<f64>],
        values: &[DMatrix<f64>],
        domain: &ParamDomain,
    ) -> Result<Self> {
        let d_s = params.len();
        let p_dim = domain.dim();
        if d_s != values.len() {
            return Err(Error::DimensionMismatch {
                context: "interpolation samples".into(),
                expected: d_s,
                got: values.len(),
            });
        }
        if d_s < p_dim + 2 {
            return Err(Error::InvalidArgument(format!(
                "polyharmonic fit needs at least {} samples for a {p_dim}-dimensional \
                 parameter, got {d_s}",
                p_dim + 2
            )));
        }
        let n_outputs = values[0].nrows();
        let n_time = values[0].ncols();
        for (i, v) in values.iter().enumerate() {
            if v.nrows() != n_outputs || v.ncols() != n_time {
                return Err(Error::DimensionMismatch {
                    context: format!("coefficient slice {i}"),
                    expected: n_outputs * n_time,
                    got: v.nrows() * v.ncols(),
                });
            }
        }

        let mut centers = DMatrix::zeros(d_s, p_dim);
        for (i, p) in params.iter().enumerate() {
            domain.validate(p)?;
            let q = domain.normalize(p);
            for (a, qa) in q.iter().enumerate() {
                centers[(i, a)] = *qa;
            }
        }
        for i in 0..d_s {
            for j in (i + 1)..d_s {
                let dist = center_distance(&centers, i, j);
                if dist < DUPLICATE_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "parameter samples {i} and {j} coincide after normalization; \
                         duplicate centers make the kernel system singular"
                    )));
                }
            }
        }

        let m = d_s + p_dim + 1;
        let mut system = DMatrix::zeros(m, m);
        for i in 0..d_s {
            for j in 0..d_s {
                system[(i, j)] = kernel(center_distance(&centers, i, j));
            }
            system[(i, d_s)] = 1.0;
            system[(d_s, i)] = 1.0;
            for a in 0..p_dim {
                system[(i, d_s + 1 + a)] = centers[(i, a)];
                system[(d_s + 1 + a, i)] = centers[(i, a)];
            }
        }

        let mut rhs = DMatrix::zeros(m, n_outputs * n_time);
        for (i, v) in values.iter().enumerate() {
            for k in 0..n_time {
                for j in 0..n_outputs {
                    rhs[(i, k * n_outputs + j)] = v[(j, k)];
                }
            }
        }

        let qr = system.col_piv_qr();
        let r = qr.r();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..m {
            let d = r[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin == 0.0 {
            return Err(Error::SingularMatrix(
                "kernel saddle system is exactly singular".into(),
            ));
        }
        let condition_estimate = dmax / dmin;
        if condition_estimate > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                cond: condition_estimate,
                limit: CONDITION_LIMIT,
            });
        }
        let weights = qr.solve(&rhs).ok_or_else(|| {
            Error::SingularMatrix("kernel saddle system could not be solved".into())
        })?;

        let mut hull_lo = vec![f64::INFINITY; p_dim];
        let mut hull_hi = vec![f64::NEG_INFINITY; p_dim];
        for i in 0..d_s {
            for a in 0..p_dim {
                hull_lo[a] = hull_lo[a].min(centers[(i, a)]);
                hull_hi[a] = hull_hi[a].max(centers[(i, a)]);
            }
        }

        Ok(Self {
            centers,
            weights,
            n_outputs,
            n_time,
            domain: domain.clone(),
            hull_lo,
            hull_hi,
            condition_estimate,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// True when `p` falls outside the per-axis bounding box of the training
    /// centers; evaluation still returns finite values there, but they are
    /// extrapolations.
    pub fn extrapolates(&self, p: &[f64]) -> bool {
        let q = self.domain.normalize(p);
        q.iter().enumerate().any(|(a, &v)| {
            v < self.hull_lo[a] - 1e-12 || v > self.hull_hi[a] + 1e-12
        })
    }

    fn feature_vector(&self, p: &[f64]) -> Result<DVector<f64>> {
        if p.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "interpolation parameter".into(),
                expected: self.domain.dim(),
                got: p.len(),
            });
        }
        let q = self.domain.normalize(p);
        let d_s = self.centers.nrows();
        let p_dim = self.domain.dim();
        let mut phi = DVector::zeros(d_s + p_dim + 1);
        for i in 0..d_s {
            let mut dist_sq = 0.0;
            for a in 0..p_dim {
                let diff = q[a] - self.centers[(i, a)];
                dist_sq += diff * diff;
            }
            phi[i] = kernel(dist_sq.sqrt());
        }
        phi[d_s] = 1.0;
        for a in 0..p_dim {
            phi[d_s + 1 + a] = q[a];
        }
        Ok(phi)
    }

    /// All coefficients at one parameter: an n_outputs x n_time matrix with
    /// the extrapolation flag for `p`.
    pub fn eval_param(&self, p: &[f64]) -> Result<(DMatrix<f64>, bool)> {
        let phi = self.feature_vector(p)?;
        let flat = self.weights.tr_mul(&phi);
        let values = DMatrix::from_vec(self.n_outputs, self.n_time, flat.as_slice().to_vec());
        Ok((values, self.extrapolates(p)))
    }

    /// Coefficients of a single time index; returns the extrapolation flag.
    pub fn eval_into(&self, k: usize, p: &[f64], out: &mut [f64]) -> Result<bool> {
        if k >= self.n_time {
            return Err(Error::InvalidArgument(format!(
                "time index {k} outside the fitted range 0..{}",
                self.n_time
            )));
        }
        if out.len() != self.n_outputs {
            return Err(Error::DimensionMismatch {
                context: "interpolant output".into(),
                expected: self.n_outputs,
                got: out.len(),
            });
        }
        let phi = self.feature_vector(p)?;
        let cols = self.weights.columns(k * self.n_outputs, self.n_outputs);
        for (j, o) in out.iter_mut().enumerate() {
            *o = cols.column(j).dot(&phi);
        }
        Ok(self.extrapolates(p))
    }
}

fn center_distance(centers: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for a in 0..centers.ncols() {
        let diff = centers[(i, a)] - centers[(j, a)];
        acc += diff * diff;
    }
    acc.sqrt()
}
