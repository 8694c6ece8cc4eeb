//! Feed-forward network surrogate for reduced defect coefficients.
//!
//! The network maps (t, p), jointly normalized to the unit box, to the
//! vector of reduced coefficients. Hidden layers use the SiLU activation,
//! the output layer applies Tanh, and each output coordinate is affinely
//! scaled so the training targets fall in [-1, 1]. Training minimizes
//!
//!     L = 1/2 sum_i sum_k || d(t^k, p_i) - prediction(t^k, p_i) ||^2
//!
//! by full-batch Adam with seeded Glorot-uniform initialization, so a run
//! is reproducible from its configuration alone.

use crate::error::{Error, Result};
use crate::models::{ParamDomain, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Training hyperparameters. Adam moments are fixed at (0.9, 0.999) with
/// epsilon 1e-8; the dataset is small enough that every step is full-batch.
#[derive(Debug, Clone)]
pub struct FnnHyper {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FnnHyper {
    fn default() -> Self {
        Self {
            hidden: vec![16, 64, 64],
            epochs: 2000,
            learning_rate: 0.005,
            seed: 0,
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Trained network with its input/output normalizations frozen in.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FnnModel {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    domain: ParamDomain,
    grid: TimeGrid,
    out_center: DVector<f64>,
    out_half: DVector<f64>,
    pub loss_history: Vec<f64>,
}

impl FnnModel {
    /// Fit the map (t, p) -> coefficients from `values[i]`, the coefficient
    /// matrix observed at `params[i]` over the grid points of `grid`.
    pub fn train(
        params: &[Vec<f64>],
        values: &[DMatrix<f64>],
        domain: &ParamDomain,
        grid: &TimeGrid,
        hyper: &FnnHyper,
    ) -> Result<Self> {
        if params.is_empty() || params.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "training needs matching sample lists, got {} parameters and {} slices",
                params.len(),
                values.len()
            )));
        }
        let n_out = values[0].nrows();
        let n_time = values[0].ncols();
        if n_time != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "coefficient slices have {} columns for a grid of {} points",
                n_time,
                grid.n_points()
            )));
        }
        if hyper.hidden.is_empty() || hyper.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden layer widths must be positive".into(),
            ));
        }
        if !(hyper.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                hyper.learning_rate
            )));
        }

        let p_dim = domain.dim();
        let n_in = 1 + p_dim;
        let m_samples = params.len() * n_time;
        let t_span = grid.t_end() - grid.t0;

        let mut x = DMatrix::zeros(n_in, m_samples);
        let mut y = DMatrix::zeros(n_out, m_samples);
        for (i, (p, v)) in params.iter().zip(values).enumerate() {
            domain.validate(p)?;
            if v.nrows() != n_out || v.ncols() != n_time {
                return Err(Error::DimensionMismatch {
                    context: format!("coefficient slice {i}"),
                    expected: n_out * n_time,
                    got: v.nrows() * v.ncols(),
                });
            }
            let q = domain.normalize(p);
            for k in 0..n_time {
                let c = i * n_time + k;
                x[(0, c)] = (grid.point(k) - grid.t0) / t_span;
                for a in 0..p_dim {
                    x[(1 + a, c)] = q[a];
                }
                for j in 0..n_out {
                    y[(j, c)] = v[(j, k)];
                }
            }
        }

        // Per-coordinate affine map sending the observed range onto [-1, 1];
        // constant coordinates keep a unit half-width so the map stays
        // invertible.
        let mut out_center = DVector::zeros(n_out);
        let mut out_half = DVector::zeros(n_out);
        for j in 0..n_out {
            let row = y.row(j);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let half = 0.5 * (hi - lo);
            if half > 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
                out_center[j] = 0.5 * (hi + lo);
                out_half[j] = half;
            } else {
                out_center[j] = lo;
                out_half[j] = 1.0;
            }
        }

        let mut widths = Vec::with_capacity(hyper.hidden.len() + 2);
        widths.push(n_in);
        widths.extend_from_slice(&hyper.hidden);
        widths.push(n_out);

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-limit..limit));
            weights.push(w);
            biases.push(DVector::zeros(fan_out));
        }

        let mut model = Self {
            weights,
            biases,
            domain: domain.clone(),
            grid: *grid,
            out_center,
            out_half,
            loss_history: Vec::with_capacity(hyper.epochs),
        };

        let mut m_w: Vec<DMatrix<f64>> = model.weights.iter().map(|w| w.map(|_| 0.0)).collect();
        let mut v_w = m_w.clone();
        let mut m_b: Vec<DVector<f64>> = model.biases.iter().map(|b| b.map(|_| 0.0)).collect();
        let mut v_b = m_b.clone();

        for epoch in 1..=hyper.epochs {
            let (loss, grad_w, grad_b) = model.loss_and_gradient(&x, &y);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "loss became non-finite at epoch {epoch}; try a smaller learning rate"
                )));
            }
            model.loss_history.push(loss);

            let bc1 = 1.0 - BETA1.powi(epoch as i32);
            let bc2 = 1.0 - BETA2.powi(epoch as i32);
            for l in 0..model.weights.len() {
                adam_update_matrix(
                    &mut model.weights[l],
                    &grad_w[l],
                    &mut m_w[l],
                    &mut v_w[l],
                    hyper.learning_rate,
                    bc1,
                    bc2,
                );
                adam_update_vector(
                    &mut model.biases[l],
                    &grad_b[l],
                    &mut m_b[l],
                    &mut v_b[l],
                    hyper.learning_rate,
                    bc1,
                    bc2,
                );
            }
        }

        Ok(model)
    }

    pub fn n_outputs(&self) -> usize {
        self.out_center.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Forward pass over a batch of normalized input columns; returns the
    /// pre-activation of every layer plus the de-normalized predictions.
    fn forward(&self, x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>) {
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut act = Vec::with_capacity(layers);
        let mut a = x.clone();
        for l in 0..layers {
            let mut z = &self.weights[l] * &a;
            for mut col in z.column_iter_mut() {
                col += &self.biases[l];
            }
            a = if l + 1 == layers {
                z.map(f64::tanh)
            } else {
                z.map(silu)
            };
            pre.push(z);
            act.push(a.clone());
        }
        let squashed = act.last().unwrap();
        let mut out = squashed.clone();
        for j in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(j, c)] = self.out_center[j] + self.out_half[j] * out[(j, c)];
            }
        }
        (pre, act, out)
    }

    /// Loss 1/2 || prediction - y ||_F^2 and its gradient with respect to
    /// every weight and bias, by reverse accumulation over the full batch.
    fn loss_and_gradient(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> (f64, Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
        let layers = self.weights.len();
        let (pre, act, out) = self.forward(x);
        let diff = &out - y;
        let loss = 0.5 * diff.norm_squared();

        let mut grad_w = vec![DMatrix::zeros(0, 0); layers];
        let mut grad_b = vec![DVector::zeros(0); layers];

        // Output layer: d loss / d z = diff * half * (1 - tanh^2).
        let squashed = act.last().unwrap();
        let mut delta = diff;
        for j in 0..delta.nrows() {
            for c in 0..delta.ncols() {
                let t = squashed[(j, c)];
                delta[(j, c)] *= self.out_half[j] * (1.0 - t * t);
            }
        }

        for l in (0..layers).rev() {
            let input = if l == 0 { x } else { &act[l - 1] };
            grad_w[l] = &delta * input.transpose();
            grad_b[l] = delta.column_sum();
            if l > 0 {
                let mut next = self.weights[l].tr_mul(&delta);
                for j in 0..next.nrows() {
                    for c in 0..next.ncols() {
                        next[(j, c)] *= silu_derivative(pre[l - 1][(j, c)]);
                    }
                }
                delta = next;
            }
        }

        (loss, grad_w, grad_b)
    }

    fn normalized_input(&self, t: f64, p: &[f64]) -> Result<DMatrix<f64>> {
        if p.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "network parameter input".into(),
                expected: self.domain.dim(),
                got: p.len(),
            });
        }
        let q = self.domain.normalize(p);
        let mut x = DMatrix::zeros(1 + q.len(), 1);
        x[(0, 0)] = (t - self.grid.t0) / (self.grid.t_end() - self.grid.t0);
        for (a, qa) in q.iter().enumerate() {
            x[(1 + a, 0)] = *qa;
        }
        Ok(x)
    }

    /// Predicted coefficients at an arbitrary time; deterministic.
    pub fn eval_at(&self, t: f64, p: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch {
                context: "network output".into(),
                expected: self.n_outputs(),
                got: out.len(),
            });
        }
        let x = self.normalized_input(t, p)?;
        let (_, _, pred) = self.forward(&x);
        for (o, v) in out.iter_mut().zip(pred.column(0).iter()) {
            *o = *v;
        }
        Ok(())
    }

    /// Predicted coefficients at grid index k.
    pub fn eval_at_step(&self, k: usize, p: &[f64], out: &mut [f64]) -> Result<()> {
        if k >= self.grid.n_points() {
            return Err(Error::InvalidArgument(format!(
                "grid index {k} outside 0..{}",
                self.grid.n_points()
            )));
        }
        self.eval_at(self.grid.point(k), p, out)
    }

    /// All grid points at once: an n_outputs x N_t prediction matrix.
    pub fn eval_param(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        if p.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "network parameter input".into(),
                expected: self.domain.dim(),
                got: p.len(),
            });
        }
        let q = self.domain.normalize(p);
        let n_time = self.grid.n_points();
        let t_span = self.grid.t_end() - self.grid.t0;
        let mut x = DMatrix::zeros(1 + q.len(), n_time);
        for k in 0..n_time {
            x[(0, k)] = (self.grid.point(k) - self.grid.t0) / t_span;
            for (a, qa) in q.iter().enumerate() {
                x[(1 + a, k)] = *qa;
            }
        }
        let (_, _, pred) = self.forward(&x);
        Ok(pred)
    }
}

fn adam_update_matrix(
    w: &mut DMatrix<f64>,
    g: &DMatrix<f64>,
    m: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let gij = g[(i, j)];
            m[(i, j)] = BETA1 * m[(i, j)] + (1.0 - BETA1) * gij;
            v[(i, j)] = BETA2 * v[(i, j)] + (1.0 - BETA2) * gij * gij;
            let mhat = m[(i, j)] / bc1;
            let vhat = v[(i, j)] / bc2;
            w[(i, j)] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
}

fn adam_update_vector(
    b: &mut DVector<f64>,
    g: &DVector<f64>,
    m: &mut DVector<f64>,
    v: &mut DVector<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..b.len() {
        let gi = g[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        b[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
}
