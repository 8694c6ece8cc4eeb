//! Parametric semi-discrete ODE systems
//!
//!     x'(t) = A(p) x(t) + f(x(t), p) + B(p) u(t),    y = C x,
//!
//! together with the time grid and trajectory containers shared by the
//! solvers. Three finite-difference benchmark models are built in: a 1-D
//! heat equation, the viscous Burgers' equation, and the FitzHugh-Nagumo
//! reaction-diffusion pair.

mod burgers;
mod fhn;
mod heat;

pub use burgers::Burgers;
pub use fhn::FitzHughNagumo;
pub use heat::Heat;

use crate::error::{Error, Result};
use crate::linalg::{Csr, Dia};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// How a parameter axis is scaled when normalized for interpolation or
/// network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
}

/// Box-shaped admissible parameter domain with per-axis scale tags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub scales: Vec<AxisScale>,
}

impl ParamDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, scales: Vec<AxisScale>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert_eq!(lo.len(), scales.len());
        Self { lo, hi, scales }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    pub fn validate(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                value: p.to_vec(),
                domain: format!("{:?} x {:?}", self.lo, self.hi),
            })
        }
    }

    /// Map a parameter onto [0,1]^d, taking logarithms first on log axes.
    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                match self.scales[i] {
                    AxisScale::Linear => (v - lo) / (hi - lo),
                    AxisScale::Log => (v.ln() - lo.ln()) / (hi.ln() - lo.ln()),
                }
            })
            .collect()
    }
}

/// Uniform time grid t_k = t0 + k * dt for k = 0..=steps; the grid carries
/// steps = K intervals and K + 1 points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs dt > 0 and steps > 0, got dt = {dt}, steps = {steps}"
            )));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid covering [t0, t_end] with step dt; t_end must be an (almost)
    /// integer multiple of dt away from t0.
    pub fn from_span(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        let raw = (t_end - t0) / dt;
        let steps = raw.round() as i64;
        if steps <= 0 || (raw - steps as f64).abs() > 1e-8 * raw.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "span [{t0}, {t_end}] is not an integer number of steps of {dt}"
            )));
        }
        Self::new(t0, dt, steps as usize)
    }

    pub fn n_points(&self) -> usize {
        self.steps + 1
    }

    pub fn point(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.point(self.steps)
    }
}

/// Which computational route produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Blackbox,
    Imex1,
    Imex2,
    Crom,
}

/// States sampled on a uniform grid; column k is the state at t_k.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: DMatrix<f64>,
    pub grid: TimeGrid,
    pub parameter: Vec<f64>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.states.ncols() != self.grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} columns for a grid of {} points",
                self.states.ncols(),
                self.grid.n_points()
            )));
        }
        if self.states.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                t_last: self.grid.t_end(),
                reason: "non-finite state entries".into(),
            });
        }
        Ok(())
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.states.column(k).iter().copied().collect()
    }

    /// Outputs y_k = C x_k for all grid points, one column per step.
    pub fn outputs(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        c * &self.states
    }
}

/// A semi-discrete parametric system. All operators may depend on the
/// parameter; the sparsity pattern of A(p) must not.
pub trait OdeSystem: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn param_domain(&self) -> &ParamDomain;

    fn a_matrix(&self, p: &[f64]) -> Result<Csr>;
    fn input_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>>;
    fn output_matrix(&self) -> DMatrix<f64>;
    fn initial_state(&self, p: &[f64]) -> Result<Vec<f64>>;
    fn input_signal(&self, t: f64, u: &mut [f64]);

    fn is_linear(&self) -> bool;
    /// f(x, p), written into `out`.
    fn nonlinear(&self, p: &[f64], x: &[f64], out: &mut [f64]);
    /// State indices that f_row depends on (empty when the row is zero).
    fn nonlinear_stencil(&self, row: usize) -> Vec<usize>;
    /// Evaluate selected rows of f given access to the needed state entries.
    fn nonlinear_rows(&self, p: &[f64], rows: &[usize], x: &dyn Fn(usize) -> f64, out: &mut [f64]);

    /// Symmetric reordering that narrows the band of A(p), if one exists.
    fn band_permutation(&self) -> Option<Vec<usize>> {
        None
    }
}

/// Operators of one system frozen at a concrete parameter value, as used by
/// the time steppers. Assembling once per solve keeps A(p) out of hot loops.
pub struct FrozenSystem<'a> {
    pub sys: &'a dyn OdeSystem,
    pub p: Vec<f64>,
    pub a: Csr,
    pub b: DMatrix<f64>,
    /// Diagonal repack of `a` when its pattern permits, used by the
    /// right-hand-side evaluation that dominates adaptive solves.
    a_dia: Option<Dia>,
}

impl<'a> FrozenSystem<'a> {
    pub fn new(sys: &'a dyn OdeSystem, p: &[f64]) -> Result<Self> {
        sys.param_domain().validate(p)?;
        let a = sys.a_matrix(p)?;
        let a_dia = Dia::try_from_csr(&a, 8);
        Ok(Self {
            sys,
            p: p.to_vec(),
            a,
            b: sys.input_matrix(p)?,
            a_dia,
        })
    }

    /// out = A x + f(x, p) + B u(t)
    pub fn rhs(&self, t: f64, x: &[f64], u_buf: &mut [f64], out: &mut [f64]) {
        if self.sys.is_linear() {
            match &self.a_dia {
                Some(dia) => dia.mul_vec(x, out),
                None => self.a.mul_vec(x, out),
            }
        } else {
            self.sys.nonlinear(&self.p, x, out);
            match &self.a_dia {
                Some(dia) => dia.mul_vec_add(1.0, x, out),
                None => self.a.mul_vec_add(1.0, x, out),
            }
        }
        self.sys.input_signal(t, u_buf);
        add_b_u(&self.b, u_buf, out);
    }
}

pub(crate) fn add_b_u(b: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    for (c, &uc) in u.iter().enumerate() {
        if uc != 0.0 {
            for r in 0..b.nrows() {
                out[r] += b[(r, c)] * uc;
            }
        }
    }
}

/// Identifier for the built-in benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Heat,
    Burgers,
    Fhn,
}

impl std::str::FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(ModelId::Heat),
            "burgers" => Ok(ModelId::Burgers),
            "fhn" => Ok(ModelId::Fhn),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

/// Build one of the benchmark systems at the given resolution.
pub fn build(model: ModelId, n_cells: usize) -> Result<Box<dyn OdeSystem>> {
    Ok(match model {
        ModelId::Heat => Box::new(Heat::new(n_cells)?),
        ModelId::Burgers => Box::new(Burgers::new(n_cells)?),
        ModelId::Fhn => Box::new(FitzHughNagumo::new(n_cells)?),
    })
}

/// Build one of the benchmark systems at the given resolution and check that
/// the parameter lies inside the model's admissible domain.
pub fn assemble(model: ModelId, p: &[f64], n_cells: usize) -> Result<Box<dyn OdeSystem>> {
    let sys = build(model, n_cells)?;
    sys.param_domain().validate(p)?;
    Ok(sys)
}

/// One-shot right-hand-side evaluation A(p) x + f(x, p) + B(p) u(t).
pub fn evaluate_rhs(sys: &dyn OdeSystem, p: &[f64], t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "evaluate_rhs state".into(),
            expected: sys.dim(),
            got: x.len(),
        });
    }
    let frozen = FrozenSystem::new(sys, p)?;
    let mut out = vec![0.0; sys.dim()];
    let mut u = vec![0.0; sys.n_inputs()];
    frozen.rhs(t, x, &mut u, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn grid_points_are_exact_multiples() {
        let g = TimeGrid::from_span(0.0, 2.0, 0.01).unwrap();
        assert_eq!(g.steps, 200);
        assert_eq!(g.n_points(), 201);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(200), 0.0 + 200.0 * 0.01);
        assert!(TimeGrid::from_span(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn domain_validation_and_normalization() {
        let d = ParamDomain::new(
            vec![0.005, 1.0],
            vec![1.0, 10.0],
            vec![AxisScale::Log, AxisScale::Linear],
        );
        assert!(d.contains(&[0.5, 5.0]));
        assert!(!d.contains(&[0.001, 5.0]));
        assert!(d.validate(&[2.0, 5.0]).is_err());
        let n = d.normalize(&[0.005, 1.0]);
        assert!(n[0].abs() < 1e-14 && n[1].abs() < 1e-14);
        let n = d.normalize(&[1.0, 10.0]);
        assert!((n[0] - 1.0).abs() < 1e-14 && (n[1] - 1.0).abs() < 1e-14);
        // Log axis: geometric midpoint maps to 1/2.
        let mid = (0.005f64 * 1.0).sqrt();
        let n = d.normalize(&[mid, 5.5]);
        assert!((n[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn assemble_rejects_out_of_domain_parameters() {
        assert!(assemble(ModelId::Heat, &[0.5], 64).is_err());
        assert!(assemble(ModelId::Burgers, &[0.0001], 64).is_err());
        assert!(assemble(ModelId::Fhn, &[0.02, 0.5], 64).is_err());
    }

    #[test]
    fn sparsity_pattern_is_parameter_independent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for model in [ModelId::Heat, ModelId::Burgers, ModelId::Fhn] {
            let sys = match model {
                ModelId::Heat => assemble(model, &[0.06], 64).unwrap(),
                ModelId::Burgers => assemble(model, &[0.5], 64).unwrap(),
                ModelId::Fhn => assemble(model, &[0.02, 0.05], 64).unwrap(),
            };
            let dom = sys.param_domain();
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..dom.dim())
                    .map(|i| rng.gen_range(dom.lo[i]..dom.hi[i]))
                    .collect()
            };
            let reference = sys.a_matrix(&draw(&mut rng)).unwrap();
            for _ in 0..9 {
                let a = sys.a_matrix(&draw(&mut rng)).unwrap();
                assert!(a.same_pattern(&reference), "pattern drifted for {model:?}");
            }
        }
    }

    #[test]
    fn rhs_dimension_mismatch_is_reported() {
        let sys = assemble(ModelId::Heat, &[0.06], 32).unwrap();
        assert!(evaluate_rhs(sys.as_ref(), &[0.06], 0.0, &[1.0, 2.0]).is_err());
    }
}
