use crate::error::{Error, Result};
use crate::linalg::{BandedLu, Csr};
use crate::models::{add_b_u, FrozenSystem, OdeSystem, Provenance, TimeGrid, Trajectory};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One-step IMEX discretizations of x' = A x + f(x) + B u:
///
///     E(k) x^k = G(k) x^{k-1} + dt (w1 f^{k-1} + w2 f^{k-2}) + dt B u(t_k),
///
/// with E(k) = I - c_im dt A and G(k) = I + c_ex dt A. `Order1` treats A
/// implicitly by backward Euler and f by forward Euler. `Order2` combines
/// the trapezoidal rule in A with two-step Adams-Bashforth in f; its first
/// step falls back to the first-order method because no f history exists
/// yet. The coefficient accessors below are the single source of truth:
/// marches, defects, and residuals all read them, so the formulas cannot
/// drift apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImexScheme {
    #[serde(rename = "imex1")]
    Order1,
    #[serde(rename = "imex2")]
    Order2,
}

impl ImexScheme {
    pub fn order(self) -> usize {
        match self {
            ImexScheme::Order1 => 1,
            ImexScheme::Order2 => 2,
        }
    }

    /// c_im in E(k) = I - c_im dt A. Only k = 1 ever differs from the
    /// steady value, so two operator factorizations cover a whole march.
    pub fn implicit_shift(self, k: usize) -> f64 {
        match self {
            ImexScheme::Order1 => 1.0,
            ImexScheme::Order2 => {
                if k == 1 {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }

    /// c_ex in G(k) = I + c_ex dt A applied to the previous state.
    pub fn explicit_a_shift(self, k: usize) -> f64 {
        match self {
            ImexScheme::Order1 => 0.0,
            ImexScheme::Order2 => {
                if k == 1 {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }

    /// Weights (w1, w2) of f(x^{k-1}) and f(x^{k-2}).
    pub fn f_weights(self, k: usize) -> (f64, f64) {
        match self {
            ImexScheme::Order1 => (1.0, 0.0),
            ImexScheme::Order2 => {
                if k == 1 {
                    (1.0, 0.0)
                } else {
                    (1.5, -0.5)
                }
            }
        }
    }

    pub fn provenance(self) -> Provenance {
        match self {
            ImexScheme::Order1 => Provenance::Imex1,
            ImexScheme::Order2 => Provenance::Imex2,
        }
    }
}

impl std::str::FromStr for ImexScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex1" | "1" => Ok(ImexScheme::Order1),
            "imex2" | "2" => Ok(ImexScheme::Order2),
            other => Err(Error::InvalidArgument(format!(
                "unknown time-stepping scheme '{other}', expected imex1 or imex2"
            ))),
        }
    }
}

/// Supplies the additive correction vector added to the right-hand side of
/// step k of a march. Implementors range from stored exact defects to
/// learned surrogates.
pub trait ClosureSource {
    /// Write the correction for step k into `out`; k runs over 1..=steps.
    fn correction(&self, k: usize, out: &mut [f64]) -> Result<()>;
}

/// Corrections stored column-wise: column k - 1 holds the vector for step k,
/// matching the layout of defect matrices.
pub struct StoredCorrections<'a>(pub &'a DMatrix<f64>);

impl ClosureSource for StoredCorrections<'_> {
    fn correction(&self, k: usize, out: &mut [f64]) -> Result<()> {
        if k == 0 || k > self.0.ncols() {
            return Err(Error::InvalidArgument(format!(
                "correction requested for step {k}, stored columns cover 1..={}",
                self.0.ncols()
            )));
        }
        if out.len() != self.0.nrows() {
            return Err(Error::DimensionMismatch {
                context: "stored correction".into(),
                expected: self.0.nrows(),
                got: out.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(self.0.column(k - 1).iter()) {
            *o = *v;
        }
        Ok(())
    }
}

/// Frozen operators of one (system, parameter, grid, scheme) combination:
/// A(p) in sparse form plus one banded LU factorization per distinct
/// implicit shift. Factor once, then march, compute defects, or assemble
/// residuals against the same operators.
pub struct ImexOps<'a> {
    pub frozen: FrozenSystem<'a>,
    pub scheme: ImexScheme,
    pub grid: TimeGrid,
    shifts: Vec<f64>,
    lus: Vec<BandedLu>,
}

impl<'a> ImexOps<'a> {
    pub fn new(
        sys: &'a dyn OdeSystem,
        p: &[f64],
        grid: TimeGrid,
        scheme: ImexScheme,
    ) -> Result<Self> {
        let frozen = FrozenSystem::new(sys, p)?;
        let perm = sys.band_permutation();
        let mut shifts: Vec<f64> = Vec::new();
        // Step 1 and the steady regime are the only distinct cases.
        for k in [1usize, 2] {
            let s = scheme.implicit_shift(k);
            if !shifts.contains(&s) {
                shifts.push(s);
            }
        }
        let mut lus = Vec::with_capacity(shifts.len());
        for &s in &shifts {
            let e = frozen.a.identity_minus_scaled(s * grid.dt)?;
            lus.push(BandedLu::factor(&e, perm.as_deref())?);
        }
        Ok(Self {
            frozen,
            scheme,
            grid,
            shifts,
            lus,
        })
    }

    pub fn dim(&self) -> usize {
        self.frozen.sys.dim()
    }

    fn lu_for_shift(&self, shift: f64) -> &BandedLu {
        let idx = self
            .shifts
            .iter()
            .position(|&s| s == shift)
            .expect("every shift is factored at construction");
        &self.lus[idx]
    }

    /// Solve E(k) x = b.
    pub fn solve_e(&self, k: usize, b: &[f64], x: &mut [f64]) {
        self.lu_for_shift(self.scheme.implicit_shift(k)).solve(b, x);
    }

    /// Solve E(k)^T x = b, as needed by adjoint quantities.
    pub fn solve_e_transpose(&self, k: usize, b: &[f64], x: &mut [f64]) {
        self.lu_for_shift(self.scheme.implicit_shift(k))
            .solve_transpose(b, x);
    }

    /// out = E(k) x without forming the operator.
    pub fn apply_e(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        self.frozen
            .a
            .mul_vec_add(-self.scheme.implicit_shift(k) * self.grid.dt, x, out);
    }

    /// out = G(k) x, the history-side operator applied to x^{k-1}.
    pub fn apply_g(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        let c = self.scheme.explicit_a_shift(k);
        if c != 0.0 {
            self.frozen.a.mul_vec_add(c * self.grid.dt, x, out);
        }
    }

    /// f(x, p) into `out`; zero for linear systems.
    pub fn eval_f(&self, x: &[f64], out: &mut [f64]) {
        if self.frozen.sys.is_linear() {
            out.fill(0.0);
        } else {
            self.frozen.sys.nonlinear(&self.frozen.p, x, out);
        }
    }

    /// Assemble the explicit side of step k,
    ///
    ///     out = G(k) x_prev + dt (w1 f_prev + w2 f_prev2) + dt B u(t_k).
    ///
    /// Marches and defect evaluations share this routine so their floating
    /// point results agree term by term.
    pub fn explicit_side(
        &self,
        k: usize,
        x_prev: &[f64],
        f_prev: Option<&[f64]>,
        f_prev2: Option<&[f64]>,
        u_buf: &mut [f64],
        out: &mut [f64],
    ) {
        let dt = self.grid.dt;
        self.apply_g(k, x_prev, out);
        let (w1, w2) = self.scheme.f_weights(k);
        if w1 != 0.0 {
            if let Some(f) = f_prev {
                let c = dt * w1;
                for (o, fi) in out.iter_mut().zip(f) {
                    *o += c * fi;
                }
            }
        }
        if w2 != 0.0 {
            if let Some(f) = f_prev2 {
                let c = dt * w2;
                for (o, fi) in out.iter_mut().zip(f) {
                    *o += c * fi;
                }
            }
        }
        self.frozen.sys.input_signal(self.grid.point(k), u_buf);
        for u in u_buf.iter_mut() {
            *u *= dt;
        }
        add_b_u(&self.frozen.b, u_buf, out);
    }

    /// March over the grid, optionally adding a correction vector to each
    /// step's right-hand side.
    pub fn march(&self, correction: Option<&dyn ClosureSource>) -> Result<Trajectory> {
        let n = self.dim();
        let grid = self.grid;
        let linear = self.frozen.sys.is_linear();

        let mut x = self.frozen.sys.initial_state(&self.frozen.p)?;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial state".into(),
                expected: n,
                got: x.len(),
            });
        }
        let mut states = DMatrix::zeros(n, grid.n_points());
        for i in 0..n {
            states[(i, 0)] = x[i];
        }

        let mut f_prev = vec![0.0; n];
        let mut f_prev2 = vec![0.0; n];
        if !linear {
            self.frozen.sys.nonlinear(&self.frozen.p, &x, &mut f_prev);
        }
        let mut rhs = vec![0.0; n];
        let mut x_new = vec![0.0; n];
        let mut corr = vec![0.0; n];
        let mut u_buf = vec![0.0; self.frozen.sys.n_inputs()];

        for k in 1..=grid.steps {
            let (fp, fp2) = if linear {
                (None, None)
            } else {
                (Some(f_prev.as_slice()), Some(f_prev2.as_slice()))
            };
            self.explicit_side(k, &x, fp, fp2, &mut u_buf, &mut rhs);
            if let Some(src) = correction {
                src.correction(k, &mut corr)?;
                for (r, c) in rhs.iter_mut().zip(&corr) {
                    *r += c;
                }
            }
            self.solve_e(k, &rhs, &mut x_new);
            if !x_new.iter().all(|v| v.is_finite()) {
                return Err(Error::IntegrationFailure {
                    t_last: grid.point(k - 1),
                    reason: format!("non-finite state after implicit step {k}"),
                });
            }
            for i in 0..n {
                states[(i, k)] = x_new[i];
            }
            std::mem::swap(&mut f_prev2, &mut f_prev);
            if !linear {
                self.frozen
                    .sys
                    .nonlinear(&self.frozen.p, &x_new, &mut f_prev);
            }
            std::mem::swap(&mut x, &mut x_new);
        }

        Ok(Trajectory {
            states,
            grid,
            parameter: self.frozen.p.clone(),
            provenance: self.scheme.provenance(),
        })
    }

    /// The sparse A(p) the operators were built from.
    pub fn a(&self) -> &Csr {
        &self.frozen.a
    }
}

/// One-call march of `sys` at parameter `p` over `grid`.
pub fn solve_imex(
    sys: &dyn OdeSystem,
    p: &[f64],
    grid: TimeGrid,
    scheme: ImexScheme,
    correction: Option<&dyn ClosureSource>,
) -> Result<Trajectory> {
    ImexOps::new(sys, p, grid, scheme)?.march(correction)
}
