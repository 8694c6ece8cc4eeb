use super::{AxisScale, OdeSystem, ParamDomain};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use nalgebra::DMatrix;

/// FitzHugh-Nagumo reaction-diffusion pair on (0, 1),
///
///     eps dv1/dt = eps^2 d^2 v1/dz^2 + g(v1) - v2 + c,
///         dv2/dt = b v1 - gamma v2 + c,
///
/// with g(v) = v (v - 0.1) (1 - v), Neumann conditions
/// dv1/dz(0) = -I_ext(t), dv1/dz(1) = 0, stimulus I_ext(t) = 5e4 t^3 e^(-15 t),
/// and v1 = v2 = 0.001 initially. Both equations are divided by nothing but
/// (51a) by eps, so the assembled operators carry the 1/eps factors:
/// A(p) holds eps * Laplacian and the -1/eps coupling, f(x, p) the cubic
/// g(v1)/eps, and B(p) the Neumann stimulus column (2 eps / dz at the left
/// node) plus a constant-source column feeding c/eps and c.
///
/// The state stacks the m per-variable nodes as [v1; v2], N = 2 m, with
/// nodes z_i = i * dz, dz = 1 / (m - 1). Outputs are v1 and v2 at the node
/// next to the left boundary. Fixed constants b = 0.5, gamma = 2; free
/// parameters p = (eps, c) in [0.01, 0.04] x [0.025, 0.075], linear axes.
pub struct FitzHughNagumo {
    m: usize,
    dz: f64,
    domain: ParamDomain,
}

const B_COEFF: f64 = 0.5;
const GAMMA: f64 = 2.0;

impl FitzHughNagumo {
    pub fn new(nodes_per_variable: usize) -> Result<Self> {
        if nodes_per_variable < 4 {
            return Err(Error::InvalidArgument(
                "fhn model needs at least 4 nodes per variable".into(),
            ));
        }
        Ok(Self {
            m: nodes_per_variable,
            dz: 1.0 / (nodes_per_variable as f64 - 1.0),
            domain: ParamDomain::new(
                vec![0.01, 0.025],
                vec![0.04, 0.075],
                vec![AxisScale::Linear, AxisScale::Linear],
            ),
        })
    }

    pub fn nodes_per_variable(&self) -> usize {
        self.m
    }

    #[inline]
    fn cubic(v: f64) -> f64 {
        v * (v - 0.1) * (1.0 - v)
    }
}

impl OdeSystem for FitzHughNagumo {
    fn name(&self) -> &'static str {
        "fhn"
    }

    fn dim(&self) -> usize {
        2 * self.m
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn n_outputs(&self) -> usize {
        2
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn a_matrix(&self, p: &[f64]) -> Result<Csr> {
        self.domain.validate(p)?;
        let eps = p[0];
        let m = self.m;
        let w = eps / (self.dz * self.dz);
        let mut t = Vec::with_capacity(6 * m);
        for i in 0..m {
            // eps * Laplacian with symmetric ghost elimination at both ends.
            if i == 0 {
                t.push((0, 0, -2.0 * w));
                t.push((0, 1, 2.0 * w));
            } else if i + 1 == m {
                t.push((i, i - 1, 2.0 * w));
                t.push((i, i, -2.0 * w));
            } else {
                t.push((i, i - 1, w));
                t.push((i, i, -2.0 * w));
                t.push((i, i + 1, w));
            }
            t.push((i, m + i, -1.0 / eps));
            t.push((m + i, i, B_COEFF));
            t.push((m + i, m + i, -GAMMA));
        }
        Csr::from_triplets(2 * m, 2 * m, &t)
    }

    fn input_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.validate(p)?;
        let (eps, c) = (p[0], p[1]);
        let mut b = DMatrix::zeros(2 * self.m, 2);
        b[(0, 0)] = 2.0 * eps / self.dz;
        for i in 0..self.m {
            b[(i, 1)] = c / eps;
            b[(self.m + i, 1)] = c;
        }
        Ok(b)
    }

    fn output_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(2, 2 * self.m);
        c[(0, 1)] = 1.0;
        c[(1, self.m + 1)] = 1.0;
        c
    }

    fn initial_state(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.domain.validate(p)?;
        Ok(vec![0.001; 2 * self.m])
    }

    fn input_signal(&self, t: f64, u: &mut [f64]) {
        u[0] = 50000.0 * t * t * t * (-15.0 * t).exp();
        u[1] = 1.0;
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn nonlinear(&self, p: &[f64], x: &[f64], out: &mut [f64]) {
        let inv_eps = 1.0 / p[0];
        for i in 0..self.m {
            out[i] = Self::cubic(x[i]) * inv_eps;
        }
        out[self.m..2 * self.m].fill(0.0);
    }

    fn nonlinear_stencil(&self, row: usize) -> Vec<usize> {
        if row < self.m {
            vec![row]
        } else {
            Vec::new()
        }
    }

    fn nonlinear_rows(&self, p: &[f64], rows: &[usize], x: &dyn Fn(usize) -> f64, out: &mut [f64]) {
        let inv_eps = 1.0 / p[0];
        for (k, &r) in rows.iter().enumerate() {
            out[k] = if r < self.m {
                Self::cubic(x(r)) * inv_eps
            } else {
                0.0
            };
        }
    }

    fn band_permutation(&self) -> Option<Vec<usize>> {
        // Interleave (v1_i, v2_i) pairs: bandwidth drops from m to 2.
        let mut perm = Vec::with_capacity(2 * self.m);
        for i in 0..self.m {
            perm.push(i);
            perm.push(self.m + i);
        }
        Some(perm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::evaluate_rhs;

    #[test]
    fn rhs_at_constant_state_matches_scalar_formula() {
        // For a spatially constant state the Laplacian rows vanish (the
        // symmetric ghost elimination is exact for constants) and at t = 0
        // the stimulus is zero, so each v1 row must equal
        // (g(v) - w + c)/eps and each v2 row b*v - gamma*w + c.
        let sys = FitzHughNagumo::new(24).unwrap();
        let (eps, c) = (0.015, 0.05);
        let v = 0.001;
        let x = vec![v; sys.dim()];
        let rhs = evaluate_rhs(&sys, &[eps, c], 0.0, &x).unwrap();
        let g = v * (v - 0.1) * (1.0 - v);
        let expect_v1 = (g - v + c) / eps;
        let expect_v2 = B_COEFF * v - GAMMA * v + c;
        for i in 0..24 {
            assert!(
                (rhs[i] - expect_v1).abs() < 1e-12 * expect_v1.abs(),
                "v1 row {i}: {} vs {expect_v1}",
                rhs[i]
            );
            assert!(
                (rhs[24 + i] - expect_v2).abs() < 1e-14,
                "v2 row {i}: {} vs {expect_v2}",
                rhs[24 + i]
            );
        }
    }

    #[test]
    fn stimulus_enters_only_the_left_v1_node() {
        let sys = FitzHughNagumo::new(16).unwrap();
        let (eps, c) = (0.02, 0.05);
        let t = 0.2;
        let x = vec![0.0; sys.dim()];
        let rhs = evaluate_rhs(&sys, &[eps, c], t, &x).unwrap();
        let i_ext = 50000.0 * t * t * t * (-15.0 * t).exp();
        let expect_row0 = c / eps + 2.0 * eps / sys.dz * i_ext;
        assert!((rhs[0] - expect_row0).abs() < 1e-10 * expect_row0.abs());
        // Any other v1 row only sees the constant source.
        assert!((rhs[5] - c / eps).abs() < 1e-12 * (c / eps));
    }

    #[test]
    fn stimulus_peaks_then_decays() {
        let sys = FitzHughNagumo::new(8).unwrap();
        let mut u = [0.0; 2];
        sys.input_signal(0.0, &mut u);
        assert_eq!(u[0], 0.0);
        assert_eq!(u[1], 1.0);
        // d/dt of t^3 e^(-15 t) vanishes at t = 0.2.
        sys.input_signal(0.2, &mut u);
        let peak = u[0];
        sys.input_signal(0.19, &mut u);
        assert!(u[0] < peak);
        sys.input_signal(0.21, &mut u);
        assert!(u[0] < peak);
        sys.input_signal(2.0, &mut u);
        assert!(u[0] < 1e-8 * peak);
    }

    #[test]
    fn dz_spans_the_unit_interval() {
        let sys = FitzHughNagumo::new(512).unwrap();
        assert!((sys.dz * 511.0 - 1.0).abs() < 1e-15);
    }
}
