use super::{AxisScale, OdeSystem, ParamDomain};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use nalgebra::DMatrix;

/// 1-D heat equation on (0, 1) with homogeneous Dirichlet ends,
///
///     dx/dt = mu * d^2 x / dz^2,
///
/// discretized by the central second difference on n_cells uniform cells.
/// The boundary rows are eliminated, leaving N = n_cells - 1 interior
/// unknowns at z_i = i * dz, dz = 1 / n_cells. The initial state is the
/// Gaussian density with mean 0.5 and standard deviation 0.15; the output is
/// the state at the interior node adjacent to the right boundary. The
/// diffusivity domain is mu in [0.01, 0.1] (linear axis).
pub struct Heat {
    n: usize,
    dz: f64,
    domain: ParamDomain,
}

impl Heat {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 3 {
            return Err(Error::InvalidArgument(
                "heat model needs at least 3 cells".into(),
            ));
        }
        Ok(Self {
            n: n_cells - 1,
            dz: 1.0 / n_cells as f64,
            domain: ParamDomain::new(vec![0.01], vec![0.1], vec![AxisScale::Linear]),
        })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }
}

impl OdeSystem for Heat {
    fn name(&self) -> &'static str {
        "heat"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn n_inputs(&self) -> usize {
        1
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn a_matrix(&self, p: &[f64]) -> Result<Csr> {
        self.domain.validate(p)?;
        let mu = p[0];
        let w = mu / (self.dz * self.dz);
        let mut t = Vec::with_capacity(3 * self.n);
        for i in 0..self.n {
            t.push((i, i, -2.0 * w));
            if i > 0 {
                t.push((i, i - 1, w));
            }
            if i + 1 < self.n {
                t.push((i, i + 1, w));
            }
        }
        Csr::from_triplets(self.n, self.n, &t)
    }

    fn input_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.validate(p)?;
        Ok(DMatrix::zeros(self.n, 1))
    }

    fn output_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(1, self.n);
        c[(0, self.n - 1)] = 1.0;
        c
    }

    fn initial_state(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.domain.validate(p)?;
        let (m, sigma) = (0.5, 0.15);
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        Ok((1..=self.n)
            .map(|i| {
                let z = i as f64 * self.dz;
                let arg = (z - m) / sigma;
                norm * (-0.5 * arg * arg).exp()
            })
            .collect())
    }

    fn input_signal(&self, _t: f64, u: &mut [f64]) {
        u[0] = 0.0;
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn nonlinear(&self, _p: &[f64], _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn nonlinear_stencil(&self, _row: usize) -> Vec<usize> {
        Vec::new()
    }

    fn nonlinear_rows(
        &self,
        _p: &[f64],
        rows: &[usize],
        _x: &dyn Fn(usize) -> f64,
        out: &mut [f64],
    ) {
        out[..rows.len()].fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::evaluate_rhs;

    #[test]
    fn operator_is_symmetric_negative_definite() {
        // Oracle: dense symmetric eigensolve of the assembled operator.
        let sys = Heat::new(64).unwrap();
        let a = sys.a_matrix(&[0.06]).unwrap().to_dense();
        assert!((&a - a.transpose()).norm() == 0.0);
        let eig = a.symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max < 0.0, "largest eigenvalue {max} not negative");
        // Smallest-magnitude eigenvalue approaches mu * pi^2 as dz -> 0.
        let min_abs = eig
            .eigenvalues
            .iter()
            .map(|l| l.abs())
            .fold(f64::MAX, f64::min);
        let continuum = 0.06 * std::f64::consts::PI.powi(2);
        assert!((min_abs - continuum).abs() / continuum < 1e-2);
    }

    #[test]
    fn rhs_at_zero_state_is_zero() {
        let sys = Heat::new(32).unwrap();
        let rhs = evaluate_rhs(&sys, &[0.06], 0.3, &vec![0.0; sys.dim()]).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_state_is_the_gaussian_density() {
        let sys = Heat::new(256).unwrap();
        let x0 = sys.initial_state(&[0.06]).unwrap();
        // Peak near z = 0.5 with the density's height 1/(sigma sqrt(2 pi)).
        let peak = x0.iter().cloned().fold(f64::MIN, f64::max);
        let expect = 1.0 / (0.15 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((peak - expect).abs() < 1e-4);
        let i_star = x0.iter().position(|&v| v == peak).unwrap();
        let z_star = (i_star as f64 + 1.0) * sys.dz();
        assert!((z_star - 0.5).abs() <= sys.dz());
    }
}
