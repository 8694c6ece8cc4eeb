use super::{AxisScale, OdeSystem, ParamDomain};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use nalgebra::DMatrix;

/// Viscous Burgers' equation on (0, 1) with homogeneous Dirichlet ends,
///
///     dv/dt + v dv/dz = mu * d^2 v / dz^2,    v(z, 0) = sin(2 pi z),
///
/// discretized on N = n_cells interior nodes z_i = i * dz, dz = 1 / (N + 1).
/// The viscous part mu * D2 forms A(p); the advection enters through the
/// nonlinearity f(x) = -x .* (D x) with D the central first difference in
/// non-conservative form (see `ADVECTION_FORM`). The output is the state at
/// the interior node adjacent to the right boundary. The viscosity domain is
/// mu in [0.005, 1], treated logarithmically when normalized.
pub struct Burgers {
    n: usize,
    dz: f64,
    domain: ParamDomain,
}

impl Burgers {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::InvalidArgument(
                "burgers model needs at least 4 cells".into(),
            ));
        }
        Ok(Self {
            n: n_cells,
            dz: 1.0 / (n_cells as f64 + 1.0),
            domain: ParamDomain::new(vec![0.005], vec![1.0], vec![AxisScale::Log]),
        })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    #[inline]
    fn central_diff(&self, x: &dyn Fn(usize) -> f64, i: usize) -> f64 {
        let left = if i == 0 { 0.0 } else { x(i - 1) };
        let right = if i + 1 == self.n { 0.0 } else { x(i + 1) };
        // Same reciprocal product as `nonlinear`, so both routes agree bitwise.
        (right - left) * (1.0 / (2.0 * self.dz))
    }
}

impl OdeSystem for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
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
        let w = p[0] / (self.dz * self.dz);
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
        Ok((1..=self.n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 * self.dz).sin())
            .collect())
    }

    fn input_signal(&self, _t: f64, u: &mut [f64]) {
        u[0] = 0.0;
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn nonlinear(&self, _p: &[f64], x: &[f64], out: &mut [f64]) {
        let inv2dz = 1.0 / (2.0 * self.dz);
        let n = self.n;
        // Grouped as in `central_diff` so row evaluation agrees bitwise.
        // The boundary rows are peeled so the interior loop is branch-free.
        out[0] = -(x[0] * ((x[1] - 0.0) * inv2dz));
        for (o, w) in out[1..n - 1].iter_mut().zip(x.windows(3)) {
            *o = -(w[1] * ((w[2] - w[0]) * inv2dz));
        }
        out[n - 1] = -(x[n - 1] * ((0.0 - x[n - 2]) * inv2dz));
    }

    fn nonlinear_stencil(&self, row: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(3);
        if row > 0 {
            s.push(row - 1);
        }
        s.push(row);
        if row + 1 < self.n {
            s.push(row + 1);
        }
        s
    }

    fn nonlinear_rows(
        &self,
        _p: &[f64],
        rows: &[usize],
        x: &dyn Fn(usize) -> f64,
        out: &mut [f64],
    ) {
        for (k, &i) in rows.iter().enumerate() {
            out[k] = -x(i) * self.central_diff(&x, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::evaluate_rhs;

    #[test]
    fn rhs_at_unit_vector_matches_hand_stencil() {
        // N = 7 interior nodes, dz = 1/8, x = e_3 (0-based). By hand:
        //   A x: row 2 gets mu/dz^2, row 3 gets -2 mu/dz^2, row 4 gets mu/dz^2.
        //   f(x): (D x)_2 = 1/(2dz), (D x)_4 = -1/(2dz), zero where x_i = 0,
        //   and at i = 3 the central difference vanishes, so f = 0 everywhere.
        let sys = Burgers::new(7).unwrap();
        let mu = 0.02;
        let mut x = vec![0.0; 7];
        x[3] = 1.0;
        let rhs = evaluate_rhs(&sys, &[mu], 0.0, &x).unwrap();
        let w = mu / (sys.dz() * sys.dz());
        let expect = [0.0, 0.0, w, -2.0 * w, w, 0.0, 0.0];
        for i in 0..7 {
            assert!(
                (rhs[i] - expect[i]).abs() <= 1e-14 * w.abs(),
                "row {i}: {} vs {}",
                rhs[i],
                expect[i]
            );
        }
    }

    #[test]
    fn nonlinearity_sees_dirichlet_ghosts() {
        // Constant state: interior central differences vanish, but the first
        // and last rows see the zero boundary, by hand f_0 = -c^2/(2dz) and
        // f_{N-1} = +c^2/(2dz).
        let sys = Burgers::new(6).unwrap();
        let c = 0.7;
        let x = vec![c; 6];
        let mut f = vec![0.0; 6];
        sys.nonlinear(&[0.1], &x, &mut f);
        let edge = c * c / (2.0 * sys.dz());
        assert!((f[0] + edge).abs() < 1e-14);
        assert!((f[5] - edge).abs() < 1e-14);
        for i in 1..5 {
            assert_eq!(f[i], 0.0);
        }
    }

    #[test]
    fn rhs_at_zero_state_is_zero() {
        let sys = Burgers::new(16).unwrap();
        let rhs = evaluate_rhs(&sys, &[0.5], 0.0, &vec![0.0; 16]).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn row_evaluation_matches_full_nonlinearity() {
        let sys = Burgers::new(20).unwrap();
        let x: Vec<f64> = (0..20).map(|i| ((i as f64) * 0.41).sin()).collect();
        let mut full = vec![0.0; 20];
        sys.nonlinear(&[0.1], &x, &mut full);
        let rows = [0usize, 5, 12, 19];
        let mut partial = vec![0.0; rows.len()];
        sys.nonlinear_rows(&[0.1], &rows, &|i| x[i], &mut partial);
        for (k, &r) in rows.iter().enumerate() {
            assert!((partial[k] - full[r]).abs() < 1e-15);
        }
    }
}
