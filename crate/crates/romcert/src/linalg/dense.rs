use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Orthonormalize the columns of `v` in place by modified Gram-Schmidt with a
/// single re-pass, keeping the first `frozen` columns untouched (they are
/// assumed orthonormal already). Columns that collapse below `drop_tol`
/// relative to their incoming norm are removed. Returns the retained matrix.
pub fn mgs_orthonormalize(v: &DMatrix<f64>, frozen: usize, drop_tol: f64) -> DMatrix<f64> {
    let n = v.nrows();
    let mut cols: Vec<DVector<f64>> = (0..frozen).map(|c| v.column(c).into_owned()).collect();
    for c in frozen..v.ncols() {
        let mut w = v.column(c).into_owned();
        let incoming = w.norm();
        if incoming == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for q in &cols {
                let h = q.dot(&w);
                w.axpy(-h, q, 1.0);
            }
        }
        let nrm = w.norm();
        if nrm > drop_tol * incoming {
            w /= nrm;
            cols.push(w);
        }
    }
    let mut out = DMatrix::zeros(n, cols.len());
    for (c, col) in cols.iter().enumerate() {
        out.set_column(c, col);
    }
    out
}

/// max |V^T V - I|, the orthonormality defect used by basis invariants.
pub fn orthonormality_defect(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Singular value decomposition with singular values sorted descending.
/// nalgebra does not guarantee ordering, so this wrapper enforces it.
pub fn svd_sorted(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::SingularMatrix("SVD failed to converge".into()))?;
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut u_s = DMatrix::zeros(u.nrows(), order.len());
    let mut vt_s = DMatrix::zeros(order.len(), vt.ncols());
    let mut sv = Vec::with_capacity(order.len());
    for (k, &idx) in order.iter().enumerate() {
        u_s.set_column(k, &u.column(idx));
        vt_s.set_row(k, &vt.row(idx));
        sv.push(s[idx]);
    }
    Ok((u_s, sv, vt_s))
}

/// Smallest rank whose discarded tail satisfies
/// sqrt(sum_{i>r} s_i^2) <= tol * sqrt(sum_i s_i^2), i.e. a relative
/// Frobenius-norm truncation. At least one mode is kept for nonzero input.
pub fn rank_for_energy_tol(singular_values: &[f64], tol: f64) -> usize {
    let n = singular_values.len();
    // Suffix sums keep tiny tails out of the rounding shadow of the head.
    let mut tails = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        tails[i] = tails[i + 1] + singular_values[i] * singular_values[i];
    }
    let total = tails[0];
    if total == 0.0 {
        return 0;
    }
    let budget = tol * tol * total;
    for r in 0..=n {
        if tails[r] <= budget {
            return r.max(1);
        }
    }
    n
}

/// Numerical rank: number of singular values above rel_tol * s_max.
pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let s0 = singular_values.first().copied().unwrap_or(0.0);
    if s0 == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * s0).count()
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterOpts {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for PowerIterOpts {
    fn default() -> Self {
        // Cheap default for estimator sweeps; rigor checks tighten this.
        Self {
            max_iter: 20,
            rel_tol: 1e-6,
            seed: 0x9e3779b97f4a7c15,
        }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its action, via power iteration with a Rayleigh-quotient stop rule.
pub fn dominant_eigenvalue_spd<F>(dim: usize, mut apply: F, opts: PowerIterOpts) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm == 0.0 || dim == 0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut w = vec![0.0; dim];
    let mut lambda_prev = 0.0f64;
    for it in 0..opts.max_iter {
        apply(&v, &mut w);
        let lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if it > 0 && (lambda - lambda_prev).abs() <= opts.rel_tol * lambda.abs() {
            return lambda;
        }
        lambda_prev = lambda;
    }
    lambda_prev
}
