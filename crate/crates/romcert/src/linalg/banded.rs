use super::csr::Csr;
use crate::error::{Error, Result};

/// LU factorization of a banded matrix with partial pivoting, in the style of
/// LAPACK's gbtrf/gbtrs. An optional symmetric permutation is applied before
/// factoring so that matrices whose natural ordering is wide-banded (stacked
/// multi-variable systems) can still be solved in O(n * bandwidth^2).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major band storage: entry (i, j) of the permuted matrix lives at
    /// ab[j * ldab + kl + ku + i - j]; the top kl rows per column hold pivot fill.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// perm[k] = original index stored at permuted position k.
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    pub fn factor(a: &Csr, perm: Option<&[usize]>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "banded factorization".into(),
                expected: n,
                got: a.ncols(),
            });
        }
        let inv = perm.map(|p| {
            let mut inv = vec![0usize; n];
            for (k, &orig) in p.iter().enumerate() {
                inv[orig] = k;
            }
            inv
        });
        let map = |idx: usize| inv.as_ref().map_or(idx, |inv| inv[idx]);

        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            let (cols, _) = a.row(i);
            let pi = map(i);
            for &j in cols {
                let pj = map(j);
                if pj < pi {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }

        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0f64; ldab * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let pi = map(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let pj = map(j);
                ab[pj * ldab + kl + ku + pi - pj] = v;
            }
        }

        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0usize;
            let mut best = ab[j * ldab + kl + ku].abs();
            for q in 1..=km {
                let cand = ab[j * ldab + kl + ku + q].abs();
                if cand > best {
                    best = cand;
                    p = q;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix(format!(
                    "zero pivot in column {j} of banded LU"
                )));
            }
            ipiv[j] = j + p;
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let r1 = c * ldab + kl + ku + (j + p) - c;
                    let r2 = c * ldab + kl + ku + j - c;
                    ab.swap(r1, r2);
                }
            }
            if km > 0 {
                let pivot = ab[j * ldab + kl + ku];
                for q in 1..=km {
                    ab[j * ldab + kl + ku + q] /= pivot;
                }
                for c in j + 1..=ju {
                    let ujc = ab[c * ldab + kl + ku + j - c];
                    if ujc != 0.0 {
                        for q in 1..=km {
                            let m = ab[j * ldab + kl + ku + q];
                            ab[c * ldab + kl + ku + (j + q) - c] -= m * ujc;
                        }
                    }
                }
            }
        }

        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
            perm: perm.map(|p| p.to_vec()),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn gather(&self, b: &[f64], work: &mut Vec<f64>) {
        work.clear();
        match &self.perm {
            Some(p) => work.extend(p.iter().map(|&orig| b[orig])),
            None => work.extend_from_slice(b),
        }
    }

    fn scatter(&self, work: &[f64], x: &mut [f64]) {
        match &self.perm {
            Some(p) => {
                for (k, &orig) in p.iter().enumerate() {
                    x[orig] = work[k];
                }
            }
            None => x.copy_from_slice(work),
        }
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut w = Vec::with_capacity(n);
        self.gather(b, &mut w);
        // L (with row interchanges), then U.
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let piv = self.ipiv[j];
            if piv != j {
                w.swap(piv, j);
            }
            let wj = w[j];
            if wj != 0.0 {
                for q in 1..=km {
                    w[j + q] -= self.ab[j * ldab + kl + ku + q] * wj;
                }
            }
        }
        let band = kl + ku;
        for j in (0..n).rev() {
            let wj = w[j] / self.ab[j * ldab + kl + ku];
            w[j] = wj;
            if wj != 0.0 {
                let lo = j.saturating_sub(band);
                for i in lo..j {
                    w[i] -= self.ab[j * ldab + kl + ku + i - j] * wj;
                }
            }
        }
        self.scatter(&w, x);
    }

    /// Solve A^T x = b.
    pub fn solve_transpose(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut w = Vec::with_capacity(n);
        self.gather(b, &mut w);
        // U^T (forward), then L^T (backward) undoing the interchanges.
        let band = kl + ku;
        for j in 0..n {
            let mut acc = w[j];
            let lo = j.saturating_sub(band);
            for i in lo..j {
                acc -= self.ab[j * ldab + kl + ku + i - j] * w[i];
            }
            w[j] = acc / self.ab[j * ldab + kl + ku];
        }
        for j in (0..n).rev() {
            let km = kl.min(n - 1 - j);
            let mut acc = w[j];
            for q in 1..=km {
                acc -= self.ab[j * ldab + kl + ku + q] * w[j + q];
            }
            w[j] = acc;
            let piv = self.ipiv[j];
            if piv != j {
                w.swap(piv, j);
            }
        }
        self.scatter(&w, x);
    }
}
