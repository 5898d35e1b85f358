use super::CsrMatrix;
use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a banded matrix, stored row-wise.
///
/// Row `i` keeps columns `i - kl ..= i + kl + ku`; the extra `kl` upper diagonals
/// hold the fill created by row interchanges. Solves with `A` and `Aᵀ` share one
/// factorization.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factor a square sparse matrix. Bandwidths are read off the pattern.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "banded LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &j in a.row(i).0 {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            upper: vec![0.0; n * width],
            lower: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let idx = lu.idx(i, j);
                lu.upper[idx] += v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// (lower, upper) bandwidth of the factored matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.upper.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.upper[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.upper[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-3 || best == 0.0 {
                return Err(Error::Numerical(format!(
                    "zero pivot in column {k} of banded LU (matrix is singular)"
                )));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.upper.swap(a, b);
                }
            }
            let pivot = self.upper[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.upper[ik] / pivot;
                self.upper[ik] = 0.0;
                self.lower[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.upper[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.upper[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.lower[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.upper[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.upper[self.idx(k, k)];
        }
    }

    /// Solve `Aᵀ x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let mut s = b[k];
            for i in k.saturating_sub(kl + ku)..k {
                s -= self.upper[self.idx(i, k)] * b[i];
            }
            b[k] = s / self.upper[self.idx(k, k)];
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.lower[k * kl + (i - k - 1)] * b[i];
            }
            b[k] = s;
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use nalgebra::DVector;

    fn banded_test_matrix(n: usize, kl: usize, ku: usize, seed: u64) -> CsrMatrix {
        // Deterministic pseudo-random band with a weak diagonal so pivoting actually happens.
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = next();
                // Triangular bands have no pivoting freedom, so keep those cases well conditioned.
                let diag = if kl > 0 && ku > 0 { 0.05 * v } else { 4.0 + v };
                b.push(i, j, if i == j { diag } else { v });
            }
        }
        b.build()
    }

    #[test]
    fn solves_match_dense_lu() {
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (30, 3, 2), (40, 0, 4), (25, 5, 0)] {
            let a = banded_test_matrix(n, kl, ku, 7 + n as u64);
            let dense = a.to_dense();
            let lu = BandedLu::factor(&a).unwrap();
            let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin() + 1.0);

            let mut x = b.clone();
            lu.solve_in_place(x.as_mut_slice());
            let reference = dense.clone().lu().solve(&b).unwrap();
            assert!((&x - &reference).amax() < 1e-9 * (1.0 + reference.amax()));

            let mut xt = b.clone();
            lu.solve_transpose_in_place(xt.as_mut_slice());
            let reference_t = dense.transpose().lu().solve(&b).unwrap();
            assert!((&xt - &reference_t).amax() < 1e-9 * (1.0 + reference_t.amax()));
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 1.0);
        b.push(1, 1, 1.0);
        b.push(1, 2, 1.0);
        let a = b.build();
        assert!(matches!(BandedLu::factor(&a), Err(Error::Numerical(_))));
    }

    #[test]
    fn diagonal_matrix() {
        let mut b = TripletBuilder::new(4, 4);
        for i in 0..4 {
            b.push(i, i, (i + 1) as f64);
        }
        let a = b.build();
        let lu = BandedLu::factor(&a).unwrap();
        assert_eq!(lu.bandwidths(), (0, 0));
        let mut x = vec![1.0, 2.0, 3.0, 4.0];
        lu.solve_in_place(&mut x);
        assert_eq!(x, vec![1.0, 1.0, 1.0, 1.0]);
    }
}
