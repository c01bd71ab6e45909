//! Banded non-symmetric linear solver: in-place LU without pivoting.
//!
//! The meshes this crate builds number their nodes so both the mechanical and
//! the transport systems have a small, fixed half-bandwidth; a band solver is
//! then both simpler and faster than a general sparse factorization.

use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored
/// column-major within the band.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0);
        BandMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "({i},{j}) outside band");
        j * (self.kl + self.ku + 1) + (i + self.ku - j)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    /// Zero row and column `dof` and put `diag` on the diagonal. With a zeroed
    /// right-hand-side entry this pins the correction of that dof to zero.
    pub fn apply_dirichlet(&mut self, dof: usize, diag: f64) {
        let lo = dof.saturating_sub(self.ku);
        let hi = (dof + self.kl).min(self.n - 1);
        for j in lo..=hi {
            if self.in_band(dof, j) {
                self.set(dof, j, 0.0);
            }
        }
        let lo = dof.saturating_sub(self.kl);
        let hi = (dof + self.ku).min(self.n - 1);
        for i in lo..=hi {
            if self.in_band(i, dof) {
                self.set(i, dof, 0.0);
            }
        }
        self.set(dof, dof, diag);
    }

    /// `y = A x` (for residual checks and audits).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.data[self.idx(i, j)] * xj;
            }
        }
        y
    }

    /// In-place LU factorization without pivoting. Errors on a (near-)zero
    /// pivot; the assembled systems here are diagonally strong enough that
    /// pivoting is unnecessary.
    pub fn factor(&mut self) -> Result<()> {
        let scale = (0..self.n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for k in 0..self.n {
            let pivot = self.get(k, k);
            if pivot.abs() <= 1.0e-14 * scale {
                return Err(Error::LinearSolve(format!(
                    "zero pivot at row {k} (|{pivot:.3e}| vs scale {scale:.3e})"
                )));
            }
            let i_hi = (k + self.kl).min(self.n - 1);
            let j_hi = (k + self.ku).min(self.n - 1);
            for i in (k + 1)..=i_hi {
                let l = self.get(i, k) / pivot;
                self.set(i, k, l);
                if l != 0.0 {
                    for j in (k + 1)..=j_hi {
                        let v = self.get(k, j);
                        if v != 0.0 {
                            let t = self.idx(i, j);
                            self.data[t] -= l * v;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` using a factorization produced by [`BandMatrix::factor`];
    /// `b` is overwritten with the solution.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for k in 0..self.n {
            let i_hi = (k + self.kl).min(self.n - 1);
            let bk = b[k];
            if bk != 0.0 {
                for i in (k + 1)..=i_hi {
                    b[i] -= self.get(i, k) * bk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let j_hi = (k + self.ku).min(self.n - 1);
            let mut s = b[k];
            for j in (k + 1)..=j_hi {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
    }
}
