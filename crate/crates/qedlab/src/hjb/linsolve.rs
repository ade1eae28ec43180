//! Banded LU solver for the policy-evaluation linear systems.
//!
//! The assembled matrices are strictly diagonally dominant M-matrices
//! (positive diagonal, nonpositive off-diagonals, dominance margin gamma), so
//! LU factorization without pivoting is stable and dominance is preserved
//! through elimination.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    w: usize,
    row_len: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        let row_len = 2 * bandwidth + 1;
        BandedMatrix {
            n,
            w: bandwidth,
            row_len,
            data: vec![0.0; n * row_len],
            factored: false,
        }
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.w >= row && col <= row + self.w);
        row * self.row_len + (col + self.w - row)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let s = self.slot(row, col);
        self.data[s] = value;
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
        self.factored = false;
    }

    /// In-place LU without pivoting. O(n w^2).
    pub fn factor(&mut self) -> Result<()> {
        assert!(!self.factored);
        let (n, w, rl) = (self.n, self.w, self.row_len);
        for i in 0..n {
            let pivot = self.data[i * rl + w];
            if pivot.abs() < 1e-300 {
                return Err(Error::SingularLinearSystem { row: i });
            }
            let hi = (i + w).min(n - 1);
            for r in (i + 1)..=hi {
                // column i sits at offset (i + w - r) in row r
                let off_r = i + w - r;
                let l = self.data[r * rl + off_r] / pivot;
                if l != 0.0 {
                    self.data[r * rl + off_r] = l;
                    // subtract l * row_i over columns i+1 ..= min(i+w, n-1)
                    let chi = (i + w).min(n - 1);
                    for c in (i + 1)..=chi {
                        let v = self.data[i * rl + (c + w - i)];
                        if v != 0.0 {
                            self.data[r * rl + (c + w - r)] -= l * v;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves LU x = rhs in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored);
        assert_eq!(rhs.len(), self.n);
        let (n, w, rl) = (self.n, self.w, self.row_len);
        // forward: L has unit diagonal
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut acc = rhs[i];
            for c in lo..i {
                acc -= self.data[i * rl + (c + w - i)] * rhs[c];
            }
            rhs[i] = acc;
        }
        // backward
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut acc = rhs[i];
            for c in (i + 1)..=hi {
                acc -= self.data[i * rl + (c + w - i)] * rhs[c];
            }
            rhs[i] = acc / self.data[i * rl + w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn solves_tridiagonal_poisson() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0, exact u = x(1-x)/2 at nodes
        let n = 64;
        let h = 1.0 / (n + 1) as f64;
        let mut a = BandedMatrix::new(n, 1);
        let mut rhs = vec![h * h; n];
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        a.factor().unwrap();
        a.solve(&mut rhs);
        for i in 0..n {
            let x = (i + 1) as f64 * h;
            assert_abs_diff_eq!(rhs[i], x * (1.0 - x) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_dense_solution_on_random_dominant_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 40;
        let w = 7;
        let mut band = BandedMatrix::new(n, w);
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let mut offsum = 0.0;
            for j in lo..=hi {
                if j != i {
                    let v: f64 = -rng.random_range(0.0..1.0);
                    band.set(i, j, v);
                    dense[i][j] = v;
                    offsum += v.abs();
                }
            }
            let d = offsum + 1.0 + rng.random_range(0.0..1.0);
            band.set(i, i, d);
            dense[i][i] = d;
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = (0..n).map(|j| dense[i][j] * x_true[j]).sum();
        }
        band.factor().unwrap();
        band.solve(&mut rhs);
        for i in 0..n {
            assert_abs_diff_eq!(rhs[i], x_true[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn detects_singular() {
        let mut a = BandedMatrix::new(2, 1);
        a.set(0, 0, 0.0);
        a.set(1, 1, 1.0);
        assert!(matches!(
            a.factor(),
            Err(Error::SingularLinearSystem { row: 0 })
        ));
    }
}
