//! Linear algebra helpers: a banded solver and small stationary solves.
//!
//! The banded systems solved here are `(I - Q)` or its transpose for a
//! substochastic bounded-range kernel `Q`, i.e. nonsingular M-matrices, for
//! which Gaussian elimination without pivoting is stable and keeps the band.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major, row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    /// Solves `A x = b` in place of a copy of `self`. Returns `None` when a
    /// pivot is not strictly positive, which for an M-matrix means `A` is
    /// singular or not an M-matrix.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let mut a = self.clone();
        let mut x = b.to_vec();
        let n = self.n;
        for k in 0..n {
            let pivot = a.get(k, k);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return None;
            }
            let last_row = (k + a.kl).min(n - 1);
            let last_col = (k + a.ku).min(n - 1);
            for i in k + 1..=last_row {
                let f = a.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let akj = a.get(k, j);
                    if akj != 0.0 {
                        a.add(i, j, -f * akj);
                    }
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + a.ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Some(x)
    }
}

/// Stationary distribution of a row-stochastic matrix: solves
/// `pi (P - I) = 0` with one balance equation replaced by `sum pi = 1`.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs)?;
    pi.iter().all(|v| v.is_finite()).then(|| pi.iter().copied().collect())
}
