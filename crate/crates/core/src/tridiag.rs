//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are
/// ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `I * shift - coeff * L` where `L` is the second-difference operator on
    /// `n` nodes with spacing `dx` and reflected ghost nodes at both ends.
    pub fn shifted_neumann_laplacian(n: usize, dx: f64, shift: f64, coeff: f64) -> Self {
        let k = coeff / (dx * dx);
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.diag[i] = shift + 2.0 * k;
            m.lower[i] = -k;
            m.upper[i] = -k;
        }
        // ghost reflection u_{-1} = u_1, u_{n} = u_{n-2}
        m.upper[0] = -2.0 * k;
        m.lower[n - 1] = -2.0 * k;
        m
    }

    /// Solve `A x = rhs` in place. `scratch` must have length `n`.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        let n = self.diag.len();
        if rhs.len() != n || scratch.len() != n {
            return Err(Error::Numerical(format!(
                "tridiagonal size mismatch: matrix {n}, rhs {}, scratch {}",
                rhs.len(),
                scratch.len()
            )));
        }
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Numerical("zero pivot in tridiagonal solve at row 0".into()));
        }
        scratch[0] = self.upper[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * scratch[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical(format!("zero pivot in tridiagonal solve at row {i}")));
            }
            scratch[i] = self.upper[i] / pivot;
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        let mut scratch = vec![0.0; rhs.len()];
        self.solve_in_place(&mut x, &mut scratch)?;
        Ok(x)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}
