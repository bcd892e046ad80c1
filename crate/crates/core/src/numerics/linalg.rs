//! Gaussian elimination with partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// `P A = L U` with unit-diagonal `L` stored below the diagonal.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    swaps: usize,
}

impl LuDecomposition {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU needs a square matrix");
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (piv_row, piv_val) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if piv_val <= PIVOT_TOLERANCE * scale || piv_val == 0.0 {
                return Err(SimError::Singular { pivot: piv_val });
            }
            if piv_row != k {
                lu.swap_rows(piv_row, k);
                perm.swap(piv_row, k);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Determinant accumulated from the pivots.
    pub fn determinant(&self) -> f64 {
        let d: f64 = self.lu.diagonal().iter().product();
        if self.swaps.is_multiple_of(2) {
            d
        } else {
            -d
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.lu.nrows();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}

/// Solves `m x = b`.
pub fn solve_linear(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(LuDecomposition::new(m)?.solve(b))
}
