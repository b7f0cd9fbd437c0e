//! Small symmetric positive-definite linear algebra: dense Cholesky via
//! `nalgebra`, sparse conjugate gradients for large lattices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric sparse matrix in row-compressed form.
#[derive(Clone, Debug)]
pub struct SparseSym {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_start.push(cols.len());
        }
        SparseSym {
            n,
            row_start,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()]
            .binary_search(&j)
            .map(|p| self.vals[r.start + p])
            .unwrap_or(0.0)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for e in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[e] * x[self.cols[e]];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for e in self.row_start[i]..self.row_start[i + 1] {
                m[(i, self.cols[e])] = self.vals[e];
            }
        }
        m
    }

    /// Jacobi-preconditioned conjugate gradients to relative residual `tol`.
    pub fn solve_cg(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let inv_diag: Vec<f64> = self.diag().iter().map(|d| 1.0 / d).collect();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let norm_b = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            return Ok(x);
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let max_iter = 20 * n + 1000;
        for _ in 0..max_iter {
            self.mul_into(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Solver("matrix is not positive definite".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_r <= tol * norm_b {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Solver(format!("CG did not converge in {max_iter} iterations")))
    }
}

/// Inverse and log-determinant of a dense SPD matrix.
pub fn spd_inverse(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() == 0 {
        return Ok((m, 0.0));
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Solver("matrix is not positive definite".into()))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut inv = chol.inverse();
    // symmetrise exactly
    let n = inv.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Ok((inv, logdet))
}

/// Solves `m x = rhs` for a dense SPD `m`, also returning `log det m`.
pub fn spd_solve(m: DMatrix<f64>, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Solver("matrix is not positive definite".into()))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let x = chol.solve(&DVector::from_column_slice(rhs));
    Ok((x.iter().copied().collect(), logdet))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseSym {
        SparseSym::from_rows(
            (0..n)
                .map(|i| {
                    let mut r = vec![(i, 2.0)];
                    if i > 0 {
                        r.push((i - 1, -1.0));
                    }
                    if i + 1 < n {
                        r.push((i + 1, -1.0));
                    }
                    r
                })
                .collect(),
        )
    }

    #[test]
    fn cg_matches_dense() {
        let a = laplacian_1d(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = a.solve_cg(&b, 1e-13).unwrap();
        let (y, _) = spd_solve(a.to_dense(), &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_of_two_by_two() {
        let a = laplacian_1d(2).to_dense();
        let (inv, logdet) = spd_inverse(a).unwrap();
        assert!((inv[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((inv[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((logdet - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn duplicate_entries_summed() {
        let a = SparseSym::from_rows(vec![vec![(0, 1.0), (0, 2.0)]]);
        assert_eq!(a.get(0, 0), 3.0);
    }
}
