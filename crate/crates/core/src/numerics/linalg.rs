use crate::error::{Error, Result};

use super::eigen::symmetric_eigen;
use super::matrix::{dot, Matrix};

/// Pivots below this magnitude (relative to the largest entry) mark the matrix singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Gram-matrix eigenvalues below this bound mean the Jacobian lost row rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let scale = a.max_abs();
        let threshold = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || scale == 0.0 {
                return Err(Error::SingularMatrix { column: k, pivot });
            }
            lu.swap_rows(k, p);
            perm.swap(k, p);
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a {n}x{n} system",
                b.len()
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A·X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Lu::factor(a)?.solve(b)
}

fn gram(j: &Matrix) -> Result<Matrix> {
    j.matmul(&j.transpose())
}

fn check_row_rank(g: &Matrix) -> Result<()> {
    let (values, _) = symmetric_eigen(g)?;
    let smallest = values.first().copied().unwrap_or(0.0);
    let largest = values.last().copied().unwrap_or(0.0);
    if smallest <= RANK_TOLERANCE * largest.max(1.0) {
        return Err(Error::RankDeficient { smallest });
    }
    Ok(())
}

/// Minimum-norm solution of `J·x = rhs` for a full-row-rank `J`: `Jᵀ(JJᵀ)⁻¹·rhs`.
pub fn pseudo_inverse_apply(j: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != j.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for {} rows",
            rhs.len(),
            j.rows()
        )));
    }
    let g = gram(j)?;
    check_row_rank(&g)?;
    let y = solve_linear(&g, rhs)?;
    j.transpose().mul_vec(&y)
}

/// Least-squares solution of `Jᵀ·f = rhs`, i.e. `(JJᵀ)⁻¹·J·rhs`.
///
/// This is the form used to recover end forces from joint torques.
pub fn pseudo_inverse_transpose_apply(j: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != j.cols() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for {} columns",
            rhs.len(),
            j.cols()
        )));
    }
    let g = gram(j)?;
    check_row_rank(&g)?;
    solve_linear(&g, &j.mul_vec(rhs)?)
}

/// Moore-Penrose least-squares solution of `Jᵀ·f = rhs` that tolerates rank
/// loss: `(JJᵀ)⁺·J·rhs` with Gram eigenvalues below the rank tolerance dropped.
pub fn pseudo_inverse_transpose_truncated(j: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != j.cols() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for {} columns",
            rhs.len(),
            j.cols()
        )));
    }
    let g = gram(j)?;
    let (values, vectors) = symmetric_eigen(&g)?;
    let largest = values.last().copied().unwrap_or(0.0);
    let jr = j.mul_vec(rhs)?;
    let mut out = vec![0.0; j.rows()];
    for (k, &s) in values.iter().enumerate() {
        if s <= RANK_TOLERANCE * largest.max(1.0) {
            continue;
        }
        let u = vectors.column(k);
        let c = dot(&u, &jr) / s;
        for (o, ui) in out.iter_mut().zip(&u) {
            *o += c * ui;
        }
    }
    Ok(out)
}
