//! Dense eigen-decompositions for small matrices.
//!
//! `symmetric_eigen` is a cyclic Jacobi sweep. `eigen_real` handles general
//! real matrices whose spectrum is known to be real: balancing (with
//! eigenvalue isolation), Householder reduction to Hessenberg form, Francis
//! double-shift QR for the eigenvalues, then inverse iteration on the
//! original matrix for each eigenvector.

use serde::Serialize;

use crate::error::{Error, Result};

use super::matrix::{norm2, norm_inf, Matrix};

/// Imaginary parts above this fraction of `‖M‖∞` reject the spectrum.
pub const COMPLEX_TOLERANCE: f64 = 1e-8;

/// Components below this magnitude are skipped when fixing the eigenvector sign.
pub const SIGN_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub eigenvalue: f64,
    /// Unit 2-norm; first component with magnitude above `SIGN_THRESHOLD` is positive.
    pub eigenvector: Vec<f64>,
}

/// Rescales `v` to unit length and flips it so the first significant
/// component is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("symmetric eigenproblem needs a square matrix".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, src)];
        }
    }
    Ok((values, vectors))
}

/// Balances `a` in place. Rows and columns that isolate an eigenvalue are
/// permuted to the bottom/top; the remaining block `[low, high)` is scaled by
/// powers of two. Returns `(low, high)`.
fn balance(a: &mut Matrix) -> (usize, usize) {
    let n = a.rows();
    let mut low = 0usize;
    let mut high = n;

    // rows with no off-diagonal entries inside the active block go down
    'rows: while high > low {
        for j in (low..high).rev() {
            if (low..high).all(|i| i == j || a[(j, i)] == 0.0) {
                a.swap_rows(j, high - 1);
                a.swap_cols(j, high - 1);
                high -= 1;
                continue 'rows;
            }
        }
        break;
    }
    // columns with no off-diagonal entries inside the active block go left
    'cols: while high > low {
        for j in low..high {
            if (low..high).all(|i| i == j || a[(i, j)] == 0.0) {
                a.swap_rows(j, low);
                a.swap_cols(j, low);
                low += 1;
                continue 'cols;
            }
        }
        break;
    }

    const RADIX: f64 = 2.0;
    let mut done = false;
    while !done {
        done = true;
        for i in low..high {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in low..high {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (low, high)
}

/// Householder reduction to upper Hessenberg form (eigenvalues only).
fn hessenberg(a: &mut Matrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let alpha = norm2(&x);
        if alpha == 0.0 {
            continue;
        }
        let alpha = if x[0] > 0.0 { -alpha } else { alpha };
        let mut v = x;
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vn);
        // A <- H A
        for j in 0..n {
            let s: f64 = (0..v.len()).map(|i| v[i] * a[(k + 1 + i, j)]).sum();
            for i in 0..v.len() {
                a[(k + 1 + i, j)] -= 2.0 * v[i] * s;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: f64 = (0..v.len()).map(|j| a[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..v.len() {
                a[(i, k + 1 + j)] -= 2.0 * s * v[j];
            }
        }
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns the real
/// and imaginary parts of every eigenvalue.
fn hessenberg_qr(h: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.rows();
    // 1-based working copy keeps the index arithmetic of the classic algorithm readable
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::NoConvergence {
                    iterations: its,
                    residual: a[nn][nn - 1].abs(),
                });
            }
            if its == 10 || its == 20 || its == 40 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((wr[1..].to_vec(), wi[1..].to_vec()))
}

/// All eigenvalues of a general real matrix as `(re, im)` pairs, unsorted.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues need a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let (low, high) = balance(&mut a);
    let mut out = Vec::with_capacity(n);
    for i in (0..low).chain(high..n) {
        out.push((a[(i, i)], 0.0));
    }
    if high > low {
        let mut block = a.principal_block(low, high);
        hessenberg(&mut block);
        let (wr, wi) = hessenberg_qr(&block)?;
        out.extend(wr.into_iter().zip(wi));
    }
    Ok(out)
}

fn eigen_residual(m: &Matrix, lambda: f64, v: &[f64]) -> f64 {
    let mv = m.mul_vec(v).expect("square");
    norm_inf(&mv.iter().zip(v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>())
}

/// Inverse iteration for the eigenvector of `m` belonging to `lambda`.
fn inverse_iteration(m: &Matrix, lambda: f64) -> Vec<f64> {
    let n = m.rows();
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);
    let shift = lambda + 1e-10 * scale;
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = factor_with_floor(&shifted, f64::EPSILON * scale);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
    normalize_sign(&mut v);
    for _ in 0..8 {
        let mut next = lu.solve(&v);
        if next.iter().any(|x| !x.is_finite()) {
            break;
        }
        normalize_sign(&mut next);
        v = next;
        if eigen_residual(m, lambda, &v) <= 1e-13 * scale {
            break;
        }
    }
    v
}

/// Right singular vector of `m - λI` for its smallest singular value. Used
/// when inverse iteration stalls on a defective eigenvalue.
fn null_vector(m: &Matrix, lambda: f64) -> Result<Vec<f64>> {
    let n = m.rows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let gram = shifted.transpose().matmul(&shifted)?;
    let (_, vectors) = symmetric_eigen(&gram)?;
    let mut v = vectors.column(0);
    normalize_sign(&mut v);
    Ok(v)
}

fn eigenvector(m: &Matrix, lambda: f64) -> Result<Vec<f64>> {
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);
    let v = inverse_iteration(m, lambda);
    let r = eigen_residual(m, lambda, &v);
    if r.is_finite() && r <= 1e-10 * scale {
        return Ok(v);
    }
    let w = null_vector(m, lambda)?;
    if !r.is_finite() || eigen_residual(m, lambda, &w) < r {
        Ok(w)
    } else {
        Ok(v)
    }
}

/// LU that replaces exactly-zero pivots by `floor`, as inverse iteration
/// factors nearly singular matrices on purpose.
struct FlooredLu {
    lu: Matrix,
    perm: Vec<usize>,
}

fn factor_with_floor(a: &Matrix, floor: f64) -> FlooredLu {
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
            .unwrap_or(k);
        lu.swap_rows(k, p);
        perm.swap(k, p);
        if lu[(k, k)] == 0.0 {
            lu[(k, k)] = floor;
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            lu[(i, k)] = f;
            for j in k + 1..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
        }
    }
    FlooredLu { lu, perm }
}

impl FlooredLu {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Eigenpairs of a real matrix with a real spectrum, sorted by descending
/// `|λ|`. Complex pairs are rejected with `ComplexSpectrum`.
pub fn eigen_real(m: &Matrix) -> Result<Vec<EigenPair>> {
    let values = eigenvalues(m)?;
    let scale = m.norm_inf();
    if let Some(&(re, im)) = values
        .iter()
        .find(|(_, im)| im.abs() > COMPLEX_TOLERANCE * scale)
    {
        return Err(Error::ComplexSpectrum { re, im: im.abs() });
    }
    let mut reals: Vec<f64> = values.into_iter().map(|(re, _)| re).collect();
    reals.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    reals
        .into_iter()
        .map(|lambda| {
            Ok(EigenPair {
                eigenvalue: lambda,
                eigenvector: eigenvector(m, lambda)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(m: &Matrix, p: &EigenPair) -> f64 {
        let mv = m.mul_vec(&p.eigenvector).unwrap();
        norm_inf(
            &mv.iter()
                .zip(&p.eigenvector)
                .map(|(a, b)| a - p.eigenvalue * b)
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix::from_diagonal(&[3.0, -1.0, 0.0]);
        let pairs = eigen_real(&m).unwrap();
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.eigenvalue).collect();
        assert_eq!(lambdas, vec![3.0, -1.0, 0.0]);
        for (k, p) in pairs.iter().enumerate() {
            for (i, x) in p.eigenvector.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-12, "{:?}", p.eigenvector);
            }
        }
    }

    #[test]
    fn symmetric_swap() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let pairs = eigen_real(&m).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pairs[0].eigenvalue - 1.0).abs() < 1e-14);
        assert!((pairs[1].eigenvalue + 1.0).abs() < 1e-14);
        assert!((pairs[0].eigenvector[0] - h).abs() < 1e-12);
        assert!((pairs[0].eigenvector[1] - h).abs() < 1e-12);
        assert!((pairs[1].eigenvector[0] - h).abs() < 1e-12);
        assert!((pairs[1].eigenvector[1] + h).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_complex() {
        let m = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        assert!(matches!(eigen_real(&m), Err(Error::ComplexSpectrum { .. })));
    }

    #[test]
    fn defective_zero_block_is_isolated() {
        // zero last column: structural zero plus a Jordan partner
        let m = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 2.0, 0.0]]);
        let pairs = eigen_real(&m).unwrap();
        for p in &pairs {
            assert!(p.eigenvalue.abs() < 1e-14);
            assert!(residual(&m, p) <= 1e-8 * m.norm_inf());
        }
    }

    #[test]
    fn random_similar_to_diagonal() {
        // M = P D P⁻¹ has a known real spectrum
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..100 {
            let n = 2 + trial % 9;
            let mut p = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] = rng.random_range(-1.0..1.0);
                }
                p[(i, i)] += 3.0;
            }
            let d: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -0.7 }).collect();
            let lu = crate::numerics::linalg::Lu::factor(&p).unwrap();
            let pd = p.matmul(&Matrix::from_diagonal(&d)).unwrap();
            // M = P D P⁻¹  <=>  Mᵀ = P⁻ᵀ (P D)ᵀ
            let pinv = lu.solve_matrix(&Matrix::identity(n)).unwrap();
            let m = pd.matmul(&pinv).unwrap();
            let pairs = eigen_real(&m).unwrap();
            let mut got: Vec<f64> = pairs.iter().map(|p| p.eigenvalue).collect();
            let mut want = d.clone();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
            }
            let trace: f64 = pairs.iter().map(|p| p.eigenvalue).sum();
            assert!((trace - m.trace()).abs() <= 1e-8 * m.norm_inf());
            for pair in &pairs {
                assert!(residual(&m, pair) <= 1e-8 * m.norm_inf());
                assert!((norm2(&pair.eigenvector) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = Matrix::from_rows(&[[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]]);
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        let s2 = 2f64.sqrt();
        let want = [2.0 - s2, 2.0, 2.0 + s2];
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-13);
        }
        for k in 0..3 {
            let col = vecs.column(k);
            let mv = m.mul_vec(&col).unwrap();
            for i in 0..3 {
                assert!((mv[i] - vals[k] * col[i]).abs() < 1e-12);
            }
        }
    }
}
