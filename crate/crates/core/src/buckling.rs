//! Linearized buckling analysis of the straight chain.
//!
//! Around `q = 0` the joint torques are `K_eq·q` and the Jacobian is
//! `b·[S1·q | S0]ᵀ`. With `δy = 0` the torque balance becomes the generalized
//! eigenproblem `(A·Fx + B)·v = 0`, `v = (q, Fy)`, solved as the standard
//! problem for `B⁻¹A` with `λ = −1/Fx`.
//!
//! `B` is built from `|K_eq|`. For a restoring joint (`K_eq < 0`) the physical
//! solution is the mirror of the tabulated one: `Fx = 1/λ` and
//! `Fy = −α_{n+1}·t`. [`BucklingMode::critical_force`] and
//! [`post_buckling_prediction`] apply this conversion.

use serde::Serialize;

use crate::chain::{ChainModel, Deflection};
use crate::error::{Error, Result};
use crate::numerics::{eigen_real, Lu, Matrix};
use crate::segment;
use crate::shape::{shape_label, sign_pattern, ShapeLabel};

/// Eigenvalues below this fraction of the spectral radius count as zero.
pub const ZERO_EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// Smallest admissible `|K_eq|`.
pub const MIN_STIFFNESS: f64 = 1e-12;

/// Relative bound below which a mode produces no axial deflection.
pub const DEGENERATE_MODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SMatrices {
    pub s1: Matrix,
    pub s0: Vec<f64>,
}

pub fn build_s_matrices(n: usize) -> Result<SMatrices> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("buckling needs n >= 2, got {n}")));
    }
    let mut s1 = Matrix::zeros(n, n);
    for i in 0..n {
        for m in 0..n {
            // 1-based: −(2(n − max(i, m)) + 1)
            s1[(i, m)] = -((2 * (n - 1 - i.max(m)) + 1) as f64);
        }
    }
    let s0 = (0..n).map(|i| (2 * (n - 1 - i) + 1) as f64).collect();
    Ok(SMatrices { s1, s0 })
}

/// First-order Jacobian `b·[S1·q | S0]ᵀ` about the straight chain.
pub fn linearized_jacobian(q: &[f64], b: f64) -> Result<Matrix> {
    let s = build_s_matrices(q.len())?;
    let top = s.s1.mul_vec(q)?;
    let mut jac = Matrix::zeros(2, q.len());
    for (m, (&t, &s0)) in top.iter().zip(&s.s0).enumerate() {
        jac[(0, m)] = b * t;
        jac[(1, m)] = b * s0;
    }
    Ok(jac)
}

/// Second-order `δx` and first-order `δy` of the tip for small angles.
pub fn linearized_deflection(q: &[f64], b: f64) -> Deflection {
    let n = q.len();
    let mut s = 0.0;
    let (mut dx, mut dy) = (0.0, 0.0);
    for (j, &qj) in q.iter().enumerate() {
        s += qj;
        let w = if j + 1 < n { 1.0 } else { 0.5 };
        dx += w * s * s;
        dy += 2.0 * w * s;
    }
    Deflection::new(b * dx, b * dy)
}

/// `A = [[S1, 0], [0, 0]]` and `B = [[K_eq/b·I, S0], [S0ᵀ, 0]]`.
pub fn assemble_ab(n: usize, k_eq: f64, b: f64) -> Result<(Matrix, Matrix)> {
    if k_eq == 0.0 || !k_eq.is_finite() {
        return Err(Error::InvalidParameter(format!("K_eq must be finite and nonzero, got {k_eq}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("b must be finite and > 0, got {b}")));
    }
    let s = build_s_matrices(n)?;
    let mut a = Matrix::zeros(n + 1, n + 1);
    let mut bm = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for m in 0..n {
            a[(i, m)] = s.s1[(i, m)];
        }
        bm[(i, i)] = k_eq / b;
        bm[(i, n)] = s.s0[i];
        bm[(n, i)] = s.s0[i];
    }
    Ok((a, bm))
}

/// `Σ_{j<n}(Σ_{i≤j} α_i)² + ½(Σ α_i)²`.
pub fn mode_deflection_factor(alpha: &[f64]) -> Result<f64> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("empty mode".into()));
    }
    let mu_x = linearized_deflection(alpha, 1.0).dx;
    let norm2: f64 = alpha.iter().map(|x| x * x).sum();
    if !(mu_x >= DEGENERATE_MODE_TOLERANCE * norm2) || norm2 == 0.0 {
        return Err(Error::DegenerateMode { mu_x });
    }
    Ok(mu_x)
}

/// `Σα_i² / μ_x`; invariant under rescaling of `alpha`.
pub fn mode_energy_factor(alpha: &[f64]) -> Result<f64> {
    let mu_x = mode_deflection_factor(alpha)?;
    Ok(alpha.iter().map(|x| x * x).sum::<f64>() / mu_x)
}

/// Shape for either sign of the mode amplitude.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeShape {
    pub label: ShapeLabel,
    pub pattern: String,
}

pub fn classify_mode_shape(alpha: &[f64]) -> (ModeShape, ModeShape) {
    let neg: Vec<f64> = alpha.iter().map(|x| -x).collect();
    let describe = |v: &[f64]| ModeShape {
        label: shape_label(v),
        pattern: sign_pattern(v),
    };
    (describe(alpha), describe(&neg))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucklingMode {
    /// Eigenvalue of `B⁻¹A` built with `|K_eq|`.
    pub eigenvalue: f64,
    /// Eigenvalue of the problem built with the signed `K_eq`.
    pub signed_eigenvalue: f64,
    /// Physical axial force at which this mode appears.
    pub critical_force: f64,
    /// `(α_1, …, α_n, α_{n+1})`, unit norm, first significant entry positive.
    pub alpha: Vec<f64>,
    pub mu_x: f64,
    pub mu_eq: f64,
    pub shape_positive: ModeShape,
    pub shape_negative: ModeShape,
}

impl BucklingMode {
    pub fn joint_coefficients(&self) -> &[f64] {
        &self.alpha[..self.alpha.len() - 1]
    }

    pub fn force_coefficient(&self) -> f64 {
        self.alpha[self.alpha.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucklingSolution {
    pub n: usize,
    pub b: f64,
    pub k_eq: f64,
    pub k_eq_magnitude: f64,
    /// `−1 / max|λ|`.
    pub fx0: f64,
    /// Nonzero modes by descending `|λ|`.
    pub modes: Vec<BucklingMode>,
    /// Every eigenvalue of `B⁻¹A` by descending magnitude.
    pub spectrum: Vec<f64>,
}

impl BucklingSolution {
    pub fn dominant(&self) -> &BucklingMode {
        &self.modes[0]
    }

    fn k_sign(&self) -> f64 {
        self.k_eq.signum()
    }
}

/// Modes of the straight chain for a uniform symmetric control.
pub fn solve_buckling(model: &ChainModel) -> Result<BucklingSolution> {
    let springs = model.uniform_springs().ok_or_else(|| {
        Error::InvalidParameter("buckling analysis needs identical controls on every segment".into())
    })?;
    let k_eq = segment::equivalent_stiffness(model.geom(), &springs)?;
    solve_buckling_with(model.n(), k_eq, model.b())
}

/// Same as [`solve_buckling`] for an explicit stiffness.
pub fn solve_buckling_with(n: usize, k_eq: f64, b: f64) -> Result<BucklingSolution> {
    if !(k_eq.abs() > MIN_STIFFNESS) {
        return Err(Error::InvalidParameter(format!("|K_eq| must exceed {MIN_STIFFNESS}, got {k_eq}")));
    }
    let (a, bm) = assemble_ab(n, k_eq.abs(), b)?;
    let lu = Lu::factor(&bm).map_err(|_| Error::SingularB)?;
    let m = lu.solve_matrix(&a)?;
    let pairs = eigen_real(&m)?;
    let radius = pairs.first().map_or(0.0, |p| p.eigenvalue.abs());
    let threshold = ZERO_EIGENVALUE_TOLERANCE * radius.max(f64::MIN_POSITIVE);
    let spectrum: Vec<f64> = pairs.iter().map(|p| p.eigenvalue).collect();
    let sign = k_eq.signum();
    let mut modes = Vec::new();
    for pair in pairs.iter().filter(|p| p.eigenvalue.abs() > threshold) {
        let alpha = pair.eigenvector.clone();
        let joints = &alpha[..n];
        let mu_x = mode_deflection_factor(joints)?;
        let mu_eq = mode_energy_factor(joints)?;
        let (shape_positive, shape_negative) = classify_mode_shape(joints);
        modes.push(BucklingMode {
            eigenvalue: pair.eigenvalue,
            signed_eigenvalue: sign * pair.eigenvalue,
            critical_force: -1.0 / (sign * pair.eigenvalue),
            alpha,
            mu_x,
            mu_eq,
            shape_positive,
            shape_negative,
        });
    }
    if n >= 3 && modes.len() != n - 1 {
        return Err(Error::SpectrumCountMismatch {
            expected: n - 1,
            found: modes.len(),
        });
    }
    if modes.is_empty() {
        return Err(Error::SpectrumCountMismatch { expected: n - 1, found: 0 });
    }
    Ok(BucklingSolution {
        n,
        b,
        k_eq,
        k_eq_magnitude: k_eq.abs(),
        fx0: -1.0 / radius,
        modes,
        spectrum,
    })
}

/// First-order post-buckling state of one mode at amplitude `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostBucklingPrediction {
    pub t: f64,
    pub q: Vec<f64>,
    pub fx: f64,
    pub fy: f64,
    pub energy: f64,
}

impl PostBucklingPrediction {
    /// The `t < 0` partner: angles and lateral force flip sign.
    pub fn mirrored(&self) -> Self {
        PostBucklingPrediction {
            t: -self.t,
            q: self.q.iter().map(|x| -x).collect(),
            fx: self.fx,
            fy: -self.fy,
            energy: self.energy,
        }
    }
}

/// `t = √(δx/(b·μ_x))`, `q = α·t`, `Fx` at the mode's critical force,
/// `|Fy| = |α_{n+1}|·t` and `E = μ_eq·|K_eq|·δx/(2b)`.
pub fn post_buckling_prediction(
    solution: &BucklingSolution,
    mode: usize,
    delta_x: f64,
) -> Result<PostBucklingPrediction> {
    let m = solution
        .modes
        .get(mode)
        .ok_or_else(|| Error::InvalidParameter(format!("mode {mode} out of range")))?;
    if !(delta_x >= 0.0 && delta_x.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta_x must be >= 0, got {delta_x}")));
    }
    let t = (delta_x / (solution.b * m.mu_x)).sqrt();
    Ok(PostBucklingPrediction {
        t,
        q: m.joint_coefficients().iter().map(|a| a * t).collect(),
        fx: m.critical_force,
        fy: solution.k_sign() * m.force_coefficient() * t,
        energy: m.mu_eq * solution.k_eq_magnitude * delta_x / (2.0 * solution.b),
    })
}
