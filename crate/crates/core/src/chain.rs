//! Planar serial chain of identical segments.
//!
//! The base sits at the origin and the straight chain lies along +x with its
//! tip at `(2nb, 0)`. Segment `i` contributes joint angle `q_i`; the absolute
//! link angle after joint `j` is `S_j = q_1 + … + q_j`.
//!
//! The end load `F = (Fx, Fy)` is the force applied by the environment on the
//! tip. Static equilibrium at a prescribed tip position reads
//! `M(q) + Jᵀ(q)·F = 0`, so `F = −(J·Jᵀ)⁻¹·J·M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm_inf, pseudo_inverse_transpose_truncated, Matrix};
use crate::segment::{self, SegmentGeometry, SpringControl};

/// Torque-balance tolerance used to accept a least-squares end force.
pub const FORCE_RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    geom: SegmentGeometry,
    springs: Vec<SpringControl>,
}

impl ChainModel {
    pub fn new(geom: SegmentGeometry, springs: Vec<SpringControl>) -> Result<Self> {
        if springs.is_empty() {
            return Err(Error::InvalidParameter("a chain needs at least one segment".into()));
        }
        Ok(ChainModel { geom, springs })
    }

    /// `n` segments sharing one control.
    pub fn uniform(n: usize, geom: SegmentGeometry, springs: SpringControl) -> Result<Self> {
        ChainModel::new(geom, vec![springs; n])
    }

    pub fn n(&self) -> usize {
        self.springs.len()
    }

    pub fn geom(&self) -> &SegmentGeometry {
        &self.geom
    }

    pub fn springs(&self) -> &[SpringControl] {
        &self.springs
    }

    pub fn b(&self) -> f64 {
        self.geom.b()
    }

    /// Tip abscissa of the straight chain, `2nb`.
    pub fn straight_length(&self) -> f64 {
        2.0 * self.n() as f64 * self.b()
    }

    /// The common control when every segment shares it.
    pub fn uniform_springs(&self) -> Option<SpringControl> {
        let first = self.springs[0];
        self.springs.iter().all(|s| *s == first).then_some(first)
    }

    fn check(&self, config: &ChainConfig) -> Result<()> {
        if config.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} joint angles for a {}-segment chain",
                config.len(),
                self.n()
            )));
        }
        if let Some(&q) = config.q.iter().find(|q| !q.is_finite()) {
            return Err(Error::DegenerateConfiguration { q });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub q: Vec<f64>,
}

impl ChainConfig {
    pub fn new(q: Vec<f64>) -> Self {
        ChainConfig { q }
    }

    pub fn straight(n: usize) -> Self {
        ChainConfig { q: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn mirrored(&self) -> Self {
        ChainConfig { q: self.q.iter().map(|x| -x).collect() }
    }
}

impl From<Vec<f64>> for ChainConfig {
    fn from(q: Vec<f64>) -> Self {
        ChainConfig { q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EndLoad {
    pub fx: f64,
    pub fy: f64,
}

impl EndLoad {
    pub fn as_array(&self) -> [f64; 2] {
        [self.fx, self.fy]
    }
}

/// Tip displacement from `(2nb, 0)`; `dx` is positive toward the base.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deflection {
    pub dx: f64,
    pub dy: f64,
}

impl Deflection {
    pub fn new(dx: f64, dy: f64) -> Self {
        Deflection { dx, dy }
    }

    /// Tip position for this deflection.
    pub fn position(&self, model: &ChainModel) -> (f64, f64) {
        (model.straight_length() - self.dx, self.dy)
    }
}

fn partial_sums(q: &[f64]) -> Vec<f64> {
    q.iter()
        .scan(0.0, |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect()
}

/// Half-link weights: inner links span `2b`, the last one `b`.
fn eta(j: usize, n: usize) -> f64 {
    if j + 1 < n {
        2.0
    } else {
        1.0
    }
}

/// Tip position `(x, y)`.
pub fn forward_kinematics(model: &ChainModel, config: &ChainConfig) -> Result<(f64, f64)> {
    model.check(config)?;
    let b = model.b();
    let n = model.n();
    let sums = partial_sums(&config.q);
    let mut x = b;
    let mut y = 0.0;
    for (j, s) in sums.iter().enumerate() {
        x += b * eta(j, n) * s.cos();
        y += b * eta(j, n) * s.sin();
    }
    Ok((x, y))
}

pub fn deflection(model: &ChainModel, config: &ChainConfig) -> Result<Deflection> {
    let (x, y) = forward_kinematics(model, config)?;
    Ok(Deflection::new(model.straight_length() - x, y))
}

/// Position Jacobian `∂(x, y)/∂q`, 2×n.
pub fn jacobian(model: &ChainModel, config: &ChainConfig) -> Result<Matrix> {
    model.check(config)?;
    let b = model.b();
    let n = model.n();
    let sums = partial_sums(&config.q);
    let mut jac = Matrix::zeros(2, n);
    // suffix accumulation: column m sums the links at and beyond joint m
    let (mut sx, mut sy) = (0.0, 0.0);
    for m in (0..n).rev() {
        sx -= b * eta(m, n) * sums[m].sin();
        sy += b * eta(m, n) * sums[m].cos();
        jac[(0, m)] = sx;
        jac[(1, m)] = sy;
    }
    Ok(jac)
}

pub fn joint_torques(model: &ChainModel, config: &ChainConfig) -> Result<Vec<f64>> {
    model.check(config)?;
    config
        .q
        .iter()
        .zip(model.springs())
        .map(|(&q, s)| segment::segment_torque(model.geom(), s, q))
        .collect()
}

pub fn total_energy(model: &ChainModel, config: &ChainConfig) -> Result<f64> {
    model.check(config)?;
    config
        .q
        .iter()
        .zip(model.springs())
        .map(|(&q, s)| segment::segment_energy(model.geom(), s, q))
        .sum()
}

/// Residual of the loaded equilibrium at a prescribed tip deflection:
/// `n` torque-balance components followed by the two position mismatches.
pub fn equilibrium_residual(
    model: &ChainModel,
    config: &ChainConfig,
    load: &EndLoad,
    target: &Deflection,
) -> Result<Vec<f64>> {
    let torques = joint_torques(model, config)?;
    let jac = jacobian(model, config)?;
    let jtf = jac.transpose().mul_vec(&load.as_array())?;
    let (x, y) = forward_kinematics(model, config)?;
    let (tx, ty) = target.position(model);
    let mut r: Vec<f64> = torques.iter().zip(&jtf).map(|(m, f)| m + f).collect();
    r.push(x - tx);
    r.push(y - ty);
    Ok(r)
}

/// Least-squares end force explaining the joint torques.
///
/// At kinematic singularities (the straight chain) the Moore-Penrose solution
/// is used; the call fails only if that force leaves the torques unbalanced.
pub fn end_force_from_config(model: &ChainModel, config: &ChainConfig) -> Result<EndLoad> {
    let torques = joint_torques(model, config)?;
    let jac = jacobian(model, config)?;
    let neg: Vec<f64> = torques.iter().map(|m| -m).collect();
    let f = pseudo_inverse_transpose_truncated(&jac, &neg)?;
    let load = EndLoad { fx: f[0], fy: f[1] };
    let jtf = jac.transpose().mul_vec(&f)?;
    let residual: Vec<f64> = torques.iter().zip(&jtf).map(|(m, g)| m + g).collect();
    let scale = 1.0 + norm_inf(&torques);
    if norm_inf(&residual) > FORCE_RESIDUAL_TOLERANCE * scale {
        let gram = jac.matmul(&jac.transpose())?;
        let det = gram[(0, 0)] * gram[(1, 1)] - gram[(0, 1)] * gram[(1, 0)];
        // torques outside range(Jᵀ): no end force balances them
        return Err(Error::RankDeficient { smallest: det.abs() });
    }
    Ok(load)
}
