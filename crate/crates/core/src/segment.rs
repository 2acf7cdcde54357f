//! Mechanics of a single dual-triangle segment.
//!
//! Two rigid triangles share a passive revolute joint at the centre; an upper
//! and a lower spring span the gap between their outer vertices. The joint
//! angle `q` fixes both spring lengths, and the spring free lengths act as the
//! control input.
//!
//! Sign convention: [`segment_torque`] is the internal restoring torque, so
//! `dE/dq = -M(q)` and static equilibrium reads `M(q) + M_ext = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin kept from the angle where a spring collapses to zero length.
pub const ADMISSIBLE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentGeometry {
    a: f64,
    b: f64,
}

impl SegmentGeometry {
    /// `a` is the triangle half-height, `b` the half-width (half the
    /// joint-to-joint length of a segment). `a = 0` is accepted as the
    /// degenerate thin-triangle limit.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidParameter(format!("a must be finite and >= 0, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("b must be finite and > 0, got {b}")));
        }
        Ok(SegmentGeometry { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn beta(&self) -> f64 {
        (self.a / self.b).atan()
    }

    /// Largest admissible `|q|`; beyond it a spring length reaches zero.
    pub fn max_angle(&self) -> f64 {
        std::f64::consts::PI - 2.0 * self.beta() - ADMISSIBLE_MARGIN
    }

    pub fn state(&self, q: f64) -> SegmentState {
        SegmentState {
            q,
            theta1: 2.0 * self.beta() + q,
            theta2: 2.0 * self.beta() - q,
        }
    }

    fn check_admissible(&self, q: f64) -> Result<()> {
        if !q.is_finite() || q.abs() >= self.max_angle() {
            return Err(Error::DegenerateConfiguration { q });
        }
        Ok(())
    }
}

/// Stiffness and free length of the upper (1) and lower (2) springs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringControl {
    pub k1: f64,
    pub l1_0: f64,
    pub k2: f64,
    pub l2_0: f64,
}

impl SpringControl {
    pub fn new(k1: f64, l1_0: f64, k2: f64, l2_0: f64) -> Result<Self> {
        for (name, k) in [("k1", k1), ("k2", k2)] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {k}")));
            }
        }
        for (name, l) in [("L1_0", l1_0), ("L2_0", l2_0)] {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {l}")));
            }
        }
        Ok(SpringControl { k1, l1_0, k2, l2_0 })
    }

    pub fn symmetric(k: f64, l0: f64) -> Result<Self> {
        SpringControl::new(k, l0, k, l0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.k1 == self.k2 && self.l1_0 == self.l2_0
    }

    /// `(k, L⁰)` of a symmetric control.
    pub fn symmetric_parts(&self) -> Result<(f64, f64)> {
        if self.is_symmetric() {
            Ok((self.k1, self.l1_0))
        } else {
            Err(Error::AsymmetricSprings)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentState {
    pub q: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Spring lengths `L_i = 2c·cos(θ_i/2)`.
pub fn spring_lengths(geom: &SegmentGeometry, q: f64) -> Result<(f64, f64)> {
    geom.check_admissible(q)?;
    let s = geom.state(q);
    let c = geom.c();
    let l1 = 2.0 * c * (0.5 * s.theta1).cos();
    let l2 = 2.0 * c * (0.5 * s.theta2).cos();
    if l1 <= 0.0 || l2 <= 0.0 {
        return Err(Error::DegenerateConfiguration { q });
    }
    Ok((l1, l2))
}

/// Upper and lower spring torques `(M1, M2)`; valid for asymmetric controls.
pub fn torque_components(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<(f64, f64)> {
    let (l1, l2) = spring_lengths(geom, q)?;
    let s = geom.state(q);
    let c2 = geom.c().powi(2);
    let m1 = springs.k1 * (1.0 - springs.l1_0 / l1) * c2 * s.theta1.sin();
    let m2 = -springs.k2 * (1.0 - springs.l2_0 / l2) * c2 * s.theta2.sin();
    Ok((m1, m2))
}

/// Internal torque `M(q) = M1 + M2` of the segment.
pub fn segment_torque(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<f64> {
    let (m1, m2) = torque_components(geom, springs, q)?;
    Ok(m1 + m2)
}

/// Closed form of the torque for symmetric controls,
/// `2ck[c·cos 2β·sin q − L⁰·cos β·sin(q/2)]`.
pub fn symmetric_torque(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<f64> {
    let (k, l0) = springs.symmetric_parts()?;
    geom.check_admissible(q)?;
    let (c, beta) = (geom.c(), geom.beta());
    Ok(2.0 * c * k * (c * (2.0 * beta).cos() * q.sin() - l0 * beta.cos() * (0.5 * q).sin()))
}

/// `dM/dq` for symmetric controls.
pub fn torque_derivative(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<f64> {
    let (k, l0) = springs.symmetric_parts()?;
    geom.check_admissible(q)?;
    let (c, beta) = (geom.c(), geom.beta());
    Ok(c * k * (2.0 * c * (2.0 * beta).cos() * q.cos() - l0 * beta.cos() * (0.5 * q).cos()))
}

/// `dM/dq` from the spring components; valid for asymmetric controls.
pub fn torque_slope(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<f64> {
    let (l1, l2) = spring_lengths(geom, q)?;
    let s = geom.state(q);
    let c = geom.c();
    let c2 = c * c;
    let dl1 = -c * (0.5 * s.theta1).sin();
    let dl2 = c * (0.5 * s.theta2).sin();
    let d1 = springs.l1_0 / (l1 * l1) * dl1 * s.theta1.sin() + (1.0 - springs.l1_0 / l1) * s.theta1.cos();
    let d2 = springs.l2_0 / (l2 * l2) * dl2 * s.theta2.sin() - (1.0 - springs.l2_0 / l2) * s.theta2.cos();
    Ok(c2 * (springs.k1 * d1 - springs.k2 * d2))
}

/// `L⁰ − 2b(1 − (a/b)²)`: positive exactly when the torque-angle curve is
/// monotonic and the straight segment is the single stable equilibrium.
pub fn monotonicity_margin(geom: &SegmentGeometry, springs: &SpringControl) -> Result<f64> {
    let (_, l0) = springs.symmetric_parts()?;
    let ratio = geom.a() / geom.b();
    Ok(l0 - 2.0 * geom.b() * (1.0 - ratio * ratio))
}

/// Equivalent joint stiffness `K_eq = M'(0) = k[2(b² − a²) − b·L⁰]`.
///
/// Negative values mean a restoring joint (the stable, monotonic regime).
pub fn equivalent_stiffness(geom: &SegmentGeometry, springs: &SpringControl) -> Result<f64> {
    let (k, l0) = springs.symmetric_parts()?;
    let (a, b) = (geom.a(), geom.b());
    Ok(k * (2.0 * (b * b - a * a) - b * l0))
}

/// Elastic energy `½k1(L1 − L1⁰)² + ½k2(L2 − L2⁰)²`.
pub fn segment_energy(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> Result<f64> {
    let (l1, l2) = spring_lengths(geom, q)?;
    Ok(0.5 * springs.k1 * (l1 - springs.l1_0).powi(2) + 0.5 * springs.k2 * (l2 - springs.l2_0).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit() -> (SegmentGeometry, SpringControl) {
        (SegmentGeometry::new(1.0, 1.0).unwrap(), SpringControl::symmetric(1.0, 1.0).unwrap())
    }

    /// Places the four spring anchors of the mechanism and measures the
    /// distances directly. Joint at the origin; left triangle fixed with outer
    /// vertices (−b, ±a); right triangle vertices (b, ±a) rotated by q.
    fn anchor_oracle(a: f64, b: f64, q: f64) -> (f64, f64) {
        let rot = |x: f64, y: f64| (x * q.cos() - y * q.sin(), x * q.sin() + y * q.cos());
        let (ux, uy) = rot(b, a);
        let (lx, ly) = rot(b, -a);
        let upper = ((ux + b).powi(2) + (uy - a).powi(2)).sqrt();
        let lower = ((lx + b).powi(2) + (ly + a).powi(2)).sqrt();
        (upper, lower)
    }

    fn fd(f: impl Fn(f64) -> f64, q: f64) -> f64 {
        let h = 1e-6;
        (f(q + h) - f(q - h)) / (2.0 * h)
    }

    #[test]
    fn slope_matches_closed_form_and_differences() {
        let g = SegmentGeometry::new(0.7, 1.3).unwrap();
        let sym = SpringControl::symmetric(2.0, 0.9).unwrap();
        let asym = SpringControl::new(1.5, 0.8, 0.6, 1.4).unwrap();
        let h = 1e-6;
        for i in -10..=10 {
            let q = 0.1 * i as f64;
            let closed = torque_derivative(&g, &sym, q).unwrap();
            assert!((torque_slope(&g, &sym, q).unwrap() - closed).abs() < 1e-12);
            let fd = (segment_torque(&g, &asym, q + h).unwrap() - segment_torque(&g, &asym, q - h).unwrap()) / (2.0 * h);
            assert!((torque_slope(&g, &asym, q).unwrap() - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn flat_mechanism_lengths() {
        let (g, _) = unit();
        let (l1, l2) = spring_lengths(&g, 0.0).unwrap();
        assert!((l1 - 2.0).abs() < 1e-15 && (l2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn collapsed_spring_is_degenerate() {
        let (g, _) = unit();
        assert!(matches!(
            spring_lengths(&g, PI / 2.0),
            Err(Error::DegenerateConfiguration { .. })
        ));
        // just inside the bound the lower spring is at full span 2c
        let (_, l2) = spring_lengths(&g, PI / 2.0 - 1e-6).unwrap();
        assert!((l2 - 2.0 * 2f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn lengths_match_anchor_geometry() {
        let g = SegmentGeometry::new(1.0, 2.0).unwrap();
        let (l1, l2) = spring_lengths(&g, 0.3).unwrap();
        let (o1, o2) = anchor_oracle(1.0, 2.0, 0.3);
        assert!((l1 - o1).abs() < 1e-13 && (l2 - o2).abs() < 1e-13);
    }

    #[test]
    fn symmetric_springs_zero_torque_at_origin() {
        let g = SegmentGeometry::new(0.7, 1.3).unwrap();
        let s = SpringControl::symmetric(2.0, 0.4).unwrap();
        assert!(segment_torque(&g, &s, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn general_and_closed_form_torque_agree() {
        let (g, s) = unit();
        let general = segment_torque(&g, &s, 0.2).unwrap();
        let closed = symmetric_torque(&g, &s, 0.2).unwrap();
        assert!((general - closed).abs() < 1e-12);
    }

    #[test]
    fn odd_symmetry_examples() {
        let (g, s) = unit();
        for q in [0.1, 0.5, 1.0] {
            let p = segment_torque(&g, &s, q).unwrap();
            let m = segment_torque(&g, &s, -q).unwrap();
            assert!((p + m).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_at_origin_unit_case() {
        let (g, s) = unit();
        assert!((torque_derivative(&g, &s, 0.0).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_positive_for_thin_triangles_without_preload() {
        let g = SegmentGeometry::new(0.5, 1.0).unwrap();
        let s = SpringControl::symmetric(1.0, 0.0).unwrap();
        let d = torque_derivative(&g, &s, 0.0).unwrap();
        let want = 2.0 * g.c().powi(2) * (2.0 * g.beta()).cos();
        assert!((d - want).abs() < 1e-14 && d > 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = SegmentGeometry::new(0.8, 1.1).unwrap();
        let s = SpringControl::symmetric(1.5, 0.9).unwrap();
        for i in 0..20 {
            let q = -1.2 + 2.4 * i as f64 / 19.0;
            let d = torque_derivative(&g, &s, q).unwrap();
            let num = fd(|x| segment_torque(&g, &s, x).unwrap(), q);
            assert!((d - num).abs() <= 1e-6 * d.abs().max(1e-3), "q={q}: {d} vs {num}");
        }
    }

    #[test]
    fn monotonicity_examples() {
        let (g, s) = unit();
        assert_eq!(monotonicity_margin(&g, &s).unwrap(), 1.0);
        let g = SegmentGeometry::new(0.5, 1.0).unwrap();
        assert!((monotonicity_margin(&g, &s).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn margin_sign_matches_derivative_sign_on_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let ratio = 0.2 + 1.8 * i as f64 / 19.0;
                let l0 = 3.0 * j as f64 / 19.0;
                let g = SegmentGeometry::new(ratio, 1.0).unwrap();
                let s = SpringControl::symmetric(1.0, l0).unwrap();
                let margin = monotonicity_margin(&g, &s).unwrap();
                if margin.abs() > 1e-9 {
                    let d0 = torque_derivative(&g, &s, 0.0).unwrap();
                    assert_eq!(margin > 0.0, -d0 > 0.0, "a/b={ratio} L0={l0}");
                }
            }
        }
    }

    #[test]
    fn stiffness_examples() {
        let (g, s) = unit();
        assert_eq!(equivalent_stiffness(&g, &s).unwrap(), -1.0);
        let g = SegmentGeometry::new(0.0, 1.0).unwrap();
        let s = SpringControl::symmetric(1.0, 0.0).unwrap();
        assert_eq!(equivalent_stiffness(&g, &s).unwrap(), 2.0);
    }

    #[test]
    fn energy_examples() {
        let g = SegmentGeometry::new(1.0, 1.0).unwrap();
        let free = SpringControl::symmetric(1.0, 2.0).unwrap();
        assert!(segment_energy(&g, &free, 0.0).unwrap().abs() < 1e-15);
        let (g, s) = unit();
        assert!((segment_energy(&g, &s, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_gradient_is_minus_torque() {
        let g = SegmentGeometry::new(0.6, 1.0).unwrap();
        let s = SpringControl::new(1.3, 0.8, 0.7, 1.4).unwrap();
        for i in 0..20 {
            let q = -1.5 + 3.0 * i as f64 / 19.0;
            let m = segment_torque(&g, &s, q).unwrap();
            let de = fd(|x| segment_energy(&g, &s, x).unwrap(), q);
            assert!((de + m).abs() <= 1e-6 * m.abs().max(1e-3), "q={q}");
        }
    }

    #[test]
    fn symmetric_only_operations_reject_asymmetric_controls() {
        let g = SegmentGeometry::new(1.0, 1.0).unwrap();
        let s = SpringControl::new(1.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(torque_derivative(&g, &s, 0.0), Err(Error::AsymmetricSprings));
        assert_eq!(monotonicity_margin(&g, &s), Err(Error::AsymmetricSprings));
        assert_eq!(equivalent_stiffness(&g, &s), Err(Error::AsymmetricSprings));
        assert!(segment_torque(&g, &s, 0.3).is_ok());
    }

    #[test]
    fn invalid_parameters() {
        assert!(SegmentGeometry::new(1.0, 0.0).is_err());
        assert!(SegmentGeometry::new(-0.1, 1.0).is_err());
        assert!(SpringControl::symmetric(0.0, 1.0).is_err());
        assert!(SpringControl::symmetric(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn torque_is_odd_and_matches_closed_form(
            a in 0.05f64..2.0, b in 0.2f64..2.0, k in 0.1f64..5.0, l0 in 0.0f64..4.0, u in -0.98f64..0.98,
        ) {
            let g = SegmentGeometry::new(a, b).unwrap();
            let s = SpringControl::symmetric(k, l0).unwrap();
            let q = u * g.max_angle();
            let m = segment_torque(&g, &s, q).unwrap();
            let scale = k * g.c() * (g.c() + l0);
            prop_assert!((m + segment_torque(&g, &s, -q).unwrap()).abs() <= 1e-12 * scale);
            prop_assert!((m - symmetric_torque(&g, &s, q).unwrap()).abs() <= 1e-12 * scale);
        }

        #[test]
        fn stiffness_equals_derivative_at_origin(
            a in 0.0f64..2.0, b in 0.2f64..2.0, k in 0.1f64..5.0, l0 in 0.0f64..4.0,
        ) {
            let g = SegmentGeometry::new(a, b).unwrap();
            let s = SpringControl::symmetric(k, l0).unwrap();
            let keq = equivalent_stiffness(&g, &s).unwrap();
            let d0 = torque_derivative(&g, &s, 0.0).unwrap();
            prop_assert!((keq - d0).abs() <= 1e-12 * (1.0 + keq.abs()));
        }
    }
}
