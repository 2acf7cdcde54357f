//! Loaded equilibria at a prescribed tip deflection.
//!
//! An equilibrium is a critical point of the total elastic energy on the set
//! of configurations that place the tip at the target. The Lagrange multiplier
//! of the position constraint is the end load. For `n = 4` the constraint set
//! is charted by two free angles, the remaining two follow from two-link
//! inverse kinematics; this gives the energy landscapes exported for contour
//! plots and seeds the full Newton solve.

use std::cmp::Ordering;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::buckling::{post_buckling_prediction, solve_buckling};
use crate::chain::{
    equilibrium_residual, forward_kinematics, jacobian, joint_torques, total_energy, ChainConfig,
    ChainModel, Deflection, EndLoad,
};
use crate::error::{Error, Result};
use crate::numerics::{newton_solve, norm_inf, pseudo_inverse_transpose_truncated, symmetric_eigen, Matrix};
use crate::shape::{shape_label, ShapeLabel};

/// Acceptance bound on the equilibrium residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Projected-Hessian eigenvalues within this band are treated as zero.
pub const CURVATURE_TOLERANCE: f64 = 1e-8;
/// Step of the central difference used for the Lagrangian Hessian.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Position mismatch allowed for an inverse-kinematics completion.
pub const IK_TOLERANCE: f64 = 1e-10;
/// Equilibria closer than this in joint space are the same point.
pub const DEDUP_RADIUS: f64 = 1e-4;
/// Random Newton starts per search.
pub const GAUSSIAN_STARTS: usize = 64;
/// Standard deviation of the random starts, radians.
pub const GAUSSIAN_SIGMA: f64 = 0.2;
const SEED: u64 = 0x7e45_e971;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Stability {
    StableMinimum,
    Saddle,
    Maximum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub config: ChainConfig,
    pub load: EndLoad,
    pub deflection: Deflection,
    pub energy: f64,
    pub stability: Stability,
    pub shape_label: ShapeLabel,
}

/// Ranges and resolution of a landscape grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub range_i: (f64, f64),
    pub range_j: (f64, f64),
    pub steps_i: usize,
    pub steps_j: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_PI_2;
        GridSpec::square(h, 201)
    }
}

impl GridSpec {
    /// `steps × steps` nodes over `[−half, half]²`.
    pub fn square(half: f64, steps: usize) -> Self {
        GridSpec {
            range_i: (-half, half),
            range_j: (-half, half),
            steps_i: steps,
            steps_j: steps,
        }
    }

    /// Square grid sized to the post-buckling amplitude at `dx`.
    pub fn around_straight(model: &ChainModel, target: &Deflection, steps: usize) -> Self {
        let amp = (target.dx.abs().max(target.dy.abs()) / model.b()).sqrt();
        GridSpec::square((3.0 * amp + 0.05).min(std::f64::consts::FRAC_PI_2), steps)
    }

    fn axis(range: (f64, f64), steps: usize) -> Vec<f64> {
        (0..steps)
            .map(|k| range.0 + (range.1 - range.0) * k as f64 / (steps - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.steps_i < 2 || self.steps_j < 2 {
            return Err(Error::InvalidParameter("landscape grid needs at least 2x2 nodes".into()));
        }
        for (lo, hi) in [self.range_i, self.range_j] {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad grid range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// One inverse-kinematics completion of a partially known configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    /// 0 for the non-negative relative angle between the two unknown links, 1 otherwise.
    pub branch: usize,
    pub config: ChainConfig,
}

fn wrap(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut r = (a + pi).rem_euclid(2.0 * pi) - pi;
    if r <= -pi {
        r += 2.0 * pi;
    }
    r
}

fn link_weight(j: usize, n: usize) -> f64 {
    if j + 1 < n {
        2.0
    } else {
        1.0
    }
}

/// Completes a configuration in which all but two joint angles are known.
///
/// The two unknown joints `u < v` split the chain into a rigid link from `u`
/// to `v` and a rigid tail from `v`, so the tip condition is classical
/// two-link inverse kinematics with up to two elbow branches.
pub fn reduce_two_link(model: &ChainModel, known: &[(usize, f64)], target: &Deflection) -> Result<Vec<Completion>> {
    let n = model.n();
    if n < 2 || known.len() + 2 != n {
        return Err(Error::InvalidParameter(format!(
            "{} known angles for a {n}-segment chain; exactly two must be free",
            known.len()
        )));
    }
    let mut q = vec![f64::NAN; n];
    for &(i, v) in known {
        if i >= n || !q[i].is_nan() {
            return Err(Error::InvalidParameter(format!("bad or repeated joint index {i}")));
        }
        q[i] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&i| q[i].is_nan()).collect();
    let (u, v) = (free[0], free[1]);
    let b = model.b();

    // fixed part: base offset plus links before u
    let (mut px, mut py) = (b, 0.0);
    let mut s = 0.0;
    for j in 0..u {
        s += q[j];
        px += b * link_weight(j, n) * s.cos();
        py += b * link_weight(j, n) * s.sin();
    }
    let s_before_u = s;
    // link vector from u (relative to the absolute angle after joint u)
    let (mut mx, mut my, mut c) = (0.0, 0.0, 0.0);
    for j in u..v {
        if j > u {
            c += q[j];
        }
        mx += b * link_weight(j, n) * c.cos();
        my += b * link_weight(j, n) * c.sin();
    }
    let c_before_v = c;
    let (mut ex, mut ey, mut d) = (0.0, 0.0, 0.0);
    for j in v..n {
        if j > v {
            d += q[j];
        }
        ex += b * link_weight(j, n) * d.cos();
        ey += b * link_weight(j, n) * d.sin();
    }

    let (tx, ty) = target.position(model);
    let (rx, ry) = (tx - px, ty - py);
    let l1 = mx.hypot(my);
    let l2 = ex.hypot(ey);
    let r2 = rx * rx + ry * ry;
    let unreachable = Error::Unreachable {
        dx: target.dx,
        dy: target.dy,
    };
    if l1 == 0.0 || l2 == 0.0 {
        return Err(unreachable);
    }
    let cos_gamma = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if cos_gamma.abs() > 1.0 + 1e-12 {
        return Err(unreachable);
    }
    let gamma = cos_gamma.clamp(-1.0, 1.0).acos();
    let (phi_m, phi_e) = (my.atan2(mx), ey.atan2(ex));
    let mut out: Vec<Completion> = Vec::with_capacity(2);
    for (branch, g) in [(0usize, gamma), (1, -gamma)] {
        if branch == 1 && gamma == 0.0 {
            break;
        }
        let a = ry.atan2(rx) - (l2 * g.sin()).atan2(l1 + l2 * g.cos());
        let theta_u = a - phi_m;
        let theta_v = a + g - phi_e;
        let mut cfg = q.clone();
        cfg[u] = wrap(theta_u - s_before_u);
        cfg[v] = wrap(theta_v - (theta_u + c_before_v));
        let config = ChainConfig::new(cfg);
        let (x, y) = forward_kinematics(model, &config)?;
        if (x - tx).abs().max((y - ty).abs()) <= IK_TOLERANCE * (1.0 + model.straight_length()) {
            out.push(Completion { branch, config });
        }
    }
    if out.is_empty() {
        return Err(unreachable);
    }
    Ok(out)
}

/// Central-difference gradient and pure second differences at a grid node.
type Stencil = ((f64, f64), (f64, f64));

/// Grid cell flagged as a discrete critical point of one branch sheet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCell {
    pub branch: usize,
    pub i: usize,
    pub j: usize,
    pub kind: Stability,
    pub config: ChainConfig,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLandscape {
    /// Joint indices on the two grid axes.
    pub pair: (usize, usize),
    pub target: Deflection,
    pub axis_i: Vec<f64>,
    pub axis_j: Vec<f64>,
    /// Row-major over `(axis_i, axis_j)`; `None` marks an infeasible cell.
    pub energy: Vec<Option<f64>>,
    /// Elbow branch attaining `energy`.
    pub branch: Vec<Option<usize>>,
    /// Energy of each elbow branch separately.
    pub branch_energy: [Vec<Option<f64>>; 2],
    /// Completed configurations per branch, kept for critical-point refinement.
    #[serde(skip)]
    branch_config: [Vec<Option<Vec<f64>>>; 2],
}

impl EnergyLandscape {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis_i.len(), self.axis_j.len())
    }

    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.energy[i * self.axis_j.len() + j]
    }

    pub fn cell_diameter(&self) -> f64 {
        let di = self.axis_i[1] - self.axis_i[0];
        let dj = self.axis_j[1] - self.axis_j[0];
        di.hypot(dj)
    }

    /// Interior cells that are strict extrema or saddles of a branch sheet.
    ///
    /// A saddle is flagged either by at least four sign changes of
    /// `E − E(cell)` around its eight neighbours, or by a 2×2 block of nodes
    /// over which both components of the discrete gradient change sign while
    /// the discrete Hessian is indefinite; the second test catches saddles
    /// that fall between nodes of a coarse grid. Saddle flags next to a strict
    /// extremum, and all but the flattest cell of a cluster of adjacent saddle
    /// flags, are discretization artifacts and are dropped.
    pub fn critical_cells(&self) -> Vec<CriticalCell> {
        let (ni, nj) = self.shape();
        let ring = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];
        let mut out = Vec::new();
        for branch in 0..2 {
            let grid = &self.branch_energy[branch];
            let at = |i: usize, j: usize| grid[i * nj + j];
            // central-difference gradient and pure second differences from the
            // five-point stencil, which survives next to the fold of the sheet
            let mut stencil: Vec<Option<Stencil>> = vec![None; ni * nj];
            for i in 1..ni.saturating_sub(1) {
                for j in 1..nj.saturating_sub(1) {
                    let (Some(e0), Some(n), Some(s), Some(w), Some(e)) =
                        (at(i, j), at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1))
                    else {
                        continue;
                    };
                    stencil[i * nj + j] = Some(((0.5 * (s - n), 0.5 * (e - w)), (s + n - 2.0 * e0, e + w - 2.0 * e0)));
                }
            }
            let cell_at = |i: usize, j: usize, kind: Stability| CriticalCell {
                branch,
                i,
                j,
                kind,
                config: ChainConfig::new(
                    self.branch_config[branch][i * nj + j].clone().expect("finite cell has a config"),
                ),
                energy: grid[i * nj + j].expect("finite cell"),
            };
            let mut extrema: Vec<CriticalCell> = Vec::new();
            let mut saddles: Vec<(f64, CriticalCell)> = Vec::new();
            for i in 1..ni.saturating_sub(1) {
                for j in 1..nj.saturating_sub(1) {
                    let Some(e0) = at(i, j) else { continue };
                    let d: Option<Vec<f64>> = ring
                        .iter()
                        .map(|&(di, dj)| at((i as i64 + di) as usize, (j as i64 + dj) as usize).map(|e| e - e0))
                        .collect();
                    let Some(d) = d else { continue };
                    if d.iter().all(|&x| x > 0.0) {
                        extrema.push(cell_at(i, j, Stability::StableMinimum));
                    } else if d.iter().all(|&x| x < 0.0) {
                        extrema.push(cell_at(i, j, Stability::Maximum));
                    } else {
                        let changes = (0..8).filter(|&k| (d[k] > 0.0) != (d[(k + 1) % 8] > 0.0)).count();
                        if changes >= 4 {
                            // ring order: index 1/5 are ∓i, 3/7 are ∓j neighbours
                            let grad = (0.5 * (d[5] - d[1]), 0.5 * (d[3] - d[7]));
                            saddles.push((grad.0.hypot(grad.1), cell_at(i, j, Stability::Saddle)));
                        }
                    }
                }
            }
            for i in 1..ni.saturating_sub(2) {
                for j in 1..nj.saturating_sub(2) {
                    let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
                    let info: Option<Vec<(usize, usize, Stencil)>> = corners
                        .iter()
                        .map(|&(a, b)| stencil[a * nj + b].map(|st| (a, b, st)))
                        .collect();
                    let Some(info) = info else { continue };
                    let spans = |f: fn(&(f64, f64)) -> f64| {
                        info.iter().any(|c| f(&c.2 .0) <= 0.0) && info.iter().any(|c| f(&c.2 .0) >= 0.0)
                    };
                    if !(spans(|g| g.0) && spans(|g| g.1)) {
                        continue;
                    }
                    let e = |k: usize| at(corners[k].0, corners[k].1).expect("stencil centre is finite");
                    let hij = e(3) - e(1) - e(2) + e(0);
                    let norm = |g: (f64, f64)| g.0.hypot(g.1);
                    let (a, b, (g, (hii, hjj))) = *info
                        .iter()
                        .min_by(|x, y| norm(x.2 .0).total_cmp(&norm(y.2 .0)))
                        .expect("four corners");
                    if hii * hjj - hij * hij < 0.0 {
                        saddles.push((norm(g), cell_at(a, b, Stability::Saddle)));
                    }
                }
            }
            let near = |a: &CriticalCell, b: &CriticalCell, r: usize| a.i.abs_diff(b.i) <= r && a.j.abs_diff(b.j) <= r;
            saddles.retain(|(_, s)| !extrema.iter().any(|e| near(e, s, 2)));
            saddles.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1.i, a.1.j).cmp(&(b.1.i, b.1.j))));
            let mut kept: Vec<CriticalCell> = Vec::new();
            for (_, s) in saddles {
                if !kept.iter().any(|k| near(k, &s, 1)) {
                    kept.push(s);
                }
            }
            kept.sort_by_key(|c| (c.i, c.j));
            out.extend(extrema);
            out.extend(kept);
        }
        out
    }
}

fn check_four(model: &ChainModel) -> Result<()> {
    if model.n() != 4 {
        return Err(Error::InvalidParameter(format!(
            "energy landscapes are defined for 4 segments, got {}",
            model.n()
        )));
    }
    Ok(())
}

/// Rejects targets farther from the base joint than the chain can reach.
pub fn check_reach(model: &ChainModel, target: &Deflection) -> Result<()> {
    let (tx, ty) = target.position(model);
    let reach = (2 * model.n() - 1) as f64 * model.b();
    let dist = (tx - model.b()).hypot(ty);
    if !(target.dx.is_finite() && target.dy.is_finite()) || dist > reach * (1.0 + 1e-12) {
        return Err(Error::Unreachable {
            dx: target.dx,
            dy: target.dy,
        });
    }
    Ok(())
}

/// Total energy over a grid of two joint angles, with the other two angles
/// completed by inverse kinematics.
pub fn energy_landscape(
    model: &ChainModel,
    target: &Deflection,
    pair: (usize, usize),
    grid: &GridSpec,
) -> Result<EnergyLandscape> {
    check_four(model)?;
    grid.validate()?;
    check_reach(model, target)?;
    if pair.0 == pair.1 || pair.0 >= 4 || pair.1 >= 4 {
        return Err(Error::InvalidParameter(format!("bad joint pair {pair:?}")));
    }
    let axis_i = GridSpec::axis(grid.range_i, grid.steps_i);
    let axis_j = GridSpec::axis(grid.range_j, grid.steps_j);
    let nj = axis_j.len();
    let cells: Vec<[Option<(f64, Vec<f64>)>; 2]> = (0..axis_i.len() * nj)
        .into_par_iter()
        .map(|k| {
            let known = [(pair.0, axis_i[k / nj]), (pair.1, axis_j[k % nj])];
            let mut slot: [Option<(f64, Vec<f64>)>; 2] = [None, None];
            if let Ok(completions) = reduce_two_link(model, &known, target) {
                for c in completions {
                    if let Ok(e) = total_energy(model, &c.config) {
                        slot[c.branch] = Some((e, c.config.q));
                    }
                }
            }
            slot
        })
        .collect();

    let mut energy = Vec::with_capacity(cells.len());
    let mut branch = Vec::with_capacity(cells.len());
    let mut branch_energy = [Vec::with_capacity(cells.len()), Vec::with_capacity(cells.len())];
    let mut branch_config = [Vec::with_capacity(cells.len()), Vec::with_capacity(cells.len())];
    for slot in cells {
        let best = match (&slot[0], &slot[1]) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { 1 } else { 0 }),
            (Some(_), None) => Some(0),
            (None, Some(_)) => Some(1),
            (None, None) => None,
        };
        energy.push(best.map(|k| slot[k].as_ref().unwrap().0));
        branch.push(best);
        for (k, s) in slot.into_iter().enumerate() {
            branch_energy[k].push(s.as_ref().map(|x| x.0));
            branch_config[k].push(s.map(|x| x.1));
        }
    }
    Ok(EnergyLandscape {
        pair,
        target: *target,
        axis_i,
        axis_j,
        energy,
        branch,
        branch_energy,
        branch_config,
    })
}

fn lagrangian_gradient(model: &ChainModel, q: &[f64], load: &EndLoad) -> Result<Vec<f64>> {
    let cfg = ChainConfig::new(q.to_vec());
    let m = joint_torques(model, &cfg)?;
    let jtf = jacobian(model, &cfg)?.transpose().mul_vec(&load.as_array())?;
    Ok(m.iter().zip(&jtf).map(|(a, b)| -a - b).collect())
}

/// Stability from the Hessian of `E − F·p` restricted to the null space of the
/// position Jacobian.
pub fn classify(model: &ChainModel, eq: &Equilibrium) -> Result<Stability> {
    classify_at(model, &eq.config, &eq.load)
}

fn classify_at(model: &ChainModel, config: &ChainConfig, load: &EndLoad) -> Result<Stability> {
    let n = model.n();
    let q = config.as_slice();
    let mut hess = Matrix::zeros(n, n);
    for k in 0..n {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[k] += HESSIAN_STEP;
        qm[k] -= HESSIAN_STEP;
        let gp = lagrangian_gradient(model, &qp, load)?;
        let gm = lagrangian_gradient(model, &qm, load)?;
        for r in 0..n {
            hess[(r, k)] = (gp[r] - gm[r]) / (2.0 * HESSIAN_STEP);
        }
    }
    let mut sym = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            sym[(r, c)] = 0.5 * (hess[(r, c)] + hess[(c, r)]);
        }
    }
    let jac = jacobian(model, config)?;
    let (jvals, jvecs) = symmetric_eigen(&jac.transpose().matmul(&jac)?)?;
    let largest = jvals.last().copied().unwrap_or(0.0).max(1.0);
    let null: Vec<Vec<f64>> = (0..n)
        .filter(|&k| jvals[k] <= 1e-9 * largest)
        .map(|k| jvecs.column(k))
        .collect();
    if null.is_empty() {
        return Ok(Stability::StableMinimum);
    }
    let d = null.len();
    let mut proj = Matrix::zeros(d, d);
    for a in 0..d {
        let hz = sym.mul_vec(&null[a])?;
        for b in 0..d {
            proj[(b, a)] = null[b].iter().zip(&hz).map(|(x, y)| x * y).sum();
        }
    }
    let (vals, _) = symmetric_eigen(&proj)?;
    if let Some(&v) = vals.iter().find(|v| v.abs() <= CURVATURE_TOLERANCE) {
        return Err(Error::Indeterminate { eigenvalue: v });
    }
    Ok(if vals.iter().all(|&v| v > 0.0) {
        Stability::StableMinimum
    } else if vals.iter().all(|&v| v < 0.0) {
        Stability::Maximum
    } else {
        Stability::Saddle
    })
}

fn build_equilibrium(model: &ChainModel, q: Vec<f64>, load: EndLoad, target: &Deflection) -> Result<Equilibrium> {
    let config = ChainConfig::new(q);
    let r = equilibrium_residual(model, &config, &load, target)?;
    if norm_inf(&r) > RESIDUAL_TOLERANCE {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: norm_inf(&r),
        });
    }
    let stability = classify_at(model, &config, &load)?;
    Ok(Equilibrium {
        energy: total_energy(model, &config)?,
        shape_label: shape_label(config.as_slice()),
        deflection: *target,
        config,
        load,
        stability,
    })
}

/// Least-squares load for a seed configuration; zero if it cannot be formed.
fn seed_load(model: &ChainModel, q: &[f64]) -> EndLoad {
    let cfg = ChainConfig::new(q.to_vec());
    let guess = || -> Result<EndLoad> {
        let m = joint_torques(model, &cfg)?;
        let neg: Vec<f64> = m.iter().map(|x| -x).collect();
        let f = pseudo_inverse_transpose_truncated(&jacobian(model, &cfg)?, &neg)?;
        Ok(EndLoad { fx: f[0], fy: f[1] })
    };
    guess().unwrap_or_default()
}

fn seeds(model: &ChainModel, target: &Deflection, extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = model.n();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let with_load = |q: Vec<f64>, load: EndLoad| {
        let mut x = q;
        x.push(load.fx);
        x.push(load.fy);
        x
    };
    for q in extra {
        out.push(with_load(q.clone(), seed_load(model, q)));
    }
    if n == 4 {
        let grid = GridSpec::around_straight(model, target, 101);
        if let Ok(land) = energy_landscape(model, target, (0, 3), &grid) {
            for cell in land.critical_cells() {
                let q = cell.config.q;
                let load = seed_load(model, &q);
                out.push(with_load(q, load));
            }
        }
    }
    if target.dx > 0.0 {
        if let Ok(sol) = solve_buckling(model) {
            for k in 0..sol.modes.len() {
                if let Ok(p) = post_buckling_prediction(&sol, k, target.dx) {
                    let m = p.mirrored();
                    out.push(with_load(p.q, EndLoad { fx: p.fx, fy: p.fy }));
                    out.push(with_load(m.q, EndLoad { fx: m.fx, fy: m.fy }));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let normal = Normal::new(0.0, GAUSSIAN_SIGMA).expect("positive sigma");
    for _ in 0..GAUSSIAN_STARTS {
        let q: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let load = seed_load(model, &q);
        out.push(with_load(q, load));
    }
    if target.dy == 0.0 {
        // the equilibrium set is symmetric under q ↦ −q, Fy ↦ −Fy
        let mirrored: Vec<Vec<f64>> = out
            .iter()
            .map(|x| {
                let mut m: Vec<f64> = x[..n].iter().map(|v| -v).collect();
                m.push(x[n]);
                m.push(-x[n + 1]);
                m
            })
            .collect();
        out.extend(mirrored);
    }
    out
}

fn energy_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

/// Orders by energy; near-equal energies put the configuration with `q1 < 0` first.
fn sort_equilibria(eqs: &mut [Equilibrium]) {
    eqs.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut start = 0;
    while start < eqs.len() {
        let mut end = start + 1;
        while end < eqs.len() && energy_tie(eqs[start].energy, eqs[end].energy) {
            end += 1;
        }
        eqs[start..end].sort_by(|a, b| a.config.q[0].total_cmp(&b.config.q[0]));
        start = end;
    }
}

fn dedup(eqs: Vec<Equilibrium>) -> Vec<Equilibrium> {
    let mut out: Vec<Equilibrium> = Vec::new();
    for e in eqs {
        let dup = out.iter().any(|o| {
            o.config
                .q
                .iter()
                .zip(&e.config.q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= DEDUP_RADIUS
        });
        if !dup {
            out.push(e);
        }
    }
    out
}

/// All equilibria found from landscape, buckling-mode and random starts.
pub fn find_equilibria(model: &ChainModel, target: &Deflection) -> Result<Vec<Equilibrium>> {
    find_equilibria_seeded(model, target, &[])
}

/// [`find_equilibria`] with additional starting configurations.
pub fn find_equilibria_seeded(model: &ChainModel, target: &Deflection, extra: &[Vec<f64>]) -> Result<Vec<Equilibrium>> {
    let n = model.n();
    if n < 2 {
        return Err(Error::InvalidParameter("equilibrium search needs n >= 2".into()));
    }
    check_reach(model, target)?;
    if target.dx == 0.0 && target.dy == 0.0 {
        // the fully extended chain is the only configuration reaching the target
        let q = vec![0.0; n];
        let load = seed_load(model, &q);
        return Ok(vec![build_equilibrium(model, q, load, target)?]);
    }
    let starts = seeds(model, target, extra);
    let eqs = solve_from(model, target, &starts);
    if eqs.is_empty() {
        return Err(Error::NoEquilibriumFound {
            dx: target.dx,
            dy: target.dy,
        });
    }
    Ok(eqs)
}

/// Newton-refines each critical cell of a landscape into a classified equilibrium.
///
/// Cells whose refinement fails or lands on a degenerate point are dropped;
/// the result is deduplicated and sorted like [`find_equilibria`].
pub fn refine_critical_cells(model: &ChainModel, landscape: &EnergyLandscape) -> Result<Vec<Equilibrium>> {
    let target = &landscape.target;
    check_reach(model, target)?;
    if target.dx == 0.0 && target.dy == 0.0 {
        return find_equilibria(model, target);
    }
    let starts: Vec<Vec<f64>> = landscape
        .critical_cells()
        .into_iter()
        .map(|c| {
            let load = seed_load(model, &c.config.q);
            let mut x = c.config.q;
            x.extend(load.as_array());
            x
        })
        .collect();
    Ok(solve_from(model, target, &starts))
}

fn solve_from(model: &ChainModel, target: &Deflection, starts: &[Vec<f64>]) -> Vec<Equilibrium> {
    let n = model.n();
    let mut eqs: Vec<Equilibrium> = starts
        .par_iter()
        .filter_map(|x0| {
            let f = |x: &[f64]| {
                let cfg = ChainConfig::new(x[..n].to_vec());
                equilibrium_residual(model, &cfg, &EndLoad { fx: x[n], fy: x[n + 1] }, target)
            };
            let x = newton_solve(f, x0).ok()?;
            let q: Vec<f64> = x[..n].iter().map(|&v| wrap(v)).collect();
            match build_equilibrium(model, q, EndLoad { fx: x[n], fy: x[n + 1] }, target) {
                Ok(e) => Some(e),
                Err(err) => {
                    debug!("dropping critical point: {err}");
                    None
                }
            }
        })
        .collect();
    // deterministic order before deduplication, independent of thread scheduling
    eqs.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| lexicographic(&a.config.q, &b.config.q))
    });
    let mut eqs = dedup(eqs);
    sort_equilibria(&mut eqs);
    eqs
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub deflection: Deflection,
    /// Minimal-energy stable equilibrium, absent when none was found.
    pub equilibrium: Option<Equilibrium>,
    /// `ok` or the reason for a gap.
    pub status: String,
}

/// Globally minimal stable equilibrium along a deflection path.
///
/// Each point reruns the full search, seeded additionally with the previous
/// point's configuration, so a branch that stops being the global minimum is
/// not followed.
pub fn force_deflection_sweep(model: &ChainModel, path: &[Deflection]) -> Vec<SweepPoint> {
    let mut previous: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(path.len());
    for target in path {
        let extra: Vec<Vec<f64>> = previous.iter().cloned().collect();
        let point = match find_equilibria_seeded(model, target, &extra) {
            Ok(eqs) => match eqs.into_iter().find(|e| e.stability == Stability::StableMinimum) {
                Some(e) => SweepPoint {
                    deflection: *target,
                    equilibrium: Some(e),
                    status: "ok".into(),
                },
                None => SweepPoint {
                    deflection: *target,
                    equilibrium: None,
                    status: "no stable equilibrium".into(),
                },
            },
            Err(e) => SweepPoint {
                deflection: *target,
                equilibrium: None,
                status: e.to_string(),
            },
        };
        if let Some(e) = &point.equilibrium {
            previous = Some(e.config.q.clone());
        }
        out.push(point);
    }
    out
}
