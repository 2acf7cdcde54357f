//! Agreement between the analytical buckling pipeline, the energy landscapes
//! and the full equilibrium solver.

use tensegrity::buckling::{post_buckling_prediction, solve_buckling, solve_buckling_with};
use tensegrity::chain::{self, ChainConfig, ChainModel, Deflection, EndLoad};
use tensegrity::equilibria::{
    energy_landscape, find_equilibria, force_deflection_sweep, refine_critical_cells, GridSpec, Stability,
};
use tensegrity::numerics::{newton_solve, norm_inf};
use tensegrity::segment::{SegmentGeometry, SpringControl};

fn reference(n: usize) -> ChainModel {
    let g = SegmentGeometry::new(1.0, 1.0).unwrap();
    ChainModel::uniform(n, g, SpringControl::symmetric(1.0, 1.0).unwrap()).unwrap()
}

#[test]
fn landscape_critical_cells_have_nearby_equilibria() {
    let m = reference(4);
    let target = Deflection::new(0.02, 0.0);
    let grid = GridSpec::around_straight(&m, &target, 201);
    let land = energy_landscape(&m, &target, (0, 3), &grid).unwrap();
    let cells = land.critical_cells();
    assert!(!cells.is_empty());
    let eqs = find_equilibria(&m, &target).unwrap();
    let diam = land.cell_diameter();
    for c in &cells {
        let (qi, qj) = (land.axis_i[c.i], land.axis_j[c.j]);
        let near = eqs
            .iter()
            .any(|e| (e.config.q[0] - qi).hypot(e.config.q[3] - qj) <= diam);
        assert!(near, "critical cell {c:?} has no equilibrium within {diam}");
    }
}

#[test]
fn landscape_shows_two_of_each_critical_kind() {
    let m = reference(4);
    let target = Deflection::new(0.02, 0.0);
    let grid = GridSpec::around_straight(&m, &target, 201);
    let land = energy_landscape(&m, &target, (0, 3), &grid).unwrap();
    let cells = land.critical_cells();
    let count = |k| cells.iter().filter(|c| c.kind == k).count();
    assert_eq!(count(Stability::StableMinimum), 2, "{cells:#?}");
    assert_eq!(count(Stability::Maximum), 2, "{cells:#?}");
    assert_eq!(count(Stability::Saddle), 2, "{cells:#?}");
}

#[test]
fn critical_cells_are_stable_under_refinement() {
    let m = reference(4);
    let target = Deflection::new(0.02, 0.0);
    let coarse_spec = GridSpec::around_straight(&m, &target, 101);
    let fine_spec = GridSpec::around_straight(&m, &target, 201);
    let coarse = energy_landscape(&m, &target, (0, 3), &coarse_spec).unwrap();
    let fine = energy_landscape(&m, &target, (0, 3), &fine_spec).unwrap();
    let diam = coarse.cell_diameter();
    assert_eq!(coarse.critical_cells().len(), 6);
    let fine_cells = fine.critical_cells();
    for c in coarse.critical_cells() {
        let (qi, qj) = (coarse.axis_i[c.i], coarse.axis_j[c.j]);
        let moved = fine_cells
            .iter()
            .filter(|f| f.kind == c.kind && f.branch == c.branch)
            .map(|f| (fine.axis_i[f.i] - qi).hypot(fine.axis_j[f.j] - qj))
            .fold(f64::INFINITY, f64::min);
        assert!(moved < diam, "{:?} at ({qi}, {qj}) moved {moved}", c.kind);
    }
}

#[test]
fn refined_cells_match_the_multistart_search() {
    let m = reference(4);
    let target = Deflection::new(0.02, 0.0);
    let eqs = find_equilibria(&m, &target).unwrap();
    for steps in [101, 201] {
        let land = energy_landscape(&m, &target, (0, 3), &GridSpec::around_straight(&m, &target, steps)).unwrap();
        let refined = refine_critical_cells(&m, &land).unwrap();
        assert_eq!(refined.len(), eqs.len());
        for (r, e) in refined.iter().zip(&eqs) {
            assert_eq!(r.stability, e.stability);
            let d = r.config.q.iter().zip(&e.config.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-8, "{:?} vs {:?}", r.config, e.config);
        }
    }
    // unloaded: only the straight chain
    let zero = Deflection::default();
    let land = energy_landscape(&m, &zero, (0, 3), &GridSpec::around_straight(&m, &zero, 51)).unwrap();
    let refined = refine_critical_cells(&m, &land).unwrap();
    assert_eq!(refined.len(), 1);
    assert_eq!(refined[0].stability, Stability::StableMinimum);
}

#[test]
fn sweep_force_is_a_fixed_point() {
    let m = reference(4);
    let path: Vec<Deflection> = [0.01, 0.05, 0.2].iter().map(|&dx| Deflection::new(dx, 0.0)).collect();
    for p in force_deflection_sweep(&m, &path) {
        let e = p.equilibrium.expect("stable equilibrium");
        let target = p.deflection;
        // Newton on the configuration alone, with the reported load held fixed
        let f = |q: &[f64]| {
            let r = chain::equilibrium_residual(&m, &ChainConfig::new(q.to_vec()), &e.load, &target)?;
            // torque balance alone is square in q; the position rows are checked below
            Ok(r[..4].to_vec())
        };
        let q = newton_solve(f, &e.config.q).unwrap();
        let r = chain::equilibrium_residual(&m, &ChainConfig::new(q.clone()), &e.load, &target).unwrap();
        assert!(norm_inf(&r) <= 1e-8, "{r:?}");
        let moved = q.iter().zip(&e.config.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved <= 1e-8);
    }
}

#[test]
fn prediction_matches_sweep_at_small_deflection() {
    let m = reference(4);
    let sol = solve_buckling(&m).unwrap();
    let dx = 0.01;
    let pred = post_buckling_prediction(&sol, 0, dx).unwrap();
    let pt = &force_deflection_sweep(&m, &[Deflection::new(dx, 0.0)])[0];
    let e = pt.equilibrium.as_ref().unwrap();
    // the sweep reports the q1 < 0 member of the mirror pair
    let pred = if e.config.q[0] * pred.q[0] < 0.0 { pred.mirrored() } else { pred };
    assert!((e.load.fx - pred.fx).abs() <= 0.05 * pred.fx.abs());
    assert!((e.load.fy - pred.fy).abs() <= 0.05 * pred.fy.abs(), "{:?} vs {:?}", e.load, pred);
    assert!((e.energy - 4.0 - pred.energy).abs() <= 0.05 * pred.energy);
}

#[test]
fn sweep_forces_flip_with_mirrored_load() {
    let m = reference(4);
    let eqs = find_equilibria(&m, &Deflection::new(0.04, 0.0)).unwrap();
    let stable: Vec<_> = eqs.iter().filter(|e| e.stability == Stability::StableMinimum).collect();
    assert_eq!(stable.len(), 2);
    assert!(stable[0].config.q[0] < 0.0);
    assert!((stable[0].load.fx - stable[1].load.fx).abs() <= 1e-8);
    assert!((stable[0].load.fy + stable[1].load.fy).abs() <= 1e-8);
}

#[test]
fn quadratic_energy_along_modes() {
    // E(α·t) − E(0) = ½|K_eq|·Σα²·t² + O(t⁴); Richardson removes the t⁴ term
    let m = reference(4);
    let sol = solve_buckling(&m).unwrap();
    let e0 = chain::total_energy(&m, &ChainConfig::straight(4)).unwrap();
    for mode in &sol.modes {
        let alpha = mode.joint_coefficients();
        let norm2: f64 = alpha.iter().map(|a| a * a).sum();
        let f = |t: f64| {
            let q: Vec<f64> = alpha.iter().map(|a| a * t).collect();
            (chain::total_energy(&m, &ChainConfig::new(q)).unwrap() - e0) / (t * t)
        };
        let t = 0.02;
        let extrapolated = (4.0 * f(t / 2.0) - f(t)) / 3.0;
        let want = 0.5 * sol.k_eq_magnitude * norm2;
        assert!((extrapolated - want).abs() <= 1e-6, "{extrapolated} vs {want}");
        assert!((f(t) - want).abs() > (extrapolated - want).abs());
    }
}

#[test]
fn critical_force_scales_with_segment_length() {
    // scaling a, b and L⁰ together multiplies K_eq by b², so Fx0 grows like b
    let g = |b: f64| SegmentGeometry::new(b, b).unwrap();
    let s = SpringControl::symmetric(1.0, 1.0).unwrap();
    let base = solve_buckling(&ChainModel::uniform(4, g(1.0), s).unwrap()).unwrap();
    let s10 = SpringControl::symmetric(1.0, 10.0).unwrap();
    let scaled = solve_buckling(&ChainModel::uniform(4, g(10.0), s10).unwrap()).unwrap();
    assert!((scaled.k_eq - 100.0 * base.k_eq).abs() < 1e-9);
    assert!((scaled.fx0 - 10.0 * base.fx0).abs() < 1e-9);
    // at fixed joint stiffness the b⁻¹ factor scales the force inversely
    let fixed = solve_buckling_with(4, base.k_eq, 10.0).unwrap();
    assert!((fixed.fx0 * 10.0 - base.fx0).abs() < 1e-9);
}

#[test]
fn zero_path_gives_zero_force() {
    let pts = force_deflection_sweep(&reference(4), &[Deflection::default()]);
    assert_eq!(pts[0].equilibrium.as_ref().unwrap().load, EndLoad::default());
}

#[test]
fn newton_solves_three_segment_equilibrium() {
    let m = reference(3);
    let target = Deflection::new(0.01, 0.0);
    let eqs = find_equilibria(&m, &target).unwrap();
    for e in eqs {
        let r = chain::equilibrium_residual(&m, &e.config, &e.load, &target).unwrap();
        assert!(norm_inf(&r) <= 1e-10);
    }
}
