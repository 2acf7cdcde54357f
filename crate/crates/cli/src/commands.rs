use clap::Args;
use log::{info, warn};
use serde::Serialize;
use serde_json::json;
use tensegrity::buckling::{solve_buckling, ModeShape};
use tensegrity::chain::{ChainModel, Deflection};
use tensegrity::equilibria::{
    check_reach, energy_landscape, force_deflection_sweep, refine_critical_cells, Equilibrium, GridSpec, Stability,
};
use tensegrity::segment::{self, SegmentGeometry, SpringControl};
use tensegrity::shape::ShapeLabel;

use crate::failure::Failure;
use crate::output::{num, Outcome, Table};
use crate::spec::ModelSpec;
use crate::svg::{line_plot, Series};

pub const SEGMENT_HEADERS: &[&str] = &["q", "M", "dM_dq", "E", "L1", "L2", "status"];
pub const LANDSCAPE_HEADERS: &[&str] = &["q_i", "q_j", "E", "feasible", "branch"];
pub const SWEEP_HEADERS: &[&str] = &["dx", "dy", "Fx", "Fy", "E", "shape", "stability", "status"];
pub const BUCKLING_HEADERS: &[&str] = &[
    "mode",
    "eigenvalue",
    "signed_eigenvalue",
    "critical_force",
    "mu_x",
    "mu_eq",
    "shape_positive",
    "shape_negative",
    "alpha",
];

const MAX_POINTS: usize = 10_000_000;

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::StableMinimum => "StableMinimum",
        Stability::Saddle => "Saddle",
        Stability::Maximum => "Maximum",
    }
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report values serialize")
}

/// `count` evenly spaced points from `start` to `end` inclusive.
fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    /// Lower end of the joint-angle range, radians
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub q_min: f64,
    /// Upper end of the joint-angle range, radians
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub q_max: f64,
    /// Spacing of the tabulated angles, radians
    #[arg(long, default_value_t = 0.01)]
    pub q_step: f64,
    /// Segment whose spring controls are tabulated (1-based)
    #[arg(long, default_value_t = 1)]
    pub segment: usize,
}

#[derive(Debug, Serialize)]
struct SegmentRow {
    q: f64,
    #[serde(rename = "M")]
    m: Option<f64>,
    #[serde(rename = "dM_dq")]
    dm_dq: Option<f64>,
    #[serde(rename = "E")]
    e: Option<f64>,
    #[serde(rename = "L1")]
    l1: Option<f64>,
    #[serde(rename = "L2")]
    l2: Option<f64>,
    status: String,
}

fn segment_row(geom: &SegmentGeometry, springs: &SpringControl, q: f64) -> SegmentRow {
    let eval = || -> tensegrity::Result<(f64, f64, f64, f64, f64)> {
        let (l1, l2) = segment::spring_lengths(geom, q)?;
        Ok((
            segment::segment_torque(geom, springs, q)?,
            segment::torque_slope(geom, springs, q)?,
            segment::segment_energy(geom, springs, q)?,
            l1,
            l2,
        ))
    };
    match eval() {
        Ok((m, d, e, l1, l2)) => SegmentRow {
            q,
            m: Some(m),
            dm_dq: Some(d),
            e: Some(e),
            l1: Some(l1),
            l2: Some(l2),
            status: "ok".into(),
        },
        Err(err) => SegmentRow { q, m: None, dm_dq: None, e: None, l1: None, l2: None, status: err.to_string() },
    }
}

pub fn segment(spec: &ModelSpec, args: &SegmentArgs) -> Result<Outcome, Failure> {
    if !(args.q_min.is_finite() && args.q_max.is_finite() && args.q_min <= args.q_max) {
        return Err(Failure::spec("--q-min/--q-max: need finite bounds with q-min <= q-max"));
    }
    if !(args.q_step.is_finite() && args.q_step > 0.0) {
        return Err(Failure::spec("--q-step: must be positive"));
    }
    if args.segment == 0 || args.segment > spec.n {
        return Err(Failure::spec(format!("--segment: must lie in 1..={}", spec.n)));
    }
    let span = (args.q_max - args.q_min) / args.q_step;
    if span > MAX_POINTS as f64 {
        return Err(Failure::spec("--q-step: range produces too many rows"));
    }
    let count = (span + 1e-9).floor() as usize + 1;
    let geom = spec.geometry()?;
    let springs = spec.controls(args.segment - 1);
    let rows: Vec<SegmentRow> = (0..count)
        .map(|i| segment_row(&geom, &springs, args.q_min + args.q_step * i as f64))
        .collect();

    let symmetric = springs.is_symmetric();
    let (margin, k_eq) = if symmetric {
        (
            Some(segment::monotonicity_margin(&geom, &springs)?),
            Some(segment::equivalent_stiffness(&geom, &springs)?),
        )
    } else {
        (None, None)
    };
    let failures = rows.iter().filter(|r| r.status != "ok").count();

    let mut table = Table::new(SEGMENT_HEADERS);
    for r in &rows {
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        table.push(vec![num(r.q), cell(r.m), cell(r.dm_dq), cell(r.e), cell(r.l1), cell(r.l2), r.status.clone()]);
    }
    let nan = f64::NAN;
    let plot = line_plot(
        "Segment torque",
        "q [rad]",
        &[
            Series { name: "M", points: rows.iter().map(|r| (r.q, r.m.unwrap_or(nan))).collect() },
            Series { name: "dM/dq", points: rows.iter().map(|r| (r.q, r.dm_dq.unwrap_or(nan))).collect() },
        ],
    );
    Ok(Outcome {
        command: "segment",
        parameters: json!({
            "q_min": args.q_min,
            "q_max": args.q_max,
            "q_step": args.q_step,
            "segment": args.segment,
        }),
        result: json!({
            "symmetric": symmetric,
            "monotonicity_margin": margin,
            "monotonic": margin.map(|m| m > 0.0),
            "k_eq": k_eq,
            "max_angle": geom.max_angle(),
            "failed_rows": failures,
            "rows": to_json(&rows),
        }),
        table,
        plot: Some(plot),
        failures,
    })
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    /// Axial tip deflection
    #[arg(long, allow_negative_numbers = true)]
    pub dx: f64,
    /// Lateral tip deflection
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dy: f64,
    /// Joints on the grid axes, 1-based, e.g. `1,4`
    #[arg(long, default_value = "1,4", value_parser = parse_pair)]
    pub pair: (usize, usize),
    /// Grid nodes per axis
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    /// Half-width of the square grid, radians; sized from the deflection when omitted
    #[arg(long)]
    pub range: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or("expected two joint indices like 1,4")?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(i)?, p(j)?))
}

#[derive(Debug, Serialize)]
struct EquilibriumPoint {
    q: Vec<f64>,
    fx: f64,
    fy: f64,
    energy: f64,
    stability: Stability,
    shape: ShapeLabel,
}

impl From<&Equilibrium> for EquilibriumPoint {
    fn from(e: &Equilibrium) -> Self {
        Self {
            q: e.config.q.clone(),
            fx: e.load.fx,
            fy: e.load.fy,
            energy: e.energy,
            stability: e.stability,
            shape: e.shape_label,
        }
    }
}

pub fn landscape(spec: &ModelSpec, args: &LandscapeArgs) -> Result<Outcome, Failure> {
    let model = spec.to_model()?;
    if spec.n != 4 {
        return Err(Failure::spec(format!("model.n: landscapes need a four-segment chain, got n = {}", spec.n)));
    }
    let (pi, pj) = args.pair;
    if pi == 0 || pj == 0 || pi > spec.n || pj > spec.n || pi == pj {
        return Err(Failure::spec(format!("--pair: need two distinct joints in 1..={}", spec.n)));
    }
    if args.steps < 3 {
        return Err(Failure::spec("--steps: need at least 3 nodes per axis"));
    }
    let target = Deflection::new(args.dx, args.dy);
    let grid = match args.range {
        Some(h) if h.is_finite() && h > 0.0 => GridSpec::square(h, args.steps),
        Some(_) => return Err(Failure::spec("--range: must be positive")),
        None => GridSpec::around_straight(&model, &target, args.steps),
    };
    let land = energy_landscape(&model, &target, (pi - 1, pj - 1), &grid)?;
    let cells = land.critical_cells();
    let points = refine_critical_cells(&model, &land)?;
    info!("{} critical cells refined to {} equilibria", cells.len(), points.len());

    let mut table = Table::new(LANDSCAPE_HEADERS);
    let (ni, nj) = land.shape();
    let mut feasible = 0usize;
    for i in 0..ni {
        for j in 0..nj {
            let k = i * nj + j;
            let e = land.energy[k];
            feasible += e.is_some() as usize;
            table.push(vec![
                num(land.axis_i[i]),
                num(land.axis_j[j]),
                e.map(num).unwrap_or_default(),
                e.is_some().to_string(),
                land.branch[k].map(|b| b.to_string()).unwrap_or_default(),
            ]);
        }
    }
    let count = |s: Stability| points.iter().filter(|e| e.stability == s).count();
    let eq_points: Vec<EquilibriumPoint> = points.iter().map(EquilibriumPoint::from).collect();
    Ok(Outcome {
        command: "landscape",
        parameters: json!({
            "dx": args.dx,
            "dy": args.dy,
            "pair": [pi, pj],
            "steps": args.steps,
            "range": [grid.range_i.0, grid.range_i.1],
        }),
        result: json!({
            "feasible_cells": feasible,
            "total_cells": ni * nj,
            "critical_cells": cells.len(),
            "minima": count(Stability::StableMinimum),
            "saddles": count(Stability::Saddle),
            "maxima": count(Stability::Maximum),
            "critical_points": to_json(&eq_points),
        }),
        table,
        plot: None,
        failures: 0,
    })
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// First axial deflection of the path
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dx_start: f64,
    /// Last axial deflection of the path
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub dx_end: f64,
    /// Number of path points
    #[arg(long, default_value_t = 51)]
    pub steps: usize,
    /// Lateral deflection held along the path
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dy: f64,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    dx: f64,
    dy: f64,
    fx: Option<f64>,
    fy: Option<f64>,
    energy: Option<f64>,
    shape: Option<ShapeLabel>,
    stability: Option<Stability>,
    q: Option<Vec<f64>>,
    status: String,
}

pub fn sweep(spec: &ModelSpec, args: &SweepArgs) -> Result<Outcome, Failure> {
    let model: ChainModel = spec.to_model()?;
    if args.steps == 0 || args.steps > MAX_POINTS {
        return Err(Failure::spec("--steps: must be positive"));
    }
    if !(args.dx_start.is_finite() && args.dx_end.is_finite() && args.dy.is_finite()) {
        return Err(Failure::spec("--dx-start/--dx-end/--dy: must be finite"));
    }
    let path: Vec<Deflection> = linspace(args.dx_start, args.dx_end, args.steps)
        .into_iter()
        .map(|dx| Deflection::new(dx, args.dy))
        .collect();
    for p in &path {
        check_reach(&model, p)?;
    }
    let points = force_deflection_sweep(&model, &path);
    let rows: Vec<SweepRow> = points
        .iter()
        .map(|p| {
            let e = p.equilibrium.as_ref();
            SweepRow {
                dx: p.deflection.dx,
                dy: p.deflection.dy,
                fx: e.map(|e| e.load.fx),
                fy: e.map(|e| e.load.fy),
                energy: e.map(|e| e.energy),
                shape: e.map(|e| e.shape_label),
                stability: e.map(|e| e.stability),
                q: e.map(|e| e.config.q.clone()),
                status: p.status.clone(),
            }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.status != "ok").count();
    for r in rows.iter().filter(|r| r.status != "ok") {
        warn!("gap at dx = {}: {}", r.dx, r.status);
    }

    let mut table = Table::new(SWEEP_HEADERS);
    for r in &rows {
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        table.push(vec![
            num(r.dx),
            num(r.dy),
            cell(r.fx),
            cell(r.fy),
            cell(r.energy),
            r.shape.map(|s| s.to_string()).unwrap_or_default(),
            r.stability.map(stability_name).map(String::from).unwrap_or_default(),
            r.status.clone(),
        ]);
    }
    let nan = f64::NAN;
    let plot = line_plot(
        "Tip force along the deflection path",
        "dx",
        &[
            Series { name: "Fx", points: rows.iter().map(|r| (r.dx, r.fx.unwrap_or(nan))).collect() },
            Series { name: "Fy", points: rows.iter().map(|r| (r.dx, r.fy.unwrap_or(nan))).collect() },
        ],
    );
    Ok(Outcome {
        command: "sweep",
        parameters: json!({
            "dx_start": args.dx_start,
            "dx_end": args.dx_end,
            "steps": args.steps,
            "dy": args.dy,
        }),
        result: json!({
            "gaps": failures,
            "points": to_json(&rows),
        }),
        table,
        plot: Some(plot),
        failures,
    })
}

#[derive(Debug, Serialize)]
struct ModeReport<'a> {
    index: usize,
    eigenvalue: f64,
    signed_eigenvalue: f64,
    critical_force: f64,
    alpha: &'a [f64],
    mu_x: f64,
    mu_eq: f64,
    shape_positive: &'a ModeShape,
    shape_negative: &'a ModeShape,
}

pub fn buckling(spec: &ModelSpec) -> Result<Outcome, Failure> {
    let model = spec.to_model()?;
    if model.uniform_springs().is_none_or(|s| !s.is_symmetric()) {
        return Err(Failure::spec(
            "model.segments: buckling analysis needs identical symmetric controls on every segment",
        ));
    }
    let sol = solve_buckling(&model)?;
    let modes: Vec<ModeReport> = sol
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| ModeReport {
            index: i + 1,
            eigenvalue: m.eigenvalue,
            signed_eigenvalue: m.signed_eigenvalue,
            critical_force: m.critical_force,
            alpha: &m.alpha,
            mu_x: m.mu_x,
            mu_eq: m.mu_eq,
            shape_positive: &m.shape_positive,
            shape_negative: &m.shape_negative,
        })
        .collect();

    let mut table = Table::new(BUCKLING_HEADERS);
    for m in &modes {
        let alpha: Vec<String> = m.alpha.iter().map(|&a| num(a)).collect();
        table.push(vec![
            m.index.to_string(),
            num(m.eigenvalue),
            num(m.signed_eigenvalue),
            num(m.critical_force),
            num(m.mu_x),
            num(m.mu_eq),
            m.shape_positive.label.to_string(),
            m.shape_negative.label.to_string(),
            alpha.join(";"),
        ]);
    }
    Ok(Outcome {
        command: "buckling",
        parameters: json!({}),
        result: json!({
            "k_eq": sol.k_eq,
            "k_eq_magnitude": sol.k_eq_magnitude,
            "fx0": sol.fx0,
            "compressive_force": sol.fx0.abs(),
            "nonzero_modes": sol.modes.len(),
            "spectrum": sol.spectrum,
            "modes": to_json(&modes),
        }),
        table,
        plot: None,
        failures: 0,
    })
}
