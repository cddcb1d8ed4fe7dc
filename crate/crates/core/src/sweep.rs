//! Refinement sweeps: mass-vs-k curves on one grid, grid-refinement studies
//! (relaxation defect and capacity error per level), and the joint (k, grid)
//! ladder whose tail certifies monotone decay where a single grid cannot.

use std::time::Instant;

use serde::Serialize;

use crate::capacity::{hausdorff_measure, solve_capacity, CapacityProblem};
use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::RmlError;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::measure::GridMeasure;
use crate::relax::reduced_measure;

#[derive(Debug, Clone, Serialize)]
pub struct KSweepRow {
    pub k: f64,
    /// Field mass at the fixed early slice; exactly nonincreasing in k.
    pub slice_mass: f64,
    /// Total mass of the reconstructed trace estimate.
    pub estimate_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSweepRow {
    pub nx: usize,
    pub nt: usize,
    pub limit_mass: Option<f64>,
    pub defect_mass: Option<f64>,
    pub capacity_value: Option<f64>,
    pub hausdorff: Option<f64>,
    pub capacity_error: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointCell {
    pub nx: usize,
    pub nt: usize,
    pub cap: f64,
    pub limit_mass: f64,
    pub defect_mass: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub k_rows: Vec<KSweepRow>,
    pub grid_rows: Vec<GridSweepRow>,
    pub joint_cells: Vec<JointCell>,
    /// k axis: slice-mass column nonincreasing (exact).
    pub mass_nonincreasing: Option<bool>,
    /// grid axis with capacity: |value - hausdorff| nonincreasing.
    pub capacity_error_improving: Option<bool>,
    /// both axis: limit mass strictly decreasing across the last three cells.
    pub tail_strictly_decreasing: Option<bool>,
    /// True when the budget ran out before all cells were computed.
    pub partial: bool,
    /// Any flagged cell (no-trace, non-converged) or a partial run.
    pub flagged: bool,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// Rebuilds the configured measure on one refinement level's grid.
fn measure_on(cfg: &ExperimentConfig, sg: &SpaceGrid) -> Result<GridMeasure, RmlError> {
    let lit = cfg
        .measure
        .as_ref()
        .ok_or_else(|| RmlError::InvalidConfig("this sweep needs a \"measure\" entry".into()))?;
    let density = lit.density.sample(sg.x_l, sg.x_r, sg.ncell())?;
    GridMeasure::new(*sg, lit.atoms.clone(), density)
}

/// Per-cell truncation ladder reaching `cap`: cap/64, cap/16, cap/4, cap.
fn joint_schedule(cap: f64) -> Vec<f64> {
    vec![cap / 64.0, cap / 16.0, cap / 4.0, cap]
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, RmlError> {
    let sw = cfg.sweep_config()?.clone();
    let g = cfg.nonlinearity()?;
    let started = Instant::now();
    let mut report = SweepReport {
        axis: sw.axis,
        k_rows: Vec::new(),
        grid_rows: Vec::new(),
        joint_cells: Vec::new(),
        mass_nonincreasing: None,
        capacity_error_improving: None,
        tail_strictly_decreasing: None,
        partial: false,
        flagged: false,
        timings: Vec::new(),
    };
    let out_of_budget =
        |elapsed: &Instant| sw.budget_seconds.is_some_and(|b| elapsed.elapsed().as_secs_f64() > b);

    match sw.axis {
        SweepAxis::K => {
            let sg = cfg.space_grid()?;
            let tg = cfg.time_grid()?;
            let m = measure_on(cfg, &sg)?;
            let t0 = Instant::now();
            let r = reduced_measure(&m, &g, &cfg.schedule, &sg, &tg)?;
            report.timings.push(("ladder".into(), t0.elapsed().as_secs_f64()));
            for ((k, slice), est) in
                cfg.schedule.iter().zip(&r.masses).zip(&r.trace_estimates)
            {
                report.k_rows.push(KSweepRow {
                    k: *k,
                    slice_mass: *slice,
                    estimate_mass: est.total_mass(),
                });
            }
            report.mass_nonincreasing = Some(r.masses.windows(2).all(|w| w[1] <= w[0]));
            report.flagged = r.flagged;
        }
        SweepAxis::Grid => {
            if cfg.measure.is_none() && sw.capacity.is_none() {
                return Err(RmlError::InvalidConfig(
                    "grid sweep needs a \"measure\" or a \"sweep.capacity\" entry".into(),
                ));
            }
            for &(nx, nt) in &sw.grid_levels {
                if out_of_budget(&started) {
                    report.partial = true;
                    break;
                }
                let sg = SpaceGrid::new(cfg.domain.x_l, cfg.domain.x_r, nx)?;
                let mut row = GridSweepRow {
                    nx,
                    nt,
                    limit_mass: None,
                    defect_mass: None,
                    capacity_value: None,
                    hausdorff: None,
                    capacity_error: None,
                    flagged: false,
                };
                if cfg.measure.is_some() {
                    let tg = TimeGrid::new(cfg.t_final, nt)?;
                    let m = measure_on(cfg, &sg)?;
                    let t0 = Instant::now();
                    let r = reduced_measure(&m, &g, &cfg.schedule, &sg, &tg)?;
                    report.timings.push((format!("relax_{nx}x{nt}"), t0.elapsed().as_secs_f64()));
                    row.limit_mass = Some(r.limit.total_mass());
                    row.defect_mass = Some(r.defect_mass);
                    row.flagged |= r.flagged;
                }
                if let Some(cap) = &sw.capacity {
                    let tg = TimeGrid::new(cap.t_final, nt)?;
                    let problem = CapacityProblem::new(
                        cap.kind,
                        cap.side,
                        cap.intervals.clone(),
                        sg,
                        tg,
                    );
                    let t0 = Instant::now();
                    let res = solve_capacity(&problem)?;
                    report
                        .timings
                        .push((format!("capacity_{nx}x{nt}"), t0.elapsed().as_secs_f64()));
                    row.capacity_value = Some(res.value);
                    row.hausdorff = Some(res.hausdorff);
                    row.capacity_error = Some((res.value - res.hausdorff).abs());
                    row.flagged |= !res.converged;
                }
                report.flagged |= row.flagged;
                report.grid_rows.push(row);
            }
            let errs: Vec<f64> =
                report.grid_rows.iter().filter_map(|r| r.capacity_error).collect();
            if errs.len() >= 2 {
                report.capacity_error_improving =
                    Some(errs.windows(2).all(|w| w[1] <= w[0]));
            }
        }
        SweepAxis::Both => {
            if cfg.measure.is_none() {
                return Err(RmlError::InvalidConfig("joint sweep needs a \"measure\" entry".into()));
            }
            for (&(nx, nt), &cap) in sw.grid_levels.iter().zip(&sw.joint_caps) {
                if out_of_budget(&started) {
                    report.partial = true;
                    break;
                }
                let sg = SpaceGrid::new(cfg.domain.x_l, cfg.domain.x_r, nx)?;
                let tg = TimeGrid::new(cfg.t_final, nt)?;
                let m = measure_on(cfg, &sg)?;
                let t0 = Instant::now();
                let r = reduced_measure(&m, &g, &joint_schedule(cap), &sg, &tg)?;
                report
                    .timings
                    .push((format!("cell_{nx}x{nt}_k{cap:e}"), t0.elapsed().as_secs_f64()));
                report.flagged |= r.flagged;
                report.joint_cells.push(JointCell {
                    nx,
                    nt,
                    cap,
                    limit_mass: r.limit.total_mass(),
                    defect_mass: r.defect_mass,
                    flagged: r.flagged,
                });
            }
            if report.joint_cells.len() >= 3 {
                let tail: Vec<f64> = report
                    .joint_cells
                    .iter()
                    .rev()
                    .take(3)
                    .map(|c| c.limit_mass)
                    .collect();
                // tail is reversed: latest first
                report.tail_strictly_decreasing = Some(tail[0] < tail[1] && tail[1] < tail[2]);
            }
        }
    }
    report.flagged |= report.partial;
    Ok(report)
}

impl SweepReport {
    /// Long-format table: one row per computed cell, axis columns left blank
    /// when they do not apply.
    pub fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec![
            "axis", "k", "nx", "nt", "slice_mass", "estimate_mass", "limit_mass", "defect_mass",
            "capacity_value", "hausdorff", "capacity_error", "flagged",
        ];
        let blank = String::new();
        let fmt = |v: f64| format!("{v}");
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        let mut rows = Vec::new();
        for r in &self.k_rows {
            rows.push(vec![
                "k".into(),
                fmt(r.k),
                blank.clone(),
                blank.clone(),
                fmt(r.slice_mass),
                fmt(r.estimate_mass),
                blank.clone(),
                blank.clone(),
                blank.clone(),
                blank.clone(),
                blank.clone(),
                "false".into(),
            ]);
        }
        for r in &self.grid_rows {
            rows.push(vec![
                "grid".into(),
                blank.clone(),
                r.nx.to_string(),
                r.nt.to_string(),
                blank.clone(),
                blank.clone(),
                opt(r.limit_mass),
                opt(r.defect_mass),
                opt(r.capacity_value),
                opt(r.hausdorff),
                opt(r.capacity_error),
                r.flagged.to_string(),
            ]);
        }
        for c in &self.joint_cells {
            rows.push(vec![
                "both".into(),
                fmt(c.cap),
                c.nx.to_string(),
                c.nt.to_string(),
                blank.clone(),
                blank.clone(),
                fmt(c.limit_mass),
                fmt(c.defect_mass),
                blank.clone(),
                blank.clone(),
                blank.clone(),
                c.flagged.to_string(),
            ]);
        }
        (header, rows)
    }

    /// Plot points for the curve the axis varies: mass vs k, error vs nx, or
    /// mass vs cell index.
    pub fn dat_points(&self) -> Vec<(f64, f64)> {
        match self.axis {
            SweepAxis::K => self.k_rows.iter().map(|r| (r.k, r.slice_mass)).collect(),
            SweepAxis::Grid => self
                .grid_rows
                .iter()
                .map(|r| {
                    (r.nx as f64, r.capacity_error.or(r.defect_mass).unwrap_or(f64::NAN))
                })
                .collect(),
            SweepAxis::Both => self
                .joint_cells
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64, c.limit_mass))
                .collect(),
        }
    }

    pub fn hausdorff_reference(intervals: &[(f64, f64)]) -> Result<f64, RmlError> {
        hausdorff_measure(intervals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
                "grid": {{"nx": 99, "nt": 64}},
                "measure": {{"atoms": [{{"loc": 0.0, "mass": 1.0}}]}},
                "g": {{"kind": "power", "p": 4.0, "c": 1.0}},
                "schedule": [1.0, 4.0, 16.0, 64.0],
                {extra}
            }}"#
        );
        serde_json::from_str(&text).unwrap()
    }

    #[test]
    fn k_axis_masses_monotone() {
        let cfg = base_config(r#""sweep": {"axis": "k"}"#);
        let rep = run_sweep(&cfg).unwrap();
        assert_eq!(rep.k_rows.len(), 4);
        assert_eq!(rep.mass_nonincreasing, Some(true));
        assert!(rep
            .k_rows
            .windows(2)
            .all(|w| w[1].slice_mass <= w[0].slice_mass));
    }

    #[test]
    fn joint_axis_reports_tail() {
        let cfg = base_config(
            r#""sweep": {"axis": "both", "grid_levels": [[49, 64], [99, 128], [199, 256]], "joint_caps": [100.0, 1000.0, 10000.0]}"#,
        );
        let rep = run_sweep(&cfg).unwrap();
        assert_eq!(rep.joint_cells.len(), 3);
        assert!(rep.tail_strictly_decreasing.is_some());
        let (_, rows) = rep.csv_rows();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn grid_axis_capacity_error_columns() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "sweep": {
                    "axis": "grid",
                    "grid_levels": [[33, 16], [65, 32]],
                    "capacity": {"kind": "initial", "intervals": [[-0.25, 0.25]]}
                }
            }"#,
        )
        .unwrap();
        let rep = run_sweep(&cfg).unwrap();
        assert_eq!(rep.grid_rows.len(), 2);
        for row in &rep.grid_rows {
            assert!(row.capacity_value.is_some());
            assert_eq!(row.hausdorff, Some(0.5));
            assert!(row.limit_mass.is_none());
        }
        assert!(rep.capacity_error_improving.is_some());
    }

    #[test]
    fn empty_and_missing_sections_rejected() {
        let cfg = base_config(r#""sweep": {"axis": "grid", "grid_levels": []}"#);
        assert!(run_sweep(&cfg).is_err());
        let no_sweep = base_config(r#""seed": 1"#);
        assert!(run_sweep(&no_sweep).is_err());
        // grid axis with nothing to measure
        let bare: ExperimentConfig =
            serde_json::from_str(r#"{"sweep": {"axis": "grid"}}"#).unwrap();
        assert!(run_sweep(&bare).is_err());
    }

    #[test]
    fn budget_truncates_and_flags() {
        let cfg = base_config(
            r#""sweep": {"axis": "both", "grid_levels": [[49, 64], [99, 128], [199, 256]], "joint_caps": [100.0, 1000.0, 10000.0], "budget_seconds": 0.0}"#,
        );
        let rep = run_sweep(&cfg).unwrap();
        assert!(rep.partial);
        assert!(rep.flagged);
        assert!(rep.joint_cells.is_empty());
    }
}
