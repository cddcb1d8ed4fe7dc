//! Command-line surface: five subcommands over the library. All physics
//! comes from the config file; flags only pick files, directories, and the
//! capacity shortcut. Exit codes: 0 clean, 2 validation failure, 3 finished
//! but flagged (non-converged, no-trace, or property violations).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::capacity::{solve_capacity, CapacityKind, CapacityProblem, CapacityResult, LateralSide};
use crate::config::{ExperimentConfig, SweepAxis, SweepConfig};
use crate::error::RmlError;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::measure::Weight;
use crate::pde::SpaceTimeField;
use crate::properties::run_all;
use crate::relax::{default_goodness_tol, is_good, trace_basis};
use crate::report::{version_stamp, write_csv, write_dat, write_json};
use crate::sweep::run_sweep;

#[derive(Parser)]
#[command(
    name = "rml",
    version,
    about = "Reduced measures for the semilinear heat equation: truncation ladders, traces, capacities"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Truncation-ladder relaxation of an initial measure.
    Relax(RunArgs),
    /// Relaxation of a lateral boundary measure.
    Brelax(RunArgs),
    /// Capacity of an interval union against its length.
    Capacity(CapacityArgs),
    /// Seeded property campaigns.
    Properties(PropertiesArgs),
    /// Refinement sweeps along k, grid, or both.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Also dump the top-level solution field as CSV.
    #[arg(long)]
    dump_fields: bool,
}

#[derive(Args)]
struct CapacityArgs {
    /// "initial" or "lateral".
    #[arg(long)]
    kind: String,
    /// Interval union "a b[;c d;...]" (space for initial, time for lateral).
    #[arg(long = "K", allow_hyphen_values = true)]
    set: String,
    /// Lateral endpoint, "left" or "right".
    #[arg(long, default_value = "left")]
    endpoint: String,
    #[arg(long, default_value_t = 129)]
    nx: usize,
    #[arg(long, default_value_t = 128)]
    nt: usize,
    /// Time horizon.
    #[arg(long = "T", default_value_t = 0.5)]
    t_final: f64,
    #[arg(long, default_value_t = -1.0)]
    x_l: f64,
    #[arg(long, default_value_t = 1.0)]
    x_r: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PropertiesArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cases per structure family; other suites scale with it.
    #[arg(long, default_value_t = 20)]
    cases: usize,
    /// Optional output directory for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's sweep axis ("k", "grid", "both").
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses argv and runs one subcommand, translating every failure into the
/// documented exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    crate::init_thread_pool();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let line = e.to_string();
            eprintln!("error: {}", line.lines().next().unwrap_or("bad arguments"));
            return 2;
        }
    };
    let outcome = match cli.cmd {
        Command::Relax(args) => relax_cmd(&args),
        Command::Brelax(args) => brelax_cmd(&args),
        Command::Capacity(args) => capacity_cmd(&args),
        Command::Properties(args) => properties_cmd(&args),
        Command::Sweep(args) => sweep_cmd(&args),
    };
    match outcome {
        Ok(false) => 0,
        Ok(true) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn dump_field(dir: &Path, name: &str, f: &SpaceTimeField) -> Result<(), RmlError> {
    let dt = f.tg.dt();
    let mut rows = Vec::with_capacity(f.nrows() * f.sg.nx);
    for n in 0..f.nrows() {
        let t = n as f64 * dt;
        for (i, &u) in f.row(n).iter().enumerate() {
            rows.push(vec![fmt_f(t), fmt_f(f.sg.node(i)), fmt_f(u)]);
        }
    }
    write_csv(dir, name, &["t", "x", "u"], &rows)?;
    Ok(())
}

fn relax_cmd(args: &RunArgs) -> Result<bool, RmlError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let sg = cfg.space_grid()?;
    let tg = cfg.time_grid()?;
    let m = cfg.initial_measure()?;
    let g = cfg.nonlinearity()?;
    let tol = cfg.tol.unwrap_or_else(|| default_goodness_tol(&m));

    let t0 = Instant::now();
    let report = is_good(&m, &g, &cfg.schedule, &sg, &tg, tol)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let r = &report.relaxation;

    let basis = trace_basis(&sg)?;
    let mut trace_rows = Vec::new();
    for (k, est) in r.schedule.iter().zip(&r.trace_estimates) {
        for (c, phi) in &basis {
            trace_rows.push(vec![fmt_f(*k), fmt_f(*c), fmt_f(est.pair(phi, Weight::None)?)]);
        }
    }
    write_csv(&args.out, "traces.csv", &["k", "center", "mass"], &trace_rows)?;
    write_dat(
        &args.out,
        "masses.dat",
        &r.schedule.iter().zip(&r.masses).map(|(&k, &m)| (k, m)).collect::<Vec<_>>(),
    )?;
    if args.dump_fields {
        dump_field(&args.out, "field.csv", &r.final_field)?;
    }

    let manifest = serde_json::json!({
        "command": "relax",
        "config": cfg,
        "versions": version_stamp(),
        "tolerance": tol,
        "verdict": report.verdict,
        "gaps": report.gaps,
        "defect_mass": report.defect_mass,
        "schedule": r.schedule,
        "masses": r.masses,
        "absorption_integrals": r.absorption_integrals,
        "limit": r.limit,
        "limit_mass": r.limit.total_mass(),
        "balance_residuals": r.balances.iter().map(|b| b.residual).collect::<Vec<_>>(),
        "flagged": r.flagged,
        "timings": { "ladder_seconds": elapsed },
    });
    write_json(&args.out, "results.json", &manifest)?;
    println!(
        "relax: verdict {:?}, defect_mass {:.6}, flagged {}",
        report.verdict, report.defect_mass, r.flagged
    );
    Ok(r.flagged)
}

fn brelax_cmd(args: &RunArgs) -> Result<bool, RmlError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let sg = cfg.space_grid()?;
    let tg = cfg.time_grid()?;
    let bm = cfg.boundary_measure()?;
    let g = cfg.nonlinearity()?;

    let t0 = Instant::now();
    let r = crate::boundary::reduced_boundary_measure(&bm, &g, &cfg.schedule, &sg, &tg)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let mut trace_rows = Vec::new();
    for (k, est) in r.schedule.iter().zip(&r.estimates) {
        trace_rows.push(vec![
            fmt_f(*k),
            fmt_f(est.side_mass(crate::boundary::Endpoint::Left)),
            fmt_f(est.side_mass(crate::boundary::Endpoint::Right)),
        ]);
    }
    write_csv(&args.out, "traces.csv", &["k", "left_mass", "right_mass"], &trace_rows)?;
    write_dat(
        &args.out,
        "masses.dat",
        &r.schedule.iter().zip(&r.masses).map(|(&k, &m)| (k, m)).collect::<Vec<_>>(),
    )?;
    if args.dump_fields {
        let top = g.with_level(*r.schedule.last().unwrap())?;
        let field = crate::boundary::solve_truncated_boundary(&bm, &top, &sg, &tg)?;
        dump_field(&args.out, "field.csv", &field)?;
    }

    let manifest = serde_json::json!({
        "command": "brelax",
        "config": cfg,
        "versions": version_stamp(),
        "schedule": r.schedule,
        "masses": r.masses,
        "limit": r.limit,
        "limit_mass": r.limit.total_mass(),
        "defect_mass": r.defect_mass,
        "balance_residuals": r.balances.iter().map(|b| b.residual).collect::<Vec<_>>(),
        "flagged": r.flagged,
        "timings": { "ladder_seconds": elapsed },
    });
    write_json(&args.out, "results.json", &manifest)?;
    println!("brelax: defect_mass {:.6}, flagged {}", r.defect_mass, r.flagged);
    Ok(r.flagged)
}

/// "a b[;c d]" -> closed interval list.
fn parse_intervals(text: &str) -> Result<Vec<(f64, f64)>, RmlError> {
    let mut out = Vec::new();
    for chunk in text.split(';') {
        let parts: Vec<&str> = chunk.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(RmlError::InvalidConfig(format!(
                "interval {chunk:?} must be two numbers separated by spaces"
            )));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|e| RmlError::InvalidConfig(format!("interval {chunk:?}: {e}")))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|e| RmlError::InvalidConfig(format!("interval {chunk:?}: {e}")))?;
        out.push((a, b));
    }
    if out.is_empty() {
        return Err(RmlError::InvalidConfig("empty interval list".into()));
    }
    Ok(out)
}

fn write_certificate(dir: &Path, res: &CapacityResult) -> Result<(), RmlError> {
    let f = &res.certificate_psi;
    let nx = f.sg.nx;
    let dt = f.tg.dt();
    let mut rows = Vec::with_capacity(f.nrows() * nx);
    for n in 0..f.nrows() {
        let t = n as f64 * dt;
        for (i, &psi) in f.row(n).iter().enumerate() {
            let residual = if n < f.nrows() - 1 {
                fmt_f(res.residual_f[n * nx + i])
            } else {
                String::new()
            };
            rows.push(vec![fmt_f(t), fmt_f(f.sg.node(i)), fmt_f(psi), residual]);
        }
    }
    write_csv(dir, "certificate.csv", &["t", "x", "psi", "f"], &rows)?;
    Ok(())
}

fn capacity_cmd(args: &CapacityArgs) -> Result<bool, RmlError> {
    let kind = match args.kind.as_str() {
        "initial" => CapacityKind::Initial,
        "lateral" => CapacityKind::Lateral,
        other => {
            return Err(RmlError::InvalidConfig(format!(
                "kind {other:?} must be \"initial\" or \"lateral\""
            )))
        }
    };
    let side = match args.endpoint.as_str() {
        "left" => LateralSide::Left,
        "right" => LateralSide::Right,
        other => {
            return Err(RmlError::InvalidConfig(format!(
                "endpoint {other:?} must be \"left\" or \"right\""
            )))
        }
    };
    let intervals = parse_intervals(&args.set)?;
    let sg = SpaceGrid::new(args.x_l, args.x_r, args.nx)?;
    let tg = TimeGrid::new(args.t_final, args.nt)?;
    let problem = CapacityProblem::new(kind, side, intervals.clone(), sg, tg);

    let t0 = Instant::now();
    let res = solve_capacity(&problem)?;
    let elapsed = t0.elapsed().as_secs_f64();

    write_certificate(&args.out, &res)?;
    let manifest = serde_json::json!({
        "command": "capacity",
        "kind": kind,
        "endpoint": side,
        "intervals": intervals,
        "nx": args.nx,
        "nt": args.nt,
        "t_final": args.t_final,
        "x_l": args.x_l,
        "x_r": args.x_r,
        "versions": version_stamp(),
        "value": res.value,
        "hausdorff": res.hausdorff,
        "relative_error": (res.value - res.hausdorff).abs() / res.hausdorff.max(1e-12),
        "gap": res.gap,
        "iters": res.iterations,
        "converged": res.converged,
        "timings": { "solve_seconds": elapsed },
    });
    write_json(&args.out, "result.json", &manifest)?;
    println!(
        "capacity: value {:.6}, hausdorff {:.6}, gap {:.2e}, iters {}, converged {}",
        res.value, res.hausdorff, res.gap, res.iterations, res.converged
    );
    Ok(!res.converged)
}

fn properties_cmd(args: &PropertiesArgs) -> Result<bool, RmlError> {
    let t0 = Instant::now();
    let reports = run_all(args.seed, args.cases);
    let elapsed = t0.elapsed().as_secs_f64();
    let mut any_violations = false;
    for rep in &reports {
        any_violations |= !rep.passed();
        println!(
            "suite {}: {} cases, {} violations {}",
            rep.suite,
            rep.cases,
            rep.violations,
            if rep.passed() { "ok" } else { "FAIL" }
        );
        for note in &rep.notes {
            println!("  {note}");
        }
    }
    if let Some(out) = &args.out {
        let manifest = serde_json::json!({
            "command": "properties",
            "seed": args.seed,
            "cases": args.cases,
            "versions": version_stamp(),
            "suites": reports,
            "passed": !any_violations,
            "timings": { "total_seconds": elapsed },
        });
        write_json(out, "results.json", &manifest)?;
    }
    Ok(any_violations)
}

fn sweep_cmd(args: &SweepArgs) -> Result<bool, RmlError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(axis) = &args.axis {
        let axis = match axis.as_str() {
            "k" => SweepAxis::K,
            "grid" => SweepAxis::Grid,
            "both" => SweepAxis::Both,
            other => {
                return Err(RmlError::InvalidConfig(format!(
                    "axis {other:?} must be \"k\", \"grid\", or \"both\""
                )))
            }
        };
        match cfg.sweep.as_mut() {
            Some(sw) => sw.axis = axis,
            None => {
                cfg.sweep = Some(SweepConfig {
                    axis,
                    grid_levels: crate::config::SweepConfig::default_levels(),
                    joint_caps: crate::config::SweepConfig::default_caps(),
                    capacity: None,
                    budget_seconds: None,
                })
            }
        }
    }

    let t0 = Instant::now();
    let rep = run_sweep(&cfg)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let (header, rows) = rep.csv_rows();
    write_csv(&args.out, "sweep.csv", &header, &rows)?;
    write_dat(&args.out, "curve.dat", &rep.dat_points())?;

    let mut timings = serde_json::Map::new();
    for (name, secs) in &rep.timings {
        timings.insert(name.clone(), serde_json::json!(secs));
    }
    timings.insert("total_seconds".into(), serde_json::json!(elapsed));
    let manifest = serde_json::json!({
        "command": "sweep",
        "config": cfg,
        "versions": version_stamp(),
        "report": rep,
        "timings": timings,
    });
    write_json(&args.out, "results.json", &manifest)?;
    println!(
        "sweep: axis {:?}, {} rows, flagged {}",
        rep.axis,
        rep.k_rows.len() + rep.grid_rows.len() + rep.joint_cells.len(),
        rep.flagged
    );
    Ok(rep.flagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_parsing() {
        assert_eq!(parse_intervals("-0.25 0.25").unwrap(), vec![(-0.25, 0.25)]);
        assert_eq!(
            parse_intervals("0 0.2; 0.4 0.6").unwrap(),
            vec![(0.0, 0.2), (0.4, 0.6)]
        );
        assert!(parse_intervals("0.25").is_err());
        assert!(parse_intervals("a b").is_err());
        assert!(parse_intervals("").is_err());
    }

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(run(["rml", "bogus"]), 2);
        assert_eq!(run(["rml", "relax", "--config"]), 2);
        assert_eq!(run(["rml", "relax", "--config", "/nonexistent.json", "--out", "/tmp/x"]), 2);
        assert_eq!(
            run(["rml", "capacity", "--kind", "diagonal", "--K", "0 1", "--out", "/tmp/x"]),
            2
        );
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(["rml", "--help"]), 0);
    }

    #[test]
    fn small_relax_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(
            &cfg_path,
            r#"{
                "grid": {"nx": 99, "nt": 64},
                "measure": {"density": "uniform(0.5)"},
                "g": {"kind": "power", "p": 4.0, "c": 1.0},
                "schedule": [1.0, 4.0, 16.0, 64.0]
            }"#,
        )
        .unwrap();
        let out = dir.path().join("out");
        let code = run([
            "rml",
            "relax",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["verdict"], "good");
        assert_eq!(manifest["config"]["t_final"], 0.25);
        assert!(out.join("traces.csv").exists());
        assert!(out.join("masses.dat").exists());
    }
}
