//! Seeded property campaigns: exact algebra laws of the measure
//! representation, the solver's exact comparison order, and the structural
//! laws of reduced measures (order, contraction, lattice, restriction,
//! additivity of mutually singular parts, singularity of the defect).
//!
//! Every campaign is deterministic per seed (ChaCha8); a report counts
//! violations and keeps the first few diagnostics verbatim.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{
    boundary_sup, boundary_tv_distance, reduced_boundary_measure, BoundaryMeasure, BoundarySide,
};
use crate::error::RmlError;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::measure::{
    interval_complement, measure_add, measure_inf, measure_leq, measure_restrict, measure_sup,
    tv_distance, Atom, GridMeasure,
};
use crate::nonlinearity::{GKind, NonlinearitySpec};
use crate::pde::{mass_balance, solve_truncated, MassBalance};
use crate::relax::{is_good, reduced_measure, GoodnessVerdict, RelaxationResult};

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub suite: String,
    pub cases: usize,
    pub violations: usize,
    pub notes: Vec<String>,
}

impl PropertyReport {
    fn new(suite: &str) -> Self {
        PropertyReport { suite: suite.to_string(), cases: 0, violations: 0, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, case: usize, msg: impl FnOnce() -> String) {
        if !ok {
            self.violations += 1;
            if self.notes.len() < 8 {
                self.notes.push(format!("case {case}: {}", msg()));
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

// Solver-backed suites run on a reduced desk grid with a short ladder.
const SOLVER_NX: usize = 199;
const SOLVER_NT: usize = 128;
const SOLVER_T: f64 = 0.25;
const SHORT_SCHEDULE: [f64; 5] = [1.0, 4.0, 16.0, 64.0, 256.0];

fn solver_grids() -> (SpaceGrid, TimeGrid) {
    (SpaceGrid::new(-1.0, 1.0, SOLVER_NX).unwrap(), TimeGrid::new(SOLVER_T, SOLVER_NT).unwrap())
}

/// Atoms uniform in the inner 80% of the domain, masses in [0.1, 2];
/// `min_sep` > 0 re-draws until all locations (including `avoid`) are that
/// far apart, keeping singular parts resolvable by the trace bumps.
fn sample_atoms(rng: &mut ChaCha8Rng, sg: &SpaceGrid, min_sep: f64, avoid: &[f64]) -> Vec<Atom> {
    let n = rng.gen_range(0..=3usize);
    let lo = sg.x_l + 0.1 * sg.len();
    let hi = sg.x_r - 0.1 * sg.len();
    'redraw: loop {
        let locs: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        if min_sep > 0.0 {
            for (i, a) in locs.iter().enumerate() {
                let crowded = locs[..i].iter().chain(avoid).any(|b| (a - b).abs() < min_sep);
                if crowded {
                    continue 'redraw;
                }
            }
        }
        return locs
            .into_iter()
            .map(|loc| Atom { loc, mass: rng.gen_range(0.1..2.0) })
            .collect();
    }
}

/// Density part: zero, uniform, or a triangular bump, all with O(1) mass.
fn sample_density(rng: &mut ChaCha8Rng, sg: &SpaceGrid, wide_only: bool) -> Vec<f64> {
    match rng.gen_range(0..3u8) {
        0 if !wide_only => vec![0.0; sg.ncell()],
        1 => {
            let mass = rng.gen_range(0.1..2.0);
            vec![mass / sg.len(); sg.ncell()]
        }
        _ => {
            let half = sg.len() / 2.0;
            let w = if wide_only {
                rng.gen_range(0.3..0.5) * half
            } else {
                rng.gen_range(0.15..0.5) * half
            };
            let c = rng.gen_range(sg.x_l + 0.1 * sg.len() + w..sg.x_r - 0.1 * sg.len() - w);
            let mass = rng.gen_range(0.1..2.0);
            let height = mass / w;
            (0..sg.ncell())
                .map(|j| {
                    let x = sg.cell_center(j);
                    height * (1.0 - (x - c).abs() / w).max(0.0)
                })
                .collect()
        }
    }
}

/// Raw sampler for the exact-algebra suite.
pub fn sample_measure(rng: &mut ChaCha8Rng, sg: &SpaceGrid) -> GridMeasure {
    let atoms = sample_atoms(rng, sg, 0.0, &[]);
    let density = sample_density(rng, sg, false);
    GridMeasure::new(*sg, atoms, density).expect("sampler stays in the valid range")
}

/// Sampler for solver-backed suites: atom locations at least eight cells
/// apart (also from `avoid`).
fn sample_solver_measure(rng: &mut ChaCha8Rng, sg: &SpaceGrid, avoid: &[f64]) -> GridMeasure {
    let atoms = sample_atoms(rng, sg, 8.0 * sg.dx(), avoid);
    let density = sample_density(rng, sg, true);
    GridMeasure::new(*sg, atoms, density).expect("sampler stays in the valid range")
}

/// Absorption-term catalogue for randomized runs.
fn sample_g(rng: &mut ChaCha8Rng) -> NonlinearitySpec {
    match rng.gen_range(0..4u8) {
        0 => NonlinearitySpec::power(2.0, 1.0).unwrap(),
        1 => NonlinearitySpec::power(4.0, 1.0).unwrap(),
        2 => NonlinearitySpec::exponential(1.0).unwrap(),
        _ => NonlinearitySpec::new(
            GKind::Table { rs: vec![0.5, 1.0, 2.0, 4.0], gs: vec![0.3, 1.0, 3.0, 8.0] },
            f64::INFINITY,
        )
        .unwrap(),
    }
}

fn bitwise_eq(a: &GridMeasure, b: &GridMeasure) -> bool {
    a.atoms == b.atoms && a.density == b.density
}

/// Mass of the componentwise positive part (a - b)_+: how far `a` sticks out
/// above `b`.
fn excess_mass(a: &GridMeasure, b: &GridMeasure) -> f64 {
    let dx = a.grid.dx();
    let mut excess = 0.0;
    for atom in &a.atoms {
        let matched = b.atoms.iter().find(|x| x.loc == atom.loc).map_or(0.0, |x| x.mass);
        excess += (atom.mass - matched).max(0.0);
    }
    for (x, y) in a.density.iter().zip(&b.density) {
        excess += (x - y).max(0.0) * dx;
    }
    excess
}

fn balance_ok(b: &MassBalance) -> bool {
    b.residual.abs() <= 1e-10 * b.initial_mass.max(1.0)
}

fn check_balances(rep: &mut PropertyReport, case: usize, result: &RelaxationResult) {
    for b in &result.balances {
        rep.check(balance_ok(b), case, || {
            format!("mass-balance residual {:e} above 1e-10 relative", b.residual)
        });
    }
}

/// Exact lattice/restriction/decomposition laws of the representation.
/// No solves; all equalities bitwise or 1e-12-relative where stated.
pub fn measure_algebra_suite(seed: u64, cases: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("measure_algebra");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sg = SpaceGrid::new(-1.0, 1.0, 199).unwrap();
    for case in 0..cases {
        rep.cases += 1;
        let a = sample_measure(&mut rng, &sg);
        let b = sample_measure(&mut rng, &sg);
        let c = sample_measure(&mut rng, &sg);

        let sup_ab = measure_sup(&a, &b).unwrap();
        let inf_ab = measure_inf(&a, &b).unwrap();

        rep.check(bitwise_eq(&sup_ab, &measure_sup(&b, &a).unwrap()), case, || "sup not commutative".into());
        rep.check(bitwise_eq(&inf_ab, &measure_inf(&b, &a).unwrap()), case, || "inf not commutative".into());
        rep.check(
            bitwise_eq(
                &measure_sup(&sup_ab, &c).unwrap(),
                &measure_sup(&a, &measure_sup(&b, &c).unwrap()).unwrap(),
            ),
            case,
            || "sup not associative".into(),
        );
        rep.check(
            bitwise_eq(
                &measure_inf(&inf_ab, &c).unwrap(),
                &measure_inf(&a, &measure_inf(&b, &c).unwrap()).unwrap(),
            ),
            case,
            || "inf not associative".into(),
        );
        rep.check(bitwise_eq(&measure_sup(&a, &a).unwrap(), &a), case, || "sup not idempotent".into());
        rep.check(bitwise_eq(&measure_inf(&a, &a).unwrap(), &a), case, || "inf not idempotent".into());

        // modular law: sup + inf = a + b, cellwise and atomwise
        let lhs = measure_add(&sup_ab, &inf_ab).unwrap();
        let rhs = measure_add(&a, &b).unwrap();
        rep.check(bitwise_eq(&lhs, &rhs), case, || "sup + inf != a + b".into());

        rep.check(measure_leq(&inf_ab, &a).unwrap(), case, || "inf above a".into());
        rep.check(measure_leq(&a, &sup_ab).unwrap(), case, || "a above sup".into());

        // restriction partitions mass
        let e_lo = rng.gen_range(sg.x_l..sg.x_r - 0.1);
        let e_hi = rng.gen_range(e_lo..sg.x_r);
        let e = [(e_lo, e_hi)];
        let inside = measure_restrict(&a, &e).unwrap();
        let outside = measure_restrict(&a, &interval_complement(&sg, &e)).unwrap();
        let total = a.total_mass().max(1e-12);
        rep.check(
            (inside.total_mass() + outside.total_mass() - a.total_mass()).abs() <= 1e-12 * total,
            case,
            || "restriction does not partition mass".into(),
        );

        // decomposition reassembles bit-for-bit and the parts are singular
        let (singular, ac) = a.lebesgue_decompose();
        rep.check(bitwise_eq(&measure_add(&singular, &ac).unwrap(), &a), case, || {
            "decompose/reassemble not the identity".into()
        });
        rep.check(
            measure_inf(&singular, &ac).unwrap().total_mass() == 0.0,
            case,
            || "atom and density parts not mutually singular".into(),
        );
    }
    rep
}

/// Exact discrete comparison: ordered data gives ordered solutions at every
/// node and step, no tolerance.
pub fn ordered_pairs_suite(seed: u64, cases: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("ordered_pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f72_6465_7265_6431);
    let (sg, tg) = solver_grids();
    for case in 0..cases {
        rep.cases += 1;
        let m2 = sample_solver_measure(&mut rng, &sg, &[]);
        let c = rng.gen_range(0.1..0.9);
        let m1 = m2.scale(c).unwrap();
        let level = [1.0, 4.0, 64.0, 1e4][rng.gen_range(0..4usize)];
        let g = sample_g(&mut rng).with_level(level).unwrap();

        let u1 = solve_truncated(&m1, &g, &sg, &tg).unwrap();
        let u2 = solve_truncated(&m2, &g, &sg, &tg).unwrap();
        let mut bad = 0usize;
        for n in 0..u1.nrows() {
            for (x, y) in u1.row(n).iter().zip(u2.row(n)) {
                if x > y {
                    bad += 1;
                }
            }
        }
        rep.check(bad == 0, case, || format!("{bad} nodes violate u1 <= u2"));
        for (m, u) in [(&m1, &u1), (&m2, &u2)] {
            let b = mass_balance(u, &g, m).unwrap();
            rep.check(balance_ok(&b), case, || {
                format!("mass-balance residual {:e} above 1e-10 relative", b.residual)
            });
        }
    }
    rep
}

fn reduce(
    m: &GridMeasure,
    g: &NonlinearitySpec,
    sg: &SpaceGrid,
    tg: &TimeGrid,
) -> Result<RelaxationResult, RmlError> {
    reduced_measure(m, g, &SHORT_SCHEDULE, sg, tg)
}

fn structure_tol(masses: &[f64]) -> f64 {
    0.05 * masses.iter().fold(0.0f64, |a, b| a.max(*b)).max(1e-9)
}

/// One family of the reduced-measure structure suite.
fn structure_family(
    name: &str,
    seed: u64,
    cases: usize,
    mut body: impl FnMut(&mut PropertyReport, usize, &mut ChaCha8Rng, &SpaceGrid, &TimeGrid),
) -> PropertyReport {
    let mut rep = PropertyReport::new(name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fxhash(name));
    let (sg, tg) = solver_grids();
    for case in 0..cases {
        rep.cases += 1;
        body(&mut rep, case, &mut rng, &sg, &tg);
    }
    rep
}

/// Small stable string hash to derive per-suite seeds.
fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// The six structural families, `cases` seeded cases each: order and the
/// mass form, total-variation contraction, lattice identities, restriction
/// commutation, additivity over mutually singular parts, and singularity of
/// the defect (the density part survives).
pub fn structure_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let order = structure_family("structure_order", seed, cases, |rep, case, rng, sg, tg| {
        let m2 = sample_solver_measure(rng, sg, &[]);
        let m1 = m2.scale(rng.gen_range(0.1..0.9)).unwrap();
        let g = sample_g(rng);
        let r1 = reduce(&m1, &g, sg, tg).unwrap();
        let r2 = reduce(&m2, &g, sg, tg).unwrap();
        check_balances(rep, case, &r1);
        check_balances(rep, case, &r2);
        let tol = structure_tol(&[m1.total_mass(), m2.total_mass()]);
        let excess = excess_mass(&r1.limit, &r2.limit);
        rep.check(excess <= tol, case, || format!("order violated by mass {excess:.4}"));
        let gap = (r2.limit.total_mass() - r1.limit.total_mass())
            - (m2.total_mass() - m1.total_mass());
        rep.check(gap <= tol, case, || format!("mass form violated by {gap:.4}"));
    });

    let contraction =
        structure_family("structure_contraction", seed, cases, |rep, case, rng, sg, tg| {
            let m = sample_solver_measure(rng, sg, &[]);
            let avoid: Vec<f64> = m.atoms.iter().map(|a| a.loc).collect();
            let n = sample_solver_measure(rng, sg, &avoid);
            let g = sample_g(rng);
            let rm = reduce(&m, &g, sg, tg).unwrap();
            let rn = reduce(&n, &g, sg, tg).unwrap();
            check_balances(rep, case, &rm);
            check_balances(rep, case, &rn);
            let tol = structure_tol(&[m.total_mass(), n.total_mass()]);
            let before = tv_distance(&m, &n).unwrap();
            let after = tv_distance(&rm.limit, &rn.limit).unwrap();
            rep.check(after <= before + tol, case, || {
                format!("contraction violated: |m*-n*| = {after:.4} > |m-n| = {before:.4} + tol")
            });
        });

    let lattice = structure_family("structure_lattice", seed, cases, |rep, case, rng, sg, tg| {
        let m = sample_solver_measure(rng, sg, &[]);
        let avoid: Vec<f64> = m.atoms.iter().map(|a| a.loc).collect();
        let n = sample_solver_measure(rng, sg, &avoid);
        let g = sample_g(rng);
        let rm = reduce(&m, &g, sg, tg).unwrap();
        let rn = reduce(&n, &g, sg, tg).unwrap();
        check_balances(rep, case, &rm);
        check_balances(rep, case, &rn);
        let tol = structure_tol(&[m.total_mass(), n.total_mass()]);
        for (tag, joined, split) in [
            ("sup", measure_sup(&m, &n).unwrap(), measure_sup(&rm.limit, &rn.limit).unwrap()),
            ("inf", measure_inf(&m, &n).unwrap(), measure_inf(&rm.limit, &rn.limit).unwrap()),
        ] {
            let rj = reduce(&joined, &g, sg, tg).unwrap();
            check_balances(rep, case, &rj);
            let d = tv_distance(&rj.limit, &split).unwrap();
            rep.check(d <= tol, case, || format!("{tag} identity off by TV {d:.4}"));
        }
    });

    let restriction =
        structure_family("structure_restriction", seed, cases, |rep, case, rng, sg, tg| {
            let m = sample_solver_measure(rng, sg, &[]);
            let g = sample_g(rng);
            let r = reduce(&m, &g, sg, tg).unwrap();
            check_balances(rep, case, &r);
            let e_lo = rng.gen_range(sg.x_l..sg.x_r - 0.2);
            let e_hi = rng.gen_range(e_lo + 0.1..sg.x_r);
            let e = [(e_lo, e_hi)];
            let restricted_first = reduce(&measure_restrict(&m, &e).unwrap(), &g, sg, tg).unwrap();
            check_balances(rep, case, &restricted_first);
            let reduced_first = measure_restrict(&r.limit, &e).unwrap();
            let tol = structure_tol(&[m.total_mass()]);
            let d = tv_distance(&restricted_first.limit, &reduced_first).unwrap();
            rep.check(d <= tol, case, || format!("restriction commutation off by TV {d:.4}"));
        });

    let additivity =
        structure_family("structure_additivity", seed, cases, |rep, case, rng, sg, tg| {
            let atoms = GridMeasure::new(*sg, sample_atoms(rng, sg, 8.0 * sg.dx(), &[]), vec![0.0; sg.ncell()]).unwrap();
            let density = GridMeasure::new(*sg, Vec::new(), sample_density(rng, sg, true)).unwrap();
            let g = sample_g(rng);
            let ra = reduce(&atoms, &g, sg, tg).unwrap();
            let rd = reduce(&density, &g, sg, tg).unwrap();
            let rsum = reduce(&measure_add(&atoms, &density).unwrap(), &g, sg, tg).unwrap();
            check_balances(rep, case, &ra);
            check_balances(rep, case, &rd);
            check_balances(rep, case, &rsum);
            let split = measure_add(&ra.limit, &rd.limit).unwrap();
            let tol = structure_tol(&[atoms.total_mass() + density.total_mass()]);
            let d = tv_distance(&rsum.limit, &split).unwrap();
            rep.check(d <= tol, case, || format!("singular additivity off by TV {d:.4}"));
        });

    let defect = structure_family("structure_defect", seed, cases, |rep, case, rng, sg, tg| {
        let m = sample_solver_measure(rng, sg, &[]);
        let g = sample_g(rng);
        let r = reduce(&m, &g, sg, tg).unwrap();
        check_balances(rep, case, &r);
        // the defect charges only the singular part: the density survives
        let dx = sg.dx();
        let drift: f64 = r
            .limit
            .density
            .iter()
            .zip(&m.density)
            .map(|(est, inp)| (est - inp).abs() * dx)
            .sum();
        let tol = 0.02 * m.total_mass().max(1e-9);
        rep.check(drift <= tol, case, || {
            format!("density part drifted by {drift:.4} (limit {tol:.4})")
        });
    });

    vec![order, contraction, lattice, restriction, additivity, defect]
}

/// Boundary counterpart of the structure suite (order, contraction, lattice
/// rotate across cases), plus the exact nonincreasing-mass invariant.
pub fn boundary_structure_suite(seed: u64, cases: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("boundary_structure");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626f_756e_6461_7279);
    let (sg, tg) = solver_grids();

    let sample_side = |rng: &mut ChaCha8Rng| -> BoundarySide {
        let n = rng.gen_range(0..=2usize);
        let mut atoms = Vec::new();
        let min_sep = 16.0 * tg.dt();
        while atoms.len() < n {
            let t = rng.gen_range(0.15 * tg.t_final..0.85 * tg.t_final);
            if atoms.iter().all(|a: &Atom| (a.loc - t).abs() >= min_sep) {
                atoms.push(Atom { loc: t, mass: rng.gen_range(0.1..2.0) });
            }
        }
        let density = match rng.gen_range(0..3u8) {
            0 => vec![0.0; tg.nt],
            _ => vec![rng.gen_range(0.1..2.0) / tg.t_final; tg.nt],
        };
        BoundarySide { atoms, density }
    };
    let sample_bm = |rng: &mut ChaCha8Rng| -> BoundaryMeasure {
        BoundaryMeasure::new(tg, sample_side(rng), sample_side(rng)).unwrap()
    };

    for case in 0..cases {
        rep.cases += 1;
        let bm = sample_bm(&mut rng);
        let g = sample_g(&mut rng);
        let r = reduced_boundary_measure(&bm, &g, &SHORT_SCHEDULE, &sg, &tg).unwrap();
        for b in &r.balances {
            rep.check(balance_ok(b), case, || {
                format!("mass-balance residual {:e} above 1e-10 relative", b.residual)
            });
        }
        rep.check(
            r.masses.windows(2).all(|w| w[1] <= w[0]),
            case,
            || "trace-mass sequence increased along the ladder".into(),
        );
        let tol = 0.05 * bm.total_mass().max(1e-9);
        rep.check(
            r.limit.total_mass() <= bm.total_mass() + tol,
            case,
            || "reduced boundary measure exceeds the data".into(),
        );

        match case % 3 {
            0 => {
                // order under scaling
                let small = bm.scale(rng.gen_range(0.1..0.9)).unwrap();
                let rs = reduced_boundary_measure(&small, &g, &SHORT_SCHEDULE, &sg, &tg).unwrap();
                rep.check(
                    rs.limit.total_mass() <= r.limit.total_mass() + tol,
                    case,
                    || "boundary order violated".into(),
                );
            }
            1 => {
                let other = sample_bm(&mut rng);
                let ro = reduced_boundary_measure(&other, &g, &SHORT_SCHEDULE, &sg, &tg).unwrap();
                let before = boundary_tv_distance(&bm, &other).unwrap();
                let after = boundary_tv_distance(&r.limit, &ro.limit).unwrap();
                let tol2 = 0.05 * bm.total_mass().max(other.total_mass()).max(1e-9);
                rep.check(after <= before + tol2, case, || {
                    format!("boundary contraction violated: {after:.4} > {before:.4} + tol")
                });
            }
            _ => {
                let other = sample_bm(&mut rng);
                let ro = reduced_boundary_measure(&other, &g, &SHORT_SCHEDULE, &sg, &tg).unwrap();
                let joined = boundary_sup(&bm, &other).unwrap();
                let rj = reduced_boundary_measure(&joined, &g, &SHORT_SCHEDULE, &sg, &tg).unwrap();
                let split = boundary_sup(&r.limit, &ro.limit).unwrap();
                let tol2 = 0.05 * joined.total_mass().max(1e-9);
                let d = boundary_tv_distance(&rj.limit, &split).unwrap();
                rep.check(d <= tol2, case, || format!("boundary sup identity off by TV {d:.4}"));
            }
        }
    }
    rep
}

/// Everything below a good measure is good.
pub fn good_cone_suite(seed: u64, cases: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("good_cone");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x676f_6f64_636f_6e65);
    let (sg, tg) = solver_grids();
    for case in 0..cases {
        rep.cases += 1;
        // AC data with height <= 1 keeps every catalogue g below the ladder
        let m = GridMeasure::uniform(sg, rng.gen_range(0.25..1.0)).unwrap();
        let g = sample_g(&mut rng);
        let toll = crate::relax::default_goodness_tol(&m);
        let verdict_m = is_good(&m, &g, &SHORT_SCHEDULE, &sg, &tg, toll).unwrap();
        rep.check(
            matches!(verdict_m.verdict, GoodnessVerdict::Good),
            case,
            || format!("base measure not judged good: {:?}", verdict_m.verdict),
        );
        let nu = m.scale(rng.gen_range(0.2..0.9)).unwrap();
        let verdict_nu =
            is_good(&nu, &g, &SHORT_SCHEDULE, &sg, &tg, crate::relax::default_goodness_tol(&nu))
                .unwrap();
        rep.check(
            matches!(verdict_nu.verdict, GoodnessVerdict::Good),
            case,
            || format!("scaled-down measure not judged good: {:?}", verdict_nu.verdict),
        );
    }
    rep
}

/// Full campaign; `cases` sets the per-family count of the structure suite
/// and the other suites scale with it (50 reproduces the acceptance sizes).
pub fn run_all(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let mut reports = vec![
        measure_algebra_suite(seed, 20 * cases),
        ordered_pairs_suite(seed, 2 * cases),
    ];
    reports.extend(structure_suite(seed, cases));
    reports.push(boundary_structure_suite(seed, (cases / 5).max(4)));
    reports.push(good_cone_suite(seed, (cases / 10).max(3)));
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebra_suite_clean_and_fast() {
        let rep = measure_algebra_suite(7, 200);
        assert_eq!(rep.cases, 200);
        assert!(rep.passed(), "violations: {:?}", rep.notes);
    }

    #[test]
    fn algebra_suite_is_deterministic() {
        let a = measure_algebra_suite(11, 50);
        let b = measure_algebra_suite(11, 50);
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.notes, b.notes);
    }

    #[test]
    fn ordered_pairs_clean() {
        let rep = ordered_pairs_suite(3, 6);
        assert!(rep.passed(), "violations: {:?}", rep.notes);
    }

    #[test]
    fn structure_families_clean_smoke() {
        for rep in structure_suite(5, 2) {
            assert!(rep.passed(), "{}: {:?}", rep.suite, rep.notes);
        }
    }

    #[test]
    fn boundary_and_cone_clean_smoke() {
        let rep = boundary_structure_suite(9, 3);
        assert!(rep.passed(), "violations: {:?}", rep.notes);
        let rep = good_cone_suite(9, 2);
        assert!(rep.passed(), "violations: {:?}", rep.notes);
    }

}
