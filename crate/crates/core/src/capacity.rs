//! Parabolic capacity as an L1 variational problem.
//!
//! The capacity of a compact set is the least space-time L1 mass of a source
//! `f` whose backward heat solve `psi` (zero at the final time and on the
//! lateral boundary, same stencils as the forward scheme) clears height one
//! on the set: `psi(., 0) >= 1` on the nodes of an interior set, or
//! `psi(first interior node, t)/dx >= 1` on the time cells of a lateral set
//! (a one-sided normal-derivative quotient). Minimizing sources for interior
//! sets concentrate toward time zero, so the time-0 trace is read before the
//! first diffusion solve: the first-cell source acts as an instantaneous
//! layer. Without that reading the value carries an O(sqrt(dt)) excess from
//! mass the dual can hide beside the set for one smoothing step. In one
//! space dimension the value should match the length of the set under grid
//! refinement.
//!
//! The solver is a matrix-free first-order primal-dual splitting: the heat
//! operator is applied by tridiagonal sweeps, the L1 term by soft
//! thresholding, the constraints by clamping the multipliers. A dense
//! simplex solve of the same model (`lp_oracle`) cross-checks small grids.

use serde::{Deserialize, Serialize};

use crate::error::RmlError;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::pde::{DiffusionStep, SpaceTimeField};
use crate::simplex::l1_min_with_lower_bounds;

/// Which trace the constraint reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKind {
    /// `psi(x, 0) >= 1` on nodes inside the set (a subset of the domain).
    Initial,
    /// `psi(node nearest the endpoint, t)/dx >= 1` on time cells inside the
    /// set (a subset of one lateral boundary line).
    Lateral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralSide {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub kind: CapacityKind,
    /// Ignored for the initial kind.
    pub side: LateralSide,
    /// Closed intervals: in space for the initial kind, in time for the
    /// lateral kind.
    pub intervals: Vec<(f64, f64)>,
    pub sg: SpaceGrid,
    pub tg: TimeGrid,
    pub max_iters: usize,
    /// Relative duality-gap target.
    pub tol: f64,
}

impl CapacityProblem {
    pub fn new(
        kind: CapacityKind,
        side: LateralSide,
        intervals: Vec<(f64, f64)>,
        sg: SpaceGrid,
        tg: TimeGrid,
    ) -> Self {
        CapacityProblem { kind, side, intervals, sg, tg, max_iters: 200_000, tol: 1e-4 }
    }
}

#[derive(Debug)]
pub struct CapacityResult {
    pub value: f64,
    /// The backward solution certifying the value; feasible by construction.
    pub certificate_psi: SpaceTimeField,
    /// Source recomputed from the certificate through the scheme stencils,
    /// one row of `nx` entries per time cell.
    pub residual_f: Vec<f64>,
    /// Length of the constraint set after merging overlaps.
    pub hausdorff: f64,
    pub iterations: usize,
    /// Feasible primal value minus feasible dual value at exit.
    pub gap: f64,
    /// Cleared the gap target within the iteration budget.
    pub converged: bool,
}

/// Total length of a union of closed intervals (overlaps merged).
pub fn hausdorff_measure(intervals: &[(f64, f64)]) -> Result<f64, RmlError> {
    let mut sorted = intervals.to_vec();
    for &(a, b) in &sorted {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(RmlError::InvalidCapacityProblem(format!("bad interval [{a}, {b}]")));
        }
    }
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in sorted {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = cur {
        total += cb - ca;
    }
    Ok(total)
}

/// Discrete constraint sites: `(time index, node index)` pairs where the
/// backward solution is read, plus the common scale of the reading.
#[derive(Debug)]
pub struct CapacityModel {
    /// Sorted by time index.
    pub sites: Vec<(usize, usize)>,
    /// 1 for initial constraints, 1/dx for the lateral normal quotient.
    pub scale: f64,
}

/// Enumerates the constraint sites of a problem.
///
/// Interior sets take the nodes strictly inside the intervals (the set must
/// keep two cells clear of the boundary); lateral sets take the time cells
/// contained in the intervals, read at the start of each cell. Either way an
/// empty site list is a hard error.
pub fn assemble(problem: &CapacityProblem) -> Result<CapacityModel, RmlError> {
    let sg = &problem.sg;
    let tg = &problem.tg;
    if problem.intervals.is_empty() {
        return Err(RmlError::InvalidCapacityProblem("no intervals given".into()));
    }
    let eps = 1e-9;
    let mut sites = Vec::new();
    let scale;
    match problem.kind {
        CapacityKind::Initial => {
            scale = 1.0;
            let margin = 2.0 * sg.dx();
            for &(a, b) in &problem.intervals {
                if !a.is_finite() || !b.is_finite() || a > b {
                    return Err(RmlError::InvalidCapacityProblem(format!(
                        "bad interval [{a}, {b}]"
                    )));
                }
                if a < sg.x_l + margin - eps || b > sg.x_r - margin + eps {
                    return Err(RmlError::InvalidCapacityProblem(format!(
                        "interval [{a}, {b}] must keep two cells clear of ({}, {})",
                        sg.x_l, sg.x_r
                    )));
                }
            }
            let dx = sg.dx();
            for i in 0..sg.nx {
                let x = sg.node(i);
                let inside = problem.intervals.iter().any(|&(a, b)| {
                    if b - a <= dx {
                        // Thin sets snap to the nearest node.
                        (x - 0.5 * (a + b)).abs() <= 0.5 * dx + eps
                    } else {
                        x > a + eps && x < b - eps
                    }
                });
                if inside {
                    sites.push((0, i));
                }
            }
        }
        CapacityKind::Lateral => {
            scale = 1.0 / sg.dx();
            let node = match problem.side {
                LateralSide::Left => 0,
                LateralSide::Right => sg.nx - 1,
            };
            for &(a, b) in &problem.intervals {
                if !a.is_finite() || !b.is_finite() || a > b || a < -eps || b > tg.t_final + eps {
                    return Err(RmlError::InvalidCapacityProblem(format!(
                        "bad time interval [{a}, {b}] in [0, {}]",
                        tg.t_final
                    )));
                }
            }
            let dt = tg.dt();
            for n in 0..tg.nt {
                let t0 = n as f64 * dt;
                let t1 = (n + 1) as f64 * dt;
                if problem.intervals.iter().any(|&(a, b)| t0 >= a - eps && t1 <= b + eps) {
                    sites.push((n, node));
                }
            }
        }
    }
    if sites.is_empty() {
        return Err(RmlError::InvalidCapacityProblem(
            "constraint set resolves to zero sites; refine the grid or widen the set".into(),
        ));
    }
    sites.sort_unstable();
    Ok(CapacityModel { sites, scale })
}

/// Matrix-free application of the constraint operator and its adjoint.
struct ConstraintOp<'a> {
    step: DiffusionStep,
    model: &'a CapacityModel,
    /// Interior-set problems read the time-0 trace before the first solve.
    initial: bool,
    nx: usize,
    nt: usize,
    dt: f64,
}

impl<'a> ConstraintOp<'a> {
    fn new(problem: &CapacityProblem, model: &'a CapacityModel) -> Result<Self, RmlError> {
        Ok(ConstraintOp {
            step: DiffusionStep::new(&problem.sg, &problem.tg)?,
            model,
            initial: problem.kind == CapacityKind::Initial,
            nx: problem.sg.nx,
            nt: problem.tg.nt,
            dt: problem.tg.dt(),
        })
    }

    /// Backward sweep: reads `psi` (driven by source `f`) at every site.
    /// Interior sites (all at time index 0) read after the first-cell source
    /// lands but before it diffuses; lateral sites read the solved state of
    /// their own cell.
    fn apply(&self, f: &[f64], out: &mut [f64]) {
        let mut psi = vec![0.0; self.nx];
        // Sites are sorted ascending by time index; walk them from the back.
        let mut s = self.model.sites.len();
        for n in (0..self.nt).rev() {
            for (p, &fv) in psi.iter_mut().zip(&f[n * self.nx..(n + 1) * self.nx]) {
                *p += self.dt * fv;
            }
            if !self.initial {
                self.step.solve_in_place(&mut psi);
            }
            while s > 0 && self.model.sites[s - 1].0 == n {
                s -= 1;
                out[s] = self.model.scale * psi[self.model.sites[s].1];
            }
            if self.initial {
                self.step.solve_in_place(&mut psi);
            }
        }
        debug_assert_eq!(s, 0);
    }

    /// Forward sweep: the exact adjoint of `apply` (the step matrix is
    /// symmetric, so powers transpose to themselves). Mirroring `apply`,
    /// interior injections skip the solve of their own cell.
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.nx];
        let mut s = 0;
        for n in 0..self.nt {
            if self.initial {
                self.step.solve_in_place(&mut w);
            }
            while s < self.model.sites.len() && self.model.sites[s].0 == n {
                w[self.model.sites[s].1] += self.model.scale * y[s];
                s += 1;
            }
            if !self.initial {
                self.step.solve_in_place(&mut w);
            }
            for (o, &wv) in out[n * self.nx..(n + 1) * self.nx].iter_mut().zip(&w) {
                *o = self.dt * wv;
            }
        }
    }

}

/// Minimizes `sum |f| dx dt` subject to the site constraints by a primal-dual
/// splitting with diagonal step preconditioning: the operator has nonnegative
/// entries, so applying it and its adjoint to all-ones vectors yields the
/// exact row and column absolute sums, and steps `sigma_r = 0.99 / rowsum_r`,
/// `tau_j = 0.99 / colsum_j` keep the preconditioned operator norm below one.
/// Terminates when the feasible primal and dual values agree to the problem
/// tolerance; otherwise runs out the iteration budget and reports
/// `converged = false`. The certificate is the primal iterate rescaled to
/// exact feasibility.
pub fn solve_capacity(problem: &CapacityProblem) -> Result<CapacityResult, RmlError> {
    if !(problem.tol > 0.0) || problem.max_iters == 0 {
        return Err(RmlError::InvalidCapacityProblem(
            "solver needs a positive tolerance and a nonzero iteration budget".into(),
        ));
    }
    let model = assemble(problem)?;
    let op = ConstraintOp::new(problem, &model)?;
    let nvar = op.nt * op.nx;
    let m = model.sites.len();
    let weight = problem.sg.dx() * problem.tg.dt();

    let mut sigma = vec![0.0; m];
    let mut tau = vec![0.0; nvar];
    op.apply(&vec![1.0; nvar], &mut sigma);
    op.apply_adjoint(&vec![1.0; m], &mut tau);
    for s in &mut sigma {
        // Every site reads at least its own injection, so row sums are positive.
        *s = 0.99 / *s;
    }
    for t in &mut tau {
        // Cells after the last site never influence a constraint; freeze them.
        *t = if *t > 0.0 { 0.99 / *t } else { 0.0 };
    }

    // Dense operator rows (one adjoint sweep per site) power the dual
    // polish; skipped when the cache would get out of hand.
    let rows_a: Vec<Vec<f64>> = if m * nvar <= 32_000_000 {
        let mut rows = Vec::with_capacity(m);
        let mut e = vec![0.0; m];
        let mut row = vec![0.0; nvar];
        for r in 0..m {
            e[r] = 1.0;
            op.apply_adjoint(&e, &mut row);
            e[r] = 0.0;
            rows.push(row.clone());
        }
        rows
    } else {
        Vec::new()
    };

    let site_cells: Vec<usize> = model.sites.iter().map(|&(n, i)| n * op.nx + i).collect();
    let mut x = vec![0.0; nvar];
    let mut x_bar = vec![0.0; nvar];
    let mut y = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; nvar];
    // Running sums for averaged iterates over a restarted window (the window
    // doubles each restart, so it always covers about the latest half of the
    // trajectory). Averaging cancels the multiplier oscillation that keeps
    // the pointwise dual off the feasible box; restarting keeps the early
    // transient from polluting the average.
    let mut x_sum = vec![0.0; nvar];
    let mut y_sum = vec![0.0; m];
    let mut window_base = 0usize;
    let mut scratch = vec![0.0; nvar];

    // Feasible primal value of a candidate source, `None` until it clears the
    // constraints enough to be rescaled onto them.
    let primal_of = |xv: &[f64], ax: &mut [f64]| -> Option<f64> {
        op.apply(xv, ax);
        let min_c = ax.iter().copied().fold(f64::INFINITY, f64::min);
        if min_c <= 1e-12 {
            return None;
        }
        Some(weight * xv.iter().map(|v| v.abs()).sum::<f64>() / min_c)
    };
    // Feasible dual value of a candidate multiplier: the dual objective is
    // linear and the feasible set is a cone capped by a box, so the best
    // rescale of a direction lands exactly on the box.
    let dual_of = |yv: &[f64], aty: &mut [f64]| -> f64 {
        op.apply_adjoint(yv, aty);
        let dual_norm = aty.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if dual_norm <= 0.0 {
            return 0.0;
        }
        -(weight / dual_norm) * yv.iter().sum::<f64>()
    };

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut polished: Option<(f64, Vec<f64>)> = None;
    while iterations < problem.max_iters {
        iterations += 1;
        op.apply(&x_bar, &mut ax);
        for ((yr, &a), &s) in y.iter_mut().zip(&ax).zip(&sigma) {
            *yr = (*yr + s * (a - 1.0)).min(0.0);
        }
        op.apply_adjoint(&y, &mut aty);
        for j in 0..nvar {
            let thr = tau[j] * weight;
            let v = x[j] - tau[j] * aty[j];
            let xn = if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            };
            x_bar[j] = 2.0 * xn - x[j];
            x[j] = xn;
        }
        for (s, &v) in x_sum.iter_mut().zip(&x) {
            *s += v;
        }
        for (s, &v) in y_sum.iter_mut().zip(&y) {
            *s += v;
        }

        if iterations % 100 == 0 || iterations == problem.max_iters {
            let inv_n = 1.0 / (iterations - window_base) as f64;
            let point_primal = primal_of(&x, &mut ax);
            for (d, &s) in scratch.iter_mut().zip(&x_sum) {
                *d = s * inv_n;
            }
            let erg_primal = primal_of(&scratch, &mut ax);
            let point_dual = dual_of(&y, &mut aty);
            let y_avg: Vec<f64> = y_sum.iter().map(|&s| s * inv_n).collect();
            let erg_dual = dual_of(&y_avg, &mut aty);
            let mut dual = point_dual.max(erg_dual);
            // Crossover polish: solve the complementary-slackness equations
            // `(A^T y)_j = -weight sign(x_j)` on the primal support for the
            // multiplier, then the vertex system `(A x)_r = 1` on candidate
            // supports (the near-binding cells of `A^T y`, the largest
            // iterate entries, and the sites' own cells, which carry the
            // optimal layer for interior sets). Rescaling keeps every
            // candidate a valid bound, so a wrong guess is only a loose one.
            if !rows_a.is_empty() && iterations % 1_000 == 0 {
                if let Some(yp) = polish_multiplier(&rows_a, &x, weight) {
                    dual = dual.max(dual_of(&yp, &mut aty));
                }
                let supports =
                    [top_cells(&aty, m), top_cells(&x, m), site_cells.clone()];
                for mut support in supports {
                    if let Some(xp) = polish_source(&rows_a, &mut support) {
                        if let Some(p) = primal_of(&xp, &mut ax) {
                            if polished.as_ref().is_none_or(|(best, _)| p < *best) {
                                polished = Some((p, xp));
                            }
                        }
                    }
                }
                // At the identified vertex the slackness system is square, so
                // polishing from the vertex support recovers the exact dual.
                if let Some((_, xp)) = &polished {
                    if let Some(yp) = polish_multiplier(&rows_a, xp, weight) {
                        dual = dual.max(dual_of(&yp, &mut aty));
                    }
                }
            }
            let candidates =
                [point_primal, erg_primal, polished.as_ref().map(|(p, _)| *p)];
            let primal = match candidates.iter().flatten().copied().reduce(f64::min) {
                Some(v) => v,
                None => continue,
            };
            gap = primal - dual;
            if std::env::var_os("RML_CAPACITY_TRACE").is_some() && iterations % 10_000 == 0 {
                eprintln!(
                    "iter {iterations}: primal pt {point_primal:?} erg {erg_primal:?} pol {:?} \
                     dual pt {point_dual:.8} erg {erg_dual:.8} best {dual:.8} rel-gap {:.3e}",
                    polished.as_ref().map(|(p, _)| *p),
                    gap / primal.max(1.0)
                );
            }
            if gap <= problem.tol * primal.max(1.0) {
                converged = true;
                break;
            }
            if iterations < problem.max_iters && iterations - window_base >= window_base.max(2_000)
            {
                x_sum.fill(0.0);
                y_sum.fill(0.0);
                window_base = iterations;
            }
        }
    }

    // Re-evaluate the candidate sources, keep the best, rescale it to exact
    // feasibility, and rebuild its certificate.
    let inv_n = 1.0 / (iterations - window_base).max(1) as f64;
    for (d, &s) in scratch.iter_mut().zip(&x_sum) {
        *d = s * inv_n;
    }
    let mut best = primal_of(&x, &mut ax);
    if let Some(v) = primal_of(&scratch, &mut ax) {
        if best.is_none_or(|b| v < b) {
            best = Some(v);
            x.copy_from_slice(&scratch);
        }
    }
    if let Some((p, xp)) = polished.take() {
        if best.is_none_or(|b| p < b) {
            best = Some(p);
            x = xp;
        }
    }
    if best.is_none() {
        return Err(RmlError::InvalidCapacityProblem(
            "primal iterate never reached the constraint set".into(),
        ));
    }
    op.apply(&x, &mut ax);
    let min_c = ax.iter().copied().fold(f64::INFINITY, f64::min);
    for v in &mut x {
        *v /= min_c;
    }

    let nx = op.nx;
    let nt = op.nt;
    let mut psi_rows = vec![0.0; (nt + 1) * nx];
    let mut psi = vec![0.0; nx];
    for n in (0..nt).rev() {
        for (p, &fv) in psi.iter_mut().zip(&x[n * nx..(n + 1) * nx]) {
            *p += op.dt * fv;
        }
        if !(op.initial && n == 0) {
            op.step.solve_in_place(&mut psi);
        }
        // For interior sets row 0 holds the pre-diffusion trace the
        // constraints read: the first-cell source enters as a layer.
        psi_rows[n * nx..(n + 1) * nx].copy_from_slice(&psi);
    }
    let certificate_psi = SpaceTimeField::from_raw(problem.sg, problem.tg, psi_rows)?;

    // Invert the scheme stencils on the certificate to recover the source.
    let dx2 = problem.sg.dx() * problem.sg.dx();
    let mut residual_f = vec![0.0; nt * nx];
    for n in 0..nt {
        let cur = certificate_psi.row(n);
        let next = certificate_psi.row(n + 1);
        for i in 0..nx {
            if op.initial && n == 0 {
                // The layer never diffuses, so no stencil term.
                residual_f[i] = (cur[i] - next[i]) / op.dt;
                continue;
            }
            let left = if i > 0 { cur[i - 1] } else { 0.0 };
            let right = if i + 1 < nx { cur[i + 1] } else { 0.0 };
            let lap = (left - 2.0 * cur[i] + right) / dx2;
            residual_f[n * nx + i] = (cur[i] - next[i]) / op.dt - lap;
        }
    }
    let value = weight * residual_f.iter().map(|v| v.abs()).sum::<f64>();

    Ok(CapacityResult {
        value,
        certificate_psi,
        residual_f,
        hausdorff: hausdorff_measure(&problem.intervals)?,
        iterations,
        gap,
        converged,
    })
}

/// Solves the complementary-slackness system for the dual multiplier on the
/// support of a near-optimal source: `(A^T y)_j = -weight sign(x_j)` for the
/// carrying cells, in the least-squares sense, clamped to the admissible
/// sign. Returns `None` when the support is empty or the system degenerates.
fn polish_multiplier(rows_a: &[Vec<f64>], x: &[f64], weight: f64) -> Option<Vec<f64>> {
    let m = rows_a.len();
    let xmax = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if xmax <= 0.0 {
        return None;
    }
    let mut support: Vec<usize> =
        (0..x.len()).filter(|&j| x[j].abs() > 1e-8 * xmax).collect();
    if support.is_empty() {
        return None;
    }
    if support.len() > 4 * m {
        support.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
        support.truncate(4 * m);
    }
    let mut g = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for &j in &support {
        let sj = if x[j] >= 0.0 { 1.0 } else { -1.0 };
        for r in 0..m {
            let arj = rows_a[r][j];
            rhs[r] -= weight * sj * arj;
            for q in r..m {
                g[r * m + q] += arj * rows_a[q][j];
            }
        }
    }
    let trace: f64 = (0..m).map(|r| g[r * m + r]).sum();
    for r in 0..m {
        g[r * m + r] += 1e-12 * trace.max(1e-300) / m as f64;
        for q in 0..r {
            g[r * m + q] = g[q * m + r];
        }
    }
    solve_dense(&mut g, &mut rhs, m).then(|| {
        for v in &mut rhs {
            *v = v.min(0.0);
        }
        rhs
    })
}

/// Solves for the exact vertex carried by a candidate support: `m` cells,
/// one per constraint, with `(A x)_r = 1` on every site. The caller rescales
/// the result onto the constraint set, so a wrong guess still yields a valid
/// (just loose) bound.
fn polish_source(rows_a: &[Vec<f64>], support: &mut [usize]) -> Option<Vec<f64>> {
    let m = rows_a.len();
    if support.len() < m {
        return None;
    }
    let cells = &support[..m];
    let mut c = vec![0.0; m * m];
    for r in 0..m {
        for (k, &j) in cells.iter().enumerate() {
            c[r * m + k] = rows_a[r][j];
        }
    }
    let mut z = vec![1.0; m];
    if !solve_dense(&mut c, &mut z, m) {
        return None;
    }
    let nvar = rows_a[0].len();
    let mut xp = vec![0.0; nvar];
    for (k, &j) in cells.iter().enumerate() {
        xp[j] = z[k];
    }
    Some(xp)
}

/// Indices of the `m` largest entries of `|v|`, unordered.
fn top_cells(v: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if idx.len() > m {
        idx.select_nth_unstable_by(m - 1, |&a, &b| v[b].abs().total_cmp(&v[a].abs()));
        idx.truncate(m);
    }
    idx
}

/// In-place Gaussian elimination with partial pivoting; `a` is `n x n`
/// row-major, the solution lands in `b`.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in col + 1..n {
            v -= a[col * n + k] * b[k];
        }
        b[col] = v / a[col * n + col];
    }
    true
}

/// Exact dense LP solve of the same model; only for small grids.
pub fn lp_oracle(problem: &CapacityProblem) -> Result<f64, RmlError> {
    let nvar = problem.tg.nt * problem.sg.nx;
    if nvar > 2000 {
        return Err(RmlError::InvalidCapacityProblem(format!(
            "{nvar} unknowns exceed the dense-oracle cap of 2000"
        )));
    }
    let model = assemble(problem)?;
    let op = ConstraintOp::new(problem, &model)?;
    let weight = problem.sg.dx() * problem.tg.dt();
    // Row r over the rescaled variable h = weight * f, so the objective is
    // the plain L1 norm of h.
    let nx = op.nx;
    let mut rows = Vec::with_capacity(model.sites.len());
    for &(n_r, i_r) in &model.sites {
        let mut w = vec![0.0; nx];
        w[i_r] = model.scale * op.dt / weight;
        let mut row = vec![0.0; nvar];
        for n in n_r..op.nt {
            // Interior sites read the first cell undiffused.
            if !(op.initial && n == 0) {
                op.step.solve_in_place(&mut w);
            }
            row[n * nx..(n + 1) * nx].copy_from_slice(&w);
        }
        rows.push(row);
    }
    let h = l1_min_with_lower_bounds(&rows)?;
    Ok(h.iter().map(|v| v.abs()).sum())
}
