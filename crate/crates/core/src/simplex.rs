//! Small dense linear solvers: Gaussian elimination for tiny bump systems
//! and a two-phase simplex used as the exact oracle for the capacity solver.

use crate::error::RmlError;

/// Gaussian elimination with partial pivoting; `None` on a singular system.
/// Intended for tiny systems (bump overlap clusters).
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

/// Minimizes sum |f| subject to rows . f >= 1 componentwise (f free) via the
/// split f = p - q and a dense two-phase simplex. Always feasible when some
/// row has a nonzero entry; returns the minimizer.
pub(crate) fn l1_min_with_lower_bounds(rows: &[Vec<f64>]) -> Result<Vec<f64>, RmlError> {
    let m = rows.len();
    if m == 0 {
        return Err(RmlError::LpFailure("no constraint rows".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(RmlError::LpFailure("ragged constraint rows".into()));
    }
    // columns: p (n), q (n), surplus (m), artificial (m)
    let ncols = 2 * n + 2 * m;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![0.0; ncols + 1];
        for (j, &v) in r.iter().enumerate() {
            row[j] = v;
            row[n + j] = -v;
        }
        row[2 * n + i] = -1.0;
        row[2 * n + m + i] = 1.0;
        row[ncols] = 1.0;
        t.push(row);
    }
    let mut basis: Vec<usize> = (0..m).map(|i| 2 * n + m + i).collect();

    let phase1_cost = |j: usize| if j >= 2 * n + m { 1.0 } else { 0.0 };
    simplex_phase(&mut t, &mut basis, ncols, &phase1_cost, ncols)?;
    let infeasibility: f64 = basis.iter().zip(&t).map(|(&b, row)| phase1_cost(b) * row[ncols]).sum();
    if infeasibility > 1e-7 {
        return Err(RmlError::LpFailure(format!("phase 1 stalled at infeasibility {infeasibility}")));
    }
    // drive any degenerate artificial out of the basis; a row with no other
    // entry is a redundant constraint and is dropped
    let mut keep = vec![true; t.len()];
    for i in 0..t.len() {
        if basis[i] >= 2 * n + m {
            if let Some(j) = (0..2 * n + m).find(|&j| t[i][j].abs() > PIVOT_TOL) {
                pivot(&mut t, &mut basis, i, j);
            } else {
                keep[i] = false;
            }
        }
    }
    let mut kept = Vec::with_capacity(t.len());
    let mut kept_basis = Vec::with_capacity(t.len());
    for (i, row) in t.into_iter().enumerate() {
        if keep[i] {
            kept.push(row);
            kept_basis.push(basis[i]);
        }
    }
    let (mut t, mut basis) = (kept, kept_basis);

    let phase2_cost = |j: usize| if j < 2 * n { 1.0 } else { 0.0 };
    simplex_phase(&mut t, &mut basis, ncols, &phase2_cost, 2 * n + m)?;

    let mut f = vec![0.0; n];
    for (&b, row) in basis.iter().zip(&t) {
        if b < n {
            f[b] += row[ncols];
        } else if b < 2 * n {
            f[b - n] -= row[ncols];
        }
    }
    Ok(f)
}

/// Runs one simplex phase to optimality over the first `col_limit` columns.
/// Dantzig pricing with a Bland fallback once the objective stalls.
fn simplex_phase(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    ncols: usize,
    cost: &dyn Fn(usize) -> f64,
    col_limit: usize,
) -> Result<(), RmlError> {
    let m = t.len();
    let objective = |t: &[Vec<f64>], basis: &[usize]| -> f64 {
        basis.iter().zip(t).map(|(&b, row)| cost(b) * row[ncols]).sum()
    };
    let mut stalled = 0usize;
    let mut last = objective(t, basis);
    for _ in 0..MAX_PIVOTS {
        // reduced costs from scratch per pivot keeps the tableau small and
        // avoids a separate z-row drifting out of sync
        let mut entering: Option<usize> = None;
        let mut best = -PIVOT_TOL;
        for j in 0..col_limit {
            if basis.contains(&j) {
                continue;
            }
            let mut red = cost(j);
            for (i, row) in t.iter().enumerate() {
                let cb = cost(basis[i]);
                if cb != 0.0 {
                    red -= cb * row[j];
                }
            }
            if stalled > 50 {
                // Bland: first improving column
                if red < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            } else if red < best {
                best = red;
                entering = Some(j);
            }
        }
        let Some(j) = entering else { return Ok(()) };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][j] > PIVOT_TOL {
                let ratio = t[i][ncols] / t[i][j];
                if ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12 && leave.is_some_and(|l| basis[i] < basis[l]))
                {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(i) = leave else {
            return Err(RmlError::LpFailure("unbounded pivot column".into()));
        };
        pivot(t, basis, i, j);
        let now = objective(t, basis);
        if now < last - 1e-12 * last.abs().max(1.0) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        last = now;
    }
    Err(RmlError::LpFailure(format!("no optimum within {MAX_PIVOTS} pivots")))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], i: usize, j: usize) {
    let ncols = t[i].len();
    let p = t[i][j];
    for v in t[i].iter_mut() {
        *v /= p;
    }
    for r in 0..t.len() {
        if r != i && t[r][j] != 0.0 {
            let f = t[r][j];
            for k in 0..ncols {
                t[r][k] -= f * t[i][k];
            }
        }
    }
    basis[i] = j;
}
