//! Nonnegative measures on the spatial grid: finitely many atoms plus a
//! piecewise-constant density, with the lattice and restriction operations
//! the structure suites exercise.
//!
//! The representation keeps the singular and absolutely continuous parts
//! separate by construction, so sup/inf/decompose are exact on it: atoms are
//! matched by bitwise-equal locations, densities cellwise.

use crate::error::RmlError;
use crate::grid::SpaceGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub loc: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub grid: SpaceGrid,
    /// Sorted by location, locations pairwise distinct.
    pub atoms: Vec<Atom>,
    /// Cell averages, one per grid cell (`grid.ncell()` entries).
    pub density: Vec<f64>,
}

/// Weight applied inside [`GridMeasure::pair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    None,
    /// Distance to the boundary.
    Rho,
}

/// Test function sampled at every grid line, endpoints included
/// (`nx + 2` values; index 0 sits at `x_l`).
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub grid: SpaceGrid,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self, RmlError> {
        if values.len() != grid.nx + 2 {
            return Err(RmlError::InvalidTestFunction(format!(
                "expected {} samples, got {}",
                grid.nx + 2,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RmlError::InvalidTestFunction("non-finite sample".into()));
        }
        Ok(TestFunction { grid, values })
    }

    pub fn from_fn(grid: SpaceGrid, f: impl Fn(f64) -> f64) -> Result<Self, RmlError> {
        let dx = grid.dx();
        let values = (0..grid.nx + 2).map(|i| f(grid.x_l + i as f64 * dx)).collect();
        TestFunction::new(grid, values)
    }

    /// Hat of half-width `h` at `c`, support inside the closed domain; the
    /// endpoint samples are forced to exact zero so rounding noise cannot
    /// fail the vanishing check.
    pub fn bump(grid: SpaceGrid, c: f64, h: f64) -> Result<Self, RmlError> {
        if !(h > 0.0) || !c.is_finite() {
            return Err(RmlError::InvalidTestFunction(format!("bad bump ({c}, {h})")));
        }
        if c - h < grid.x_l - 1e-12 * h || c + h > grid.x_r + 1e-12 * h {
            return Err(RmlError::InvalidTestFunction(format!(
                "bump at {c} with half-width {h} leaves ({}, {})",
                grid.x_l, grid.x_r
            )));
        }
        let mut tf = TestFunction::from_fn(grid, |x| (1.0 - (x - c).abs() / h).max(0.0))?;
        tf.values[0] = 0.0;
        let last = tf.values.len() - 1;
        tf.values[last] = 0.0;
        Ok(tf)
    }

    /// Value at interior node `i` (`i = 0..nx`).
    pub fn node(&self, i: usize) -> f64 {
        self.values[i + 1]
    }

    pub fn vanishes_at_endpoints(&self) -> bool {
        self.values[0] == 0.0 && self.values[self.grid.nx + 1] == 0.0
    }

    /// Linear interpolation between grid lines; clamped outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let s = (x - self.grid.x_l) / dx;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = (self.values.len() - 1) as f64;
        if s >= last {
            return self.values[self.values.len() - 1];
        }
        let j = s.floor() as usize;
        let frac = s - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    /// Average of the two grid-line samples bounding cell `j`.
    pub fn cell_mid(&self, j: usize) -> f64 {
        0.5 * (self.values[j] + self.values[j + 1])
    }

    /// Interior node sum times dx: what a unit density reads through the
    /// nodewise pairing, so estimates normalized by it are sampling-exact.
    pub fn node_mass(&self) -> f64 {
        self.values[1..=self.grid.nx].iter().sum::<f64>() * self.grid.dx()
    }
}

impl GridMeasure {
    pub fn new(grid: SpaceGrid, mut atoms: Vec<Atom>, density: Vec<f64>) -> Result<Self, RmlError> {
        if density.len() != grid.ncell() {
            return Err(RmlError::InvalidMeasure(format!(
                "density has {} cells, grid has {}",
                density.len(),
                grid.ncell()
            )));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(RmlError::InvalidMeasure("density entries must be finite and >= 0".into()));
        }
        for a in &atoms {
            if !a.loc.is_finite() || !a.mass.is_finite() || a.mass < 0.0 {
                return Err(RmlError::InvalidMeasure(format!(
                    "atom ({}, {}) must be finite with nonnegative mass",
                    a.loc, a.mass
                )));
            }
            if a.loc <= grid.x_l || a.loc >= grid.x_r {
                return Err(RmlError::InvalidMeasure(format!(
                    "atom location {} not strictly inside ({}, {})",
                    a.loc, grid.x_l, grid.x_r
                )));
            }
        }
        atoms.sort_by(|a, b| a.loc.total_cmp(&b.loc));
        // coincident atoms merge by summing masses; coincidence is exact equality
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.loc == a.loc => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        Ok(GridMeasure { grid, atoms: merged, density })
    }

    pub fn zero(grid: SpaceGrid) -> Self {
        GridMeasure { grid, atoms: Vec::new(), density: vec![0.0; grid.ncell()] }
    }

    pub fn from_atoms(grid: SpaceGrid, atoms: Vec<Atom>) -> Result<Self, RmlError> {
        let density = vec![0.0; grid.ncell()];
        GridMeasure::new(grid, atoms, density)
    }

    pub fn from_density(grid: SpaceGrid, density: Vec<f64>) -> Result<Self, RmlError> {
        GridMeasure::new(grid, Vec::new(), density)
    }

    pub fn uniform(grid: SpaceGrid, c: f64) -> Result<Self, RmlError> {
        GridMeasure::from_density(grid, vec![c; grid.ncell()])
    }

    pub fn total_mass(&self) -> f64 {
        let dx = self.grid.dx();
        let atom_mass: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let density_mass: f64 = self.density.iter().map(|d| d * dx).sum();
        atom_mass + density_mass
    }

    fn weight_at(&self, x: f64, w: Weight) -> f64 {
        match w {
            Weight::None => 1.0,
            Weight::Rho => self.grid.rho(x),
        }
    }

    /// `∫ phi dμ` (optionally against the boundary-distance weight); atoms
    /// evaluate `phi` by linear interpolation, density cells by the midpoint
    /// rule.
    pub fn pair(&self, phi: &TestFunction, w: Weight) -> Result<f64, RmlError> {
        if phi.grid != self.grid {
            return Err(RmlError::GridMismatch("pair: test function on a different grid".into()));
        }
        let dx = self.grid.dx();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.mass * phi.eval(a.loc) * self.weight_at(a.loc, w);
        }
        for (j, d) in self.density.iter().enumerate() {
            let c = self.grid.cell_center(j);
            acc += d * phi.cell_mid(j) * self.weight_at(c, w) * dx;
        }
        Ok(acc)
    }

    /// Singular part (atoms) and absolutely continuous part (density),
    /// reassembling bit-for-bit.
    pub fn lebesgue_decompose(&self) -> (GridMeasure, GridMeasure) {
        let singular = GridMeasure {
            grid: self.grid,
            atoms: self.atoms.clone(),
            density: vec![0.0; self.grid.ncell()],
        };
        let ac = GridMeasure { grid: self.grid, atoms: Vec::new(), density: self.density.clone() };
        (singular, ac)
    }

    pub fn scale(&self, c: f64) -> Result<GridMeasure, RmlError> {
        if !c.is_finite() || c < 0.0 {
            return Err(RmlError::InvalidMeasure(format!("scale factor {c} must be >= 0")));
        }
        Ok(GridMeasure {
            grid: self.grid,
            atoms: self.atoms.iter().map(|a| Atom { loc: a.loc, mass: c * a.mass }).collect(),
            density: self.density.iter().map(|d| c * d).collect(),
        })
    }
}

fn check_same_grid(a: &GridMeasure, b: &GridMeasure, op: &str) -> Result<(), RmlError> {
    if a.grid != b.grid {
        return Err(RmlError::GridMismatch(format!("{op}: measures live on different grids")));
    }
    Ok(())
}

/// Lattice join: atom-wise max (one-sided atoms kept), cellwise density max.
pub fn measure_sup(a: &GridMeasure, b: &GridMeasure) -> Result<GridMeasure, RmlError> {
    check_same_grid(a, b, "measure_sup")?;
    let atoms = merge_atoms(&a.atoms, &b.atoms, |ma, mb| match (ma, mb) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (Some(x), None) => Some(x),
        (None, Some(y)) => Some(y),
        (None, None) => None,
    });
    let density = a.density.iter().zip(&b.density).map(|(x, y)| x.max(*y)).collect();
    Ok(GridMeasure { grid: a.grid, atoms, density })
}

/// Lattice meet: shared atoms at min mass, one-sided atoms drop (an atom and
/// a density are mutually singular), cellwise density min.
pub fn measure_inf(a: &GridMeasure, b: &GridMeasure) -> Result<GridMeasure, RmlError> {
    check_same_grid(a, b, "measure_inf")?;
    let atoms = merge_atoms(&a.atoms, &b.atoms, |ma, mb| match (ma, mb) {
        (Some(x), Some(y)) => Some(x.min(y)),
        _ => None,
    });
    let density = a.density.iter().zip(&b.density).map(|(x, y)| x.min(*y)).collect();
    Ok(GridMeasure { grid: a.grid, atoms, density })
}

pub fn measure_add(a: &GridMeasure, b: &GridMeasure) -> Result<GridMeasure, RmlError> {
    check_same_grid(a, b, "measure_add")?;
    let atoms = merge_atoms(&a.atoms, &b.atoms, |ma, mb| match (ma, mb) {
        (Some(x), Some(y)) => Some(x + y),
        (Some(x), None) => Some(x),
        (None, Some(y)) => Some(y),
        (None, None) => None,
    });
    let density = a.density.iter().zip(&b.density).map(|(x, y)| x + y).collect();
    Ok(GridMeasure { grid: a.grid, atoms, density })
}

/// Representation order: every atom of `a` is matched in `b` at >= mass and
/// the density dominates cellwise.
pub fn measure_leq(a: &GridMeasure, b: &GridMeasure) -> Result<bool, RmlError> {
    check_same_grid(a, b, "measure_leq")?;
    if a.density.iter().zip(&b.density).any(|(x, y)| x > y) {
        return Ok(false);
    }
    let mut ib = 0;
    for atom in &a.atoms {
        if atom.mass == 0.0 {
            continue;
        }
        while ib < b.atoms.len() && b.atoms[ib].loc < atom.loc {
            ib += 1;
        }
        if ib >= b.atoms.len() || b.atoms[ib].loc != atom.loc || b.atoms[ib].mass < atom.mass {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Restriction to a finite union of closed intervals; straddling cells scale
/// by the overlap fraction.
pub fn measure_restrict(
    m: &GridMeasure,
    intervals: &[(f64, f64)],
) -> Result<GridMeasure, RmlError> {
    for (lo, hi) in intervals {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(RmlError::InvalidMeasure(format!("restrict: bad interval [{lo}, {hi}]")));
        }
    }
    let dx = m.grid.dx();
    let atoms = m
        .atoms
        .iter()
        .filter(|a| intervals.iter().any(|(lo, hi)| *lo <= a.loc && a.loc <= *hi))
        .copied()
        .collect();
    let mut density = Vec::with_capacity(m.density.len());
    for (j, d) in m.density.iter().enumerate() {
        let c_lo = m.grid.x_l + j as f64 * dx;
        let c_hi = c_lo + dx;
        let mut overlap = 0.0;
        for (lo, hi) in intervals {
            overlap += (c_hi.min(*hi) - c_lo.max(*lo)).max(0.0);
        }
        density.push(d * (overlap / dx).min(1.0));
    }
    Ok(GridMeasure { grid: m.grid, atoms, density })
}

/// Complement of a union of intervals inside `[x_l, x_r]`, as closed
/// intervals (zero-length pieces dropped).
pub fn interval_complement(grid: &SpaceGrid, intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> =
        intervals.iter().map(|&(a, b)| (a.max(grid.x_l), b.min(grid.x_r))).filter(|(a, b)| a < b).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cursor = grid.x_l;
    for (a, b) in sorted {
        if a > cursor {
            out.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < grid.x_r {
        out.push((cursor, grid.x_r));
    }
    out
}

/// Componentwise total-variation distance: atom masses matched by location,
/// density cellwise.
pub fn tv_distance(a: &GridMeasure, b: &GridMeasure) -> Result<f64, RmlError> {
    check_same_grid(a, b, "tv_distance")?;
    let diff = merge_atoms(&a.atoms, &b.atoms, |ma, mb| {
        Some((ma.unwrap_or(0.0) - mb.unwrap_or(0.0)).abs())
    });
    let dx = a.grid.dx();
    let atom_part: f64 = diff.iter().map(|a| a.mass).sum();
    let density_part: f64 =
        a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs() * dx).sum();
    Ok(atom_part + density_part)
}

pub(crate) fn merge_atoms(
    a: &[Atom],
    b: &[Atom],
    combine: impl Fn(Option<f64>, Option<f64>) -> Option<f64>,
) -> Vec<Atom> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() || ib < b.len() {
        let (loc, ma, mb) = if ia < a.len() && (ib >= b.len() || a[ia].loc < b[ib].loc) {
            let r = (a[ia].loc, Some(a[ia].mass), None);
            ia += 1;
            r
        } else if ib < b.len() && (ia >= a.len() || b[ib].loc < a[ia].loc) {
            let r = (b[ib].loc, None, Some(b[ib].mass));
            ib += 1;
            r
        } else {
            let r = (a[ia].loc, Some(a[ia].mass), Some(b[ib].mass));
            ia += 1;
            ib += 1;
            r
        };
        if let Some(mass) = combine(ma, mb) {
            out.push(Atom { loc, mass });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpaceGrid {
        SpaceGrid::new(-1.0, 1.0, 399).unwrap()
    }

    #[test]
    fn total_mass_of_uniform_density_covers_full_length() {
        let m = GridMeasure::uniform(grid(), 0.5).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12, "got {}", m.total_mass());
    }

    #[test]
    fn total_mass_of_single_atom() {
        let m = GridMeasure::from_atoms(grid(), vec![Atom { loc: 0.0, mass: 1.0 }]).unwrap();
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn total_mass_of_empty_measure() {
        assert_eq!(GridMeasure::zero(grid()).total_mass(), 0.0);
    }

    #[test]
    fn coincident_atoms_merge() {
        let m = GridMeasure::from_atoms(
            grid(),
            vec![Atom { loc: 0.25, mass: 1.0 }, Atom { loc: 0.25, mass: 0.5 }],
        )
        .unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].mass, 1.5);
    }

    #[test]
    fn rejects_atom_on_boundary_and_negative_mass() {
        assert!(GridMeasure::from_atoms(grid(), vec![Atom { loc: -1.0, mass: 1.0 }]).is_err());
        assert!(GridMeasure::from_atoms(grid(), vec![Atom { loc: 1.5, mass: 1.0 }]).is_err());
        assert!(GridMeasure::from_atoms(grid(), vec![Atom { loc: 0.0, mass: -0.1 }]).is_err());
        assert!(GridMeasure::from_density(grid(), vec![-1.0; 400]).is_err());
    }

    #[test]
    fn pair_examples() {
        let g = grid();
        let one = TestFunction::from_fn(g, |_| 1.0).unwrap();
        let m = GridMeasure::from_atoms(g, vec![Atom { loc: 0.0, mass: 1.0 }]).unwrap();
        assert!((m.pair(&one, Weight::None).unwrap() - 1.0).abs() < 1e-12);

        let x = TestFunction::from_fn(g, |x| x).unwrap();
        let d = GridMeasure::uniform(g, 1.0).unwrap();
        assert!(d.pair(&x, Weight::None).unwrap().abs() < 1e-12, "odd symmetry should cancel");

        let a = GridMeasure::from_atoms(g, vec![Atom { loc: 0.5, mass: 2.0 }]).unwrap();
        // rho(0.5) = min(1.5, 0.5) = 0.5
        assert!((a.pair(&one, Weight::Rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_rejects_mismatched_grid() {
        let other = SpaceGrid::new(-1.0, 1.0, 99).unwrap();
        let phi = TestFunction::from_fn(other, |_| 1.0).unwrap();
        let m = GridMeasure::zero(grid());
        assert!(m.pair(&phi, Weight::None).is_err());
    }

    #[test]
    fn sup_inf_follow_lattice_rules() {
        let g = grid();
        let a = GridMeasure::new(
            g,
            vec![Atom { loc: 0.0, mass: 1.0 }, Atom { loc: 0.5, mass: 2.0 }],
            vec![0.3; g.ncell()],
        )
        .unwrap();
        let b = GridMeasure::new(g, vec![Atom { loc: 0.0, mass: 0.4 }], vec![0.7; g.ncell()]).unwrap();

        let s = measure_sup(&a, &b).unwrap();
        assert_eq!(s.atoms, vec![Atom { loc: 0.0, mass: 1.0 }, Atom { loc: 0.5, mass: 2.0 }]);
        assert!(s.density.iter().all(|&d| d == 0.7));

        let i = measure_inf(&a, &b).unwrap();
        assert_eq!(i.atoms, vec![Atom { loc: 0.0, mass: 0.4 }]);
        assert!(i.density.iter().all(|&d| d == 0.3));

        // sup + inf = a + b, exactly on the representation
        let lhs = measure_add(&s, &i).unwrap();
        let rhs = measure_add(&a, &b).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn inf_of_atom_and_density_is_zero() {
        let g = grid();
        let a = GridMeasure::from_atoms(g, vec![Atom { loc: 0.0, mass: 1.0 }]).unwrap();
        let b = GridMeasure::uniform(g, 0.5).unwrap();
        let i = measure_inf(&a, &b).unwrap();
        assert_eq!(i.total_mass(), 0.0);
    }

    #[test]
    fn leq_is_the_componentwise_order() {
        let g = grid();
        let small = GridMeasure::new(g, vec![Atom { loc: 0.0, mass: 0.5 }], vec![0.1; g.ncell()]).unwrap();
        let big = GridMeasure::new(g, vec![Atom { loc: 0.0, mass: 1.0 }], vec![0.2; g.ncell()]).unwrap();
        assert!(measure_leq(&small, &big).unwrap());
        assert!(!measure_leq(&big, &small).unwrap());
        // atom at an uncharged location breaks the order
        let off = GridMeasure::from_atoms(g, vec![Atom { loc: 0.25, mass: 0.1 }]).unwrap();
        assert!(!measure_leq(&off, &big).unwrap());
    }

    #[test]
    fn restrict_splits_straddling_cells() {
        let g = grid();
        let m = GridMeasure::uniform(g, 1.0).unwrap();
        let half = measure_restrict(&m, &[(-0.5, 0.5)]).unwrap();
        assert!((half.total_mass() - 1.0).abs() < 1e-12);
        let comp = measure_restrict(&m, &interval_complement(&g, &[(-0.5, 0.5)])).unwrap();
        let back = measure_add(&half, &comp).unwrap();
        assert!((back.total_mass() - m.total_mass()).abs() < 1e-12 * m.total_mass());
    }

    #[test]
    fn decompose_reassembles_bit_for_bit() {
        let g = grid();
        let m = GridMeasure::new(
            g,
            vec![Atom { loc: -0.3, mass: 0.7 }],
            (0..g.ncell()).map(|j| (j as f64 * 0.001).sin().abs()).collect(),
        )
        .unwrap();
        let (sing, ac) = m.lebesgue_decompose();
        assert!(ac.atoms.is_empty());
        assert!(sing.density.iter().all(|&d| d == 0.0));
        assert_eq!(measure_add(&sing, &ac).unwrap(), m);
    }
}
