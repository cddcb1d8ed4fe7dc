//! Uniform space and time grids.
//!
//! The spatial grid keeps `nx` interior nodes on `(x_l, x_r)` with spacing
//! `dx = (x_r - x_l)/(nx + 1)`; the two endpoints carry Dirichlet data and
//! are never stored in field rows. Cell `j` (of `nx + 1`) spans
//! `[x_l + j dx, x_l + (j+1) dx]`, so the cells tile the whole interval and
//! piecewise-constant densities integrate over the full length.

use crate::error::RmlError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub x_l: f64,
    pub x_r: f64,
    pub nx: usize,
}

impl SpaceGrid {
    pub fn new(x_l: f64, x_r: f64, nx: usize) -> Result<Self, RmlError> {
        if !(x_l.is_finite() && x_r.is_finite()) || x_l >= x_r {
            return Err(RmlError::InvalidGrid(format!(
                "domain ({x_l}, {x_r}) is not a bounded interval"
            )));
        }
        if nx < 3 {
            return Err(RmlError::InvalidGrid(format!("nx = {nx} < 3 interior nodes")));
        }
        Ok(SpaceGrid { x_l, x_r, nx })
    }

    pub fn dx(&self) -> f64 {
        (self.x_r - self.x_l) / (self.nx + 1) as f64
    }

    /// Coordinate of interior node `i`, `i = 0..nx`.
    pub fn node(&self, i: usize) -> f64 {
        self.x_l + (i as f64 + 1.0) * self.dx()
    }

    pub fn len(&self) -> f64 {
        self.x_r - self.x_l
    }

    /// Number of density cells (they tile the full interval).
    pub fn ncell(&self) -> usize {
        self.nx + 1
    }

    /// Midpoint of density cell `j`, `j = 0..=nx`.
    pub fn cell_center(&self, j: usize) -> f64 {
        self.x_l + (j as f64 + 0.5) * self.dx()
    }

    /// Distance to the boundary, the weight for weighted pairings.
    pub fn rho(&self, x: f64) -> f64 {
        (x - self.x_l).min(self.x_r - x).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub nt: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, nt: usize) -> Result<Self, RmlError> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(RmlError::InvalidGrid(format!("horizon T = {t_final} must be positive")));
        }
        if nt < 2 {
            return Err(RmlError::InvalidGrid(format!("nt = {nt} < 2 steps")));
        }
        Ok(TimeGrid { t_final, nt })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_cell_layout() {
        let g = SpaceGrid::new(-1.0, 1.0, 399).unwrap();
        assert_eq!(g.dx(), 2.0 / 400.0);
        assert_eq!(g.ncell(), 400);
        assert!((g.node(0) - (-1.0 + 0.005)).abs() < 1e-15);
        assert!((g.node(398) - (1.0 - 0.005)).abs() < 1e-12);
        // cells tile the interval exactly
        assert!((g.ncell() as f64 * g.dx() - g.len()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SpaceGrid::new(1.0, -1.0, 10).is_err());
        assert!(SpaceGrid::new(-1.0, 1.0, 2).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(0.25, 1).is_err());
    }

    #[test]
    fn rho_vanishes_at_boundary() {
        let g = SpaceGrid::new(0.0, 2.0, 19).unwrap();
        assert_eq!(g.rho(0.0), 0.0);
        assert_eq!(g.rho(2.0), 0.0);
        assert_eq!(g.rho(0.5), 0.5);
        assert!((g.rho(1.7) - 0.3).abs() < 1e-15);
    }
}
