//! Numerical laboratory for the 1-D semilinear heat equation
//! `u_t - u_xx + g(u) = 0` with measure initial or boundary data.
//!
//! Monotone truncations `g_k = min(g, k)` produce a decreasing family of
//! solutions; the crate solves that family on a grid, extracts initial and
//! lateral traces, and reports how much of the prescribed measure survives
//! the relaxation. A variational capacity solver with an exact LP oracle
//! covers the removable-set side of the same story.

pub mod boundary;
pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod measure;
pub mod nonlinearity;
pub mod pde;
pub mod properties;
pub mod relax;
pub mod report;
pub mod simplex;
pub mod sweep;

pub use error::RmlError;
pub use grid::{SpaceGrid, TimeGrid};
pub use measure::GridMeasure;
pub use nonlinearity::NonlinearitySpec;
pub use pde::SpaceTimeField;

/// Builds the global rayon pool honouring `RML_THREADS`; safe to call more
/// than once (later calls are no-ops).
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var("RML_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
