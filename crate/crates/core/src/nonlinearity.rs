//! Absorption terms: nondecreasing, continuous, identically zero on
//! (-inf, 0], evaluated through a truncation level k (possibly infinite).
//!
//! Evaluation is built from floating-point-monotone pieces only (integer
//! powers by repeated multiplication, clamped table interpolation), so the
//! comparison properties of the solver hold as exact inequalities, not up to
//! tolerance.

use crate::error::RmlError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GKind {
    Zero,
    /// c * r^p for r > 0.
    Power { p: f64, c: f64 },
    /// e^{a r} - 1 for r > 0.
    Exponential { a: f64 },
    /// Piecewise-linear through (r_j, g_j), anchored at (0, 0), constant
    /// beyond the last sample.
    Table { rs: Vec<f64>, gs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: GKind,
    /// Truncation level k; `f64::INFINITY` means untruncated.
    pub truncation_level: f64,
}

impl NonlinearitySpec {
    pub fn new(kind: GKind, truncation_level: f64) -> Result<Self, RmlError> {
        if truncation_level.is_nan() || truncation_level <= 0.0 {
            return Err(RmlError::InvalidNonlinearity(format!(
                "truncation level {truncation_level} must be positive (or infinite)"
            )));
        }
        match &kind {
            GKind::Zero => {}
            GKind::Power { p, c } => {
                if !p.is_finite() || *p <= 1.0 {
                    return Err(RmlError::InvalidNonlinearity(format!("power exponent {p} must exceed 1")));
                }
                if !c.is_finite() || *c <= 0.0 {
                    return Err(RmlError::InvalidNonlinearity(format!("power coefficient {c} must be positive")));
                }
            }
            GKind::Exponential { a } => {
                if !a.is_finite() || *a <= 0.0 {
                    return Err(RmlError::InvalidNonlinearity(format!("exponential rate {a} must be positive")));
                }
            }
            GKind::Table { rs, gs } => {
                if rs.is_empty() || rs.len() != gs.len() {
                    return Err(RmlError::InvalidNonlinearity("table needs matching nonempty sample lists".into()));
                }
                if rs.iter().any(|r| !r.is_finite() || *r < 0.0) || rs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(RmlError::InvalidNonlinearity("table abscissae must be nonnegative and strictly increasing".into()));
                }
                if gs.iter().any(|g| !g.is_finite() || *g < 0.0) || gs.windows(2).any(|w| w[0] > w[1]) {
                    return Err(RmlError::InvalidNonlinearity("table values must be nonnegative and nondecreasing".into()));
                }
            }
        }
        Ok(NonlinearitySpec { kind, truncation_level })
    }

    pub fn zero() -> Self {
        NonlinearitySpec { kind: GKind::Zero, truncation_level: f64::INFINITY }
    }

    pub fn power(p: f64, c: f64) -> Result<Self, RmlError> {
        NonlinearitySpec::new(GKind::Power { p, c }, f64::INFINITY)
    }

    pub fn exponential(a: f64) -> Result<Self, RmlError> {
        NonlinearitySpec::new(GKind::Exponential { a }, f64::INFINITY)
    }

    /// Same absorption term at truncation level `k`.
    pub fn with_level(&self, k: f64) -> Result<Self, RmlError> {
        NonlinearitySpec::new(self.kind.clone(), k)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, GKind::Zero)
    }

    fn raw_eval(&self, r: f64) -> f64 {
        match &self.kind {
            GKind::Zero => 0.0,
            GKind::Power { p, c } => {
                // integer exponents go through repeated multiplication, which
                // rounds monotonically; powf is the general fallback
                if p.fract() == 0.0 && *p <= 32.0 {
                    c * int_pow(r, *p as u32)
                } else {
                    c * r.powf(*p)
                }
            }
            GKind::Exponential { a } => (a * r).exp_m1(),
            GKind::Table { rs, gs } => {
                let j = rs.partition_point(|rj| *rj < r);
                if j == rs.len() {
                    return gs[rs.len() - 1];
                }
                // segment from (r_lo, g_lo) to (rs[j], gs[j]); the clamp keeps
                // evaluation monotone across knots despite rounding
                let (r_lo, g_lo) = if j == 0 { (0.0, 0.0) } else { (rs[j - 1], gs[j - 1]) };
                let t = (r - r_lo) / (rs[j] - r_lo);
                (g_lo + t * (gs[j] - g_lo)).clamp(g_lo, gs[j])
            }
        }
    }

    /// min(g(r), k); exactly 0 for r <= 0.
    pub fn g_eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.raw_eval(r).min(self.truncation_level)
    }

    /// Smallest argument where the truncation clips, i.e. g(r) reaches the
    /// level; infinite when it never does (untruncated, zero, or a bounded
    /// table below the level).
    pub fn clip_onset(&self) -> f64 {
        let k = self.truncation_level;
        if !k.is_finite() {
            return f64::INFINITY;
        }
        match &self.kind {
            GKind::Zero => f64::INFINITY,
            GKind::Power { p, c } => (k / c).powf(1.0 / p),
            GKind::Exponential { a } => (k + 1.0).ln() / a,
            GKind::Table { rs, gs } => {
                let j = gs.partition_point(|g| *g < k);
                if j == gs.len() {
                    return f64::INFINITY;
                }
                let (r_lo, g_lo) = if j == 0 { (0.0, 0.0) } else { (rs[j - 1], gs[j - 1]) };
                if gs[j] <= g_lo {
                    return rs[j];
                }
                r_lo + (k - g_lo) / (gs[j] - g_lo) * (rs[j] - r_lo)
            }
        }
    }
}

fn int_pow(r: f64, mut n: u32) -> f64 {
    let mut base = r;
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

/// Unique v with v + dt*g_k(v) = w (the map is strictly increasing); w itself
/// for w <= 0.
///
/// Returns the largest float v in [0, w] whose rounded update
/// fl(v + fl(dt*g_k(v))) stays <= w. That set only grows when w grows or the
/// truncation level shrinks, so the solve is bitwise monotone in w and in k;
/// the solver's comparison suites rely on that, which is why there is no
/// early exit and no derivative step here.
pub fn implicit_reaction_solve(spec: &NonlinearitySpec, dt: f64, w: f64) -> Result<f64, RmlError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(RmlError::InvalidNonlinearity(format!("reaction substep dt {dt} must be positive")));
    }
    if !w.is_finite() {
        return Err(RmlError::InvalidNonlinearity(format!("reaction substep input {w} must be finite")));
    }
    if w <= 0.0 {
        return Ok(w);
    }
    let fmap = |v: f64| v + dt * spec.g_eval(v);
    if fmap(w) <= w {
        return Ok(w);
    }
    let (mut lo, mut hi) = (0.0f64, w);
    // nonnegative bracket keeps the midpoint inside [lo, hi]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if fmap(mid) <= w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = w - fmap(lo);
    if residual > 1e-12 * w.abs().max(1.0) {
        return Err(RmlError::ReactionNonConvergence { residual, iters: 200 });
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        let g = NonlinearitySpec::power(2.0, 1.0).unwrap();
        assert_eq!(g.g_eval(3.0), 9.0);

        let g = NonlinearitySpec::power(4.0, 1.0).unwrap().with_level(10.0).unwrap();
        assert_eq!(g.g_eval(3.0), 10.0);

        let g = NonlinearitySpec::exponential(1.0).unwrap();
        assert_eq!(g.g_eval(0.0), 0.0);
        assert_eq!(g.g_eval(-5.0), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NonlinearitySpec::power(1.0, 1.0).is_err());
        assert!(NonlinearitySpec::power(2.0, 0.0).is_err());
        assert!(NonlinearitySpec::exponential(-1.0).is_err());
        assert!(NonlinearitySpec::new(GKind::Table { rs: vec![1.0, 0.5], gs: vec![0.0, 1.0] }, 1.0).is_err());
        assert!(NonlinearitySpec::new(GKind::Table { rs: vec![0.5, 1.0], gs: vec![1.0, 0.0] }, 1.0).is_err());
        assert!(NonlinearitySpec::power(2.0, 1.0).unwrap().with_level(0.0).is_err());
    }

    #[test]
    fn table_interpolates_from_zero_anchor() {
        let g = NonlinearitySpec::new(
            GKind::Table { rs: vec![1.0, 2.0], gs: vec![2.0, 6.0] },
            f64::INFINITY,
        )
        .unwrap();
        assert_eq!(g.g_eval(0.5), 1.0);
        assert_eq!(g.g_eval(1.5), 4.0);
        assert_eq!(g.g_eval(10.0), 6.0);
    }

    #[test]
    fn truncations_increase_to_g() {
        let g = NonlinearitySpec::power(3.0, 2.0).unwrap();
        let ks = [0.5, 1.0, 4.0, 64.0, 1e6];
        for r in [0.1, 0.7, 1.3, 2.9, 8.4] {
            let mut prev = 0.0;
            for k in ks {
                let v = g.with_level(k).unwrap().g_eval(r);
                assert!(v >= prev && v <= k);
                prev = v;
            }
            assert!(prev <= g.g_eval(r));
            assert_eq!(g.with_level(1e300).unwrap().g_eval(r), g.g_eval(r));
        }
    }

    #[test]
    fn reaction_solve_matches_quadratic_root() {
        // v + 0.1 v^2 = 1  =>  v = (-1 + sqrt(1.4)) / 0.2
        let g = NonlinearitySpec::power(2.0, 1.0).unwrap();
        let v = implicit_reaction_solve(&g, 0.1, 1.0).unwrap();
        let oracle = (-1.0 + 1.4f64.sqrt()) / 0.2;
        assert!((v - oracle).abs() < 1e-12, "v = {v}, oracle = {oracle}");
    }

    #[test]
    fn reaction_solve_with_active_truncation() {
        // with k = 0.5 the update is v + 0.05 = 1, and 0.95^2 > 0.5 confirms
        // the truncated branch is the consistent one
        let g = NonlinearitySpec::power(2.0, 1.0).unwrap().with_level(0.5).unwrap();
        let v = implicit_reaction_solve(&g, 0.1, 1.0).unwrap();
        assert!((v - 0.95).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn zero_kind_is_the_identity() {
        let g = NonlinearitySpec::zero();
        let w = 0.7;
        assert_eq!(implicit_reaction_solve(&g, 0.3, w).unwrap(), w);
        assert_eq!(implicit_reaction_solve(&g, 0.3, -2.5).unwrap(), -2.5);
    }

    fn catalogue() -> impl Strategy<Value = NonlinearitySpec> {
        let kind = prop_oneof![
            Just(NonlinearitySpec::zero().kind),
            (2u32..5, 0.5f64..4.0).prop_map(|(p, c)| GKind::Power { p: p as f64, c }),
            (0.5f64..2.0).prop_map(|a| GKind::Exponential { a }),
        ];
        let level = prop_oneof![Just(f64::INFINITY), 0.25f64..50.0];
        (kind, level).prop_map(|(kind, level)| NonlinearitySpec::new(kind, level).unwrap())
    }

    proptest! {
        #[test]
        fn g_eval_nondecreasing_and_bounded(spec in catalogue(), mut rs in proptest::collection::vec(-2.0f64..20.0, 2..40)) {
            rs.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            for r in rs {
                let v = spec.g_eval(r);
                prop_assert!(v >= prev);
                prop_assert!(v <= spec.truncation_level);
                if r <= 0.0 {
                    prop_assert_eq!(v, 0.0);
                }
                prev = v;
            }
        }

        #[test]
        fn solve_is_exactly_monotone_in_w(spec in catalogue(), a in -1.0f64..30.0, b in -1.0f64..30.0, dt in 1e-4f64..0.5) {
            let (w1, w2) = if a <= b { (a, b) } else { (b, a) };
            let v1 = implicit_reaction_solve(&spec, dt, w1).unwrap();
            let v2 = implicit_reaction_solve(&spec, dt, w2).unwrap();
            prop_assert!(v1 <= v2);
        }

        #[test]
        fn solve_is_exactly_antitone_in_k(spec in catalogue(), w in 0.0f64..30.0, dt in 1e-4f64..0.5, k1 in 0.25f64..50.0, k2 in 0.25f64..50.0) {
            let (k_small, k_big) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
            let v_small = implicit_reaction_solve(&spec.with_level(k_small).unwrap(), dt, w).unwrap();
            let v_big = implicit_reaction_solve(&spec.with_level(k_big).unwrap(), dt, w).unwrap();
            // weaker absorption leaves more mass behind
            prop_assert!(v_small >= v_big);
        }

        #[test]
        fn solve_residual_within_budget(spec in catalogue(), w in 0.0f64..30.0, dt in 1e-4f64..0.5) {
            let v = implicit_reaction_solve(&spec, dt, w).unwrap();
            let residual = (v + dt * spec.g_eval(v) - w).abs();
            prop_assert!(residual <= 1e-12 * w.abs().max(1.0));
        }
    }
}
