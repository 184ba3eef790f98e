//! The hitting probability as a double integral of the joint density over
//! {0 < s < t}, and its restriction to t ≤ T.
//!
//! The wedge is first rescaled to r0 = 1. The asset passage time s is the
//! outer variable, s = s_lo + v/(1 − v); the gap t − s is the inner one,
//! t − s = (1 + s)·w/(1 − w). Both are integrated with tanh-sinh rules, which
//! absorb the algebraic endpoint behaviour at t → s and at infinity.
//!
//! Near s = 0 the Bessel series cancels down to exp(−a1²/2s) out of terms of
//! size one, so the outer range starts at s_lo, chosen such that
//! P(asset passage < s_lo) ≤ exp(−a1²/2s_lo) = 1e-3·abs_tol.

use serde::Serialize;

use crate::density::{joint_gap, DensityEvalConfig};
use crate::error::{Error, Result};
use crate::params::{derive_wedge, ModelParams, WedgeCoordinates};
use crate::quad::TanhSinh;

const OUTER_MAX_LEVEL: usize = 8;
const INNER_MAX_LEVEL: usize = 8;

/// Outcome of one probability integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    /// `raw_value` clamped to [0, 1].
    pub value: f64,
    pub raw_value: f64,
    pub abs_err: f64,
    pub evals: usize,
    pub converged: bool,
}

fn check_tol(abs_tol: f64) -> Result<()> {
    if !(1e-12..=1e-2).contains(&abs_tol) {
        return Err(Error::Config(format!(
            "abs_tol must lie in [1e-12, 1e-2], got {abs_tol}"
        )));
    }
    Ok(())
}

/// P(X reaches zero) for the drifted SABR model.
pub fn hitting_probability(
    p: &ModelParams,
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    let w = derive_wedge(p)?;
    hitting_probability_wedge(&w, abs_tol, cfg)
}

/// P(asset edge reached before the volatility edge) for a given wedge.
pub fn hitting_probability_wedge(
    w: &WedgeCoordinates,
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    check_tol(abs_tol)?;
    cfg.check()?;
    double_integral(w, f64::INFINITY, abs_tol, cfg)
}

/// ∫_0^T dt ∫_0^t f(s, t) ds. `horizon = f64::INFINITY` gives the full probability.
pub fn cumulative(
    p: &ModelParams,
    horizon: f64,
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    let w = derive_wedge(p)?;
    cumulative_wedge(&w, horizon, abs_tol, cfg)
}

pub fn cumulative_wedge(
    w: &WedgeCoordinates,
    horizon: f64,
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    if !(horizon > 0.0) {
        return Err(Error::domain("T", format!("T must be > 0, got {horizon}")));
    }
    check_tol(abs_tol)?;
    cfg.check()?;
    double_integral(w, horizon, abs_tol, cfg)
}

fn double_integral(
    w: &WedgeCoordinates,
    horizon: f64,
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    let scale = w.r0 * w.r0;
    let wn = w.normalized();
    let t_max = horizon / scale;
    let s_lo = wn.a1 * wn.a1 / (2.0 * (1e3 / abs_tol).ln());
    if t_max <= s_lo {
        return Ok(QuadratureResult {
            value: 0.0,
            raw_value: 0.0,
            abs_err: 1e-3 * abs_tol,
            evals: 0,
            converged: true,
        });
    }

    // 1 − v at the upper end of the outer range; zero for an infinite horizon.
    let v_gap = if t_max.is_finite() {
        1.0 / (1.0 + t_max - s_lo)
    } else {
        0.0
    };
    let v_max = 1.0 - v_gap;

    let outer = TanhSinh {
        abs_tol: 0.5 * abs_tol,
        rel_tol: 1e-14,
        min_level: 3,
        max_level: OUTER_MAX_LEVEL,
    };
    let mut failure: Option<Error> = None;
    let mut inner_ok = true;
    let mut evals = 0;

    let res = outer.integrate(0.0, v_max, |v, _, right| {
        if failure.is_some() {
            return 0.0;
        }
        let one_minus_v = v_gap + right;
        let s = s_lo + v / one_minus_v;
        let jac = 1.0 / (one_minus_v * one_minus_v);
        // Weights of the outer rule sum to at most 1, so this keeps the total
        // inner error under abs_tol/4.
        let inner = TanhSinh {
            abs_tol: 0.25 * abs_tol / jac,
            rel_tol: 1e-13,
            min_level: 3,
            max_level: INNER_MAX_LEVEL,
        };
        let (w_max, w_gap) = if t_max.is_finite() {
            let g = (1.0 + s) / (1.0 + t_max);
            (1.0 - g, g)
        } else {
            (1.0, 0.0)
        };
        if !(w_max > 0.0) {
            return 0.0;
        }
        let r = inner.integrate(0.0, w_max, |_, left, right| {
            if failure.is_some() {
                return 0.0;
            }
            let one_minus_u = w_gap + right;
            let gap = (1.0 + s) * left / one_minus_u;
            if gap <= 0.0 {
                return 0.0;
            }
            match joint_gap(s, gap, &wn, cfg) {
                Ok(d) => d.value * (1.0 + s) / (one_minus_u * one_minus_u),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        });
        evals += r.evals;
        inner_ok &= r.converged;
        jac * r.value
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let raw = res.value;
    let abs_err = res.abs_err + 0.25 * abs_tol + 1e-3 * abs_tol;
    let in_bounds = raw >= -10.0 * abs_tol && raw <= 1.0 + 10.0 * abs_tol;
    let out = QuadratureResult {
        value: raw.clamp(0.0, 1.0),
        raw_value: raw,
        abs_err,
        evals,
        converged: res.converged && inner_ok && in_bounds,
    };
    if out.converged {
        Ok(out)
    } else {
        Err(Error::NonConvergence(Box::new(out)))
    }
}

/// ∫∫ f over the box [s_a, s_b] × [t_a, t_b] intersected with {s < t}.
pub fn bin_mass(
    w: &WedgeCoordinates,
    s_range: (f64, f64),
    t_range: (f64, f64),
    abs_tol: f64,
    cfg: &DensityEvalConfig,
) -> Result<QuadratureResult> {
    check_tol(abs_tol)?;
    cfg.check()?;
    let ok = |r: (f64, f64)| r.0 >= 0.0 && r.0 < r.1 && r.1.is_finite();
    if !ok(s_range) || !ok(t_range) {
        return Err(Error::Config(format!(
            "bin ranges must satisfy 0 <= lo < hi < inf, got {s_range:?} x {t_range:?}"
        )));
    }
    let scale = w.r0 * w.r0;
    let wn = w.normalized();
    let s_lo = wn.a1 * wn.a1 / (2.0 * (1e3 / abs_tol).ln());
    let (sa, sb) = (
        (s_range.0 / scale).max(s_lo),
        (s_range.1 / scale).min(t_range.1 / scale),
    );
    let (ta, tb) = (t_range.0 / scale, t_range.1 / scale);
    let empty = QuadratureResult {
        value: 0.0,
        raw_value: 0.0,
        abs_err: 1e-3 * abs_tol,
        evals: 0,
        converged: true,
    };
    if sa >= sb {
        return Ok(empty);
    }
    let mut failure: Option<Error> = None;
    let mut inner_ok = true;
    let mut evals = 0;
    let outer = TanhSinh {
        abs_tol: 0.5 * abs_tol,
        rel_tol: 1e-12,
        min_level: 3,
        max_level: OUTER_MAX_LEVEL,
    };
    let inner = TanhSinh {
        abs_tol: 0.25 * abs_tol / (sb - sa),
        rel_tol: 1e-12,
        min_level: 3,
        max_level: INNER_MAX_LEVEL,
    };
    let res = outer.integrate(sa, sb, |s, _, _| {
        if failure.is_some() {
            return 0.0;
        }
        let (g0, g1) = ((ta - s).max(0.0), tb - s);
        if !(g1 > g0) {
            return 0.0;
        }
        let r = inner.integrate(g0, g1, |gap, _, _| {
            if failure.is_some() || gap <= 0.0 {
                return 0.0;
            }
            match joint_gap(s, gap, &wn, cfg) {
                Ok(d) => d.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        });
        evals += r.evals;
        inner_ok &= r.converged;
        r.value
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let out = QuadratureResult {
        value: res.value.clamp(0.0, 1.0),
        raw_value: res.value,
        abs_err: res.abs_err + 0.25 * abs_tol + 1e-3 * abs_tol,
        evals,
        converged: res.converged && inner_ok,
    };
    if out.converged {
        Ok(out)
    } else {
        Err(Error::NonConvergence(Box::new(out)))
    }
}

/// One line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub params: ModelParams,
    pub result: Result<QuadratureResult>,
}

/// Probabilities over a parameter grid, in grid order. Failures stay in their row.
pub fn sweep(grid: &[ModelParams], abs_tol: f64, cfg: &DensityEvalConfig) -> Vec<SweepEntry> {
    let run = |p: &ModelParams| SweepEntry {
        params: *p,
        result: hitting_probability(p, abs_tol, cfg),
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_start_is_one_half() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0);
        let r = hitting_probability(&p, 1e-8, &DensityEvalConfig::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-7, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0);
        let cfg = DensityEvalConfig::default();
        assert!(matches!(
            hitting_probability(&p, 1e-13, &cfg),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            hitting_probability(&p, 0.1, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tiny_horizon_is_zero() {
        let p = ModelParams::new(0.0, 0.3, 1.0, 1.0, 1.0);
        let r = cumulative(&p, 1e-4, 1e-8, &DensityEvalConfig::default()).unwrap();
        assert!(r.value < 1e-10);
    }
}
