//! Joint density of the two first-passage times on the event that the asset
//! driver reaches zero first.
//!
//! `f(s, t)` is the density of (asset passage = s, volatility passage = t)
//! for s < t, written as a Bessel series in the wedge coordinates. Every
//! term shares the exponential factor exp(c) with
//! c = −(r0²/2s)(t − s cos 2α)/(2t − s(1 + cos 2α)), and its Bessel factor is
//! I_ν(z). Writing I_ν(z) = e^{z} · (e^{−z} I_ν(z)) lets the two exponentials
//! be merged into exp(z + c) = exp(−r0² sin²α / (2(t − s cos²α))), which is
//! bounded by 1, so nothing overflows even when s is tiny.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::WedgeCoordinates;
use crate::special::i_scaled;

/// Below this the merged exponential underflows and the density is zero.
const EXP_UNDERFLOW: f64 = -745.0;

/// Truncation policy of the n-series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEvalConfig {
    pub rel_tol: f64,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for DensityEvalConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            n_min: 4,
            n_max: 10_000,
        }
    }
}

impl DensityEvalConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-6) {
            return Err(Error::Config(format!(
                "rel_tol must lie in (0, 1e-6), got {}",
                self.rel_tol
            )));
        }
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::Config(format!(
                "need 1 <= n_min <= n_max, got n_min = {}, n_max = {}",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }
}

/// How the series behaved at one (s, t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    pub value: f64,
    pub terms_used: usize,
    pub last_term_magnitude: f64,
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(
            "s",
            format!("s must be finite and > 0, got {s}"),
        ));
    }
    if !(t > s) || !t.is_finite() {
        return Err(Error::domain(
            "t",
            format!("need s < t < inf, got s = {s}, t = {t}"),
        ));
    }
    Ok(())
}

/// f(s, t) for 0 < s < t.
pub fn f_joint(s: f64, t: f64, w: &WedgeCoordinates, cfg: &DensityEvalConfig) -> Result<f64> {
    series_diagnostics(s, t, w, cfg).map(|d| d.value)
}

/// f(s, t) together with the number of series terms and the last term's size.
pub fn series_diagnostics(
    s: f64,
    t: f64,
    w: &WedgeCoordinates,
    cfg: &DensityEvalConfig,
) -> Result<SeriesDiagnostics> {
    check_times(s, t)?;
    joint_gap(s, t - s, w, cfg)
}

/// f at (s, s + gap). Quadrature nodes hand in the gap directly so that it
/// keeps full precision as s approaches t.
pub(crate) fn joint_gap(
    s: f64,
    gap: f64,
    w: &WedgeCoordinates,
    cfg: &DensityEvalConfig,
) -> Result<SeriesDiagnostics> {
    let sin_a = w.alpha.sin();
    let sin2 = sin_a * sin_a;
    // t − s cos²α, also equal to half of 2t − s(1 + cos 2α).
    let lag = gap + s * sin2;
    let r2 = w.r0 * w.r0;
    let merged = -r2 * sin2 / (2.0 * lag);
    if merged < EXP_UNDERFLOW {
        return Ok(SeriesDiagnostics {
            value: 0.0,
            terms_used: 0,
            last_term_magnitude: 0.0,
        });
    }
    let z = r2 * gap / (4.0 * s * lag);
    let prefactor = PI * sin_a / (2.0 * w.alpha * w.alpha * gap * (s * lag).sqrt()) * merged.exp();
    let phase = PI * (w.alpha - w.theta0) / w.alpha;
    let (sum, terms, last) = bessel_sum(w.order_step(), phase, z, cfg)?;
    Ok(SeriesDiagnostics {
        value: prefactor * sum,
        terms_used: terms,
        last_term_magnitude: (prefactor * last).abs(),
    })
}

/// Σ_{n≥1} n sin(n·phase) e^{−z} I_{n·step}(z), with the stopping rule of
/// [`DensityEvalConfig`]. Returns (sum, terms, last term).
fn bessel_sum(step: f64, phase: f64, z: f64, cfg: &DensityEvalConfig) -> Result<(f64, usize, f64)> {
    let mut sum = 0.0;
    let mut peak = 0.0f64;
    let mut quiet = 0;
    let mut last = 0.0;
    for n in 1..=cfg.n_max {
        let nf = n as f64;
        // |sin| ≤ 1, so the bound below is immune to accidental zeros of sin(n·phase).
        let bound = nf * i_scaled(nf * step, z);
        last = bound * (nf * phase).sin();
        sum += last;
        peak = peak.max(bound);
        // Terms under the rounding floor of the largest term cannot move the sum.
        let floor = (cfg.rel_tol * sum.abs()).max(1e-2 * f64::EPSILON * peak);
        if bound <= floor {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if n >= cfg.n_min && quiet >= 3 {
            return Ok((sum, n, last));
        }
    }
    Err(Error::Truncation {
        terms: cfg.n_max,
        last_term: last,
    })
}

/// The ρ = 0 form with integer Bessel orders; only accepts wedges of opening π/2.
pub fn f_uncorrelated(
    s: f64,
    t: f64,
    w: &WedgeCoordinates,
    cfg: &DensityEvalConfig,
) -> Result<f64> {
    check_times(s, t)?;
    if (w.alpha - FRAC_PI_2).abs() > 1e-15 {
        return Err(Error::domain(
            "alpha",
            format!("uncorrelated density needs alpha = pi/2, got {}", w.alpha),
        ));
    }
    let r2 = w.r0 * w.r0;
    let gap = t - s;
    // exp(−r0²(t+s)/(4st)) · I_n(z) = exp(−r0²/(2t)) · e^{−z} I_n(z)
    let merged = -r2 / (2.0 * t);
    if merged < EXP_UNDERFLOW {
        return Ok(0.0);
    }
    let z = r2 * gap / (4.0 * s * t);
    let prefactor = 2.0 / (PI * gap * (s * t).sqrt()) * merged.exp();
    let phase = 2.0 * (FRAC_PI_2 - w.theta0);
    let (sum, _, _) = bessel_sum(1.0, phase, z, cfg)?;
    Ok(prefactor * sum)
}
