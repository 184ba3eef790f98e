//! Model inputs and the wedge picture of the time-changed driver pair.
//!
//! After removing β (x̂ = x^{1-β}/(1-β)) and running the volatility clock,
//! the question "does X reach zero" becomes "which of two correlated Brownian
//! motions started at (a1, a2) reaches zero first". Decorrelating the pair
//! turns the quadrant into a planar wedge of opening `alpha`, entered at
//! polar position (`r0`, `theta0`). The edge at angle `alpha` is the asset
//! barrier, the edge at angle 0 the volatility barrier.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlations this close to ±1 collapse the wedge and are rejected.
pub const RHO_LIMIT: f64 = 1.0 - 1e-12;

/// The five inputs of the drifted SABR system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub rho: f64,
    pub nu: f64,
    pub x0: f64,
    pub y0: f64,
}

/// One failed bound reported by [`ModelParams::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl ModelParams {
    pub fn new(beta: f64, rho: f64, nu: f64, x0: f64, y0: f64) -> Self {
        Self {
            beta,
            rho,
            nu,
            x0,
            y0,
        }
    }

    /// Lists every violated bound; empty when the inputs are usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push =
            |field: &'static str, message: String| out.push(Violation { field, message });

        if !self.beta.is_finite() || self.beta < 0.0 {
            push("beta", format!("beta must be >= 0, got {}", self.beta));
        } else if self.beta >= 1.0 {
            push("beta", format!("beta must be < 1, got {}", self.beta));
        }
        if !self.rho.is_finite() || self.rho.abs() >= 1.0 {
            push("rho", format!("rho must lie in (-1, 1), got {}", self.rho));
        } else if self.rho.abs() >= RHO_LIMIT {
            push(
                "rho",
                format!(
                    "|rho| must be < 1 - 1e-12 (degenerate wedge), got {}",
                    self.rho
                ),
            );
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            push("nu", format!("nu must be > 0, got {}", self.nu));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            push("x0", format!("x0 must be > 0, got {}", self.x0));
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            push("y0", format!("y0 must be > 0, got {}", self.y0));
        }
        out
    }

    /// Fails with the first violation; β = 1 gets its own error.
    pub fn check(&self) -> Result<()> {
        if self.beta == 1.0 {
            return Err(Error::BetaOne(self.beta));
        }
        match self.validate().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::Domain {
                field: v.field,
                message: v.message,
            }),
        }
    }

    /// `sqrt(1 - rho^2)`.
    pub fn rho_bar(&self) -> f64 {
        rho_bar(self.rho)
    }

    /// Start of the β-free asset coordinate, x0^{1-β}/(1-β).
    pub fn reduced_x0(&self) -> f64 {
        reduce_beta(self.x0, self.beta)
    }

    /// The same hitting problem with β removed: (0, x0^{1-β}/(1-β), ρ, ν, y0).
    pub fn beta_reduced(&self) -> ModelParams {
        ModelParams {
            beta: 0.0,
            x0: self.reduced_x0(),
            ..*self
        }
    }
}

pub(crate) fn rho_bar(rho: f64) -> f64 {
    ((1.0 - rho) * (1.0 + rho)).sqrt()
}

pub(crate) fn reduce_beta(x: f64, beta: f64) -> f64 {
    let e = 1.0 - beta;
    x.powf(e) / e
}

/// Polar description of the decorrelated driver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeCoordinates {
    pub rho_bar: f64,
    /// Distance of the asset driver to its barrier.
    pub a1: f64,
    /// Distance of the volatility driver to its barrier, y0/ν.
    pub a2: f64,
    pub r0: f64,
    /// Wedge opening, in (0, π).
    pub alpha: f64,
    /// Start angle measured from the volatility edge, in (0, alpha).
    pub theta0: f64,
}

impl WedgeCoordinates {
    /// Wedge for two unit-variance Brownian motions with correlation `rho`
    /// started at distances `a1` (asset) and `a2` (volatility) from zero.
    pub fn from_starts(rho: f64, a1: f64, a2: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= RHO_LIMIT {
            return Err(Error::domain(
                "rho",
                format!("rho must lie in (-1, 1), got {rho}"),
            ));
        }
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::domain("a1", format!("a1 must be > 0, got {a1}")));
        }
        if !(a2 > 0.0 && a2.is_finite()) {
            return Err(Error::domain("a2", format!("a2 must be > 0, got {a2}")));
        }
        let rho_bar = rho_bar(rho);
        let u = a1 - rho * a2;
        let v = a2 * rho_bar;
        Ok(Self {
            rho_bar,
            a1,
            a2,
            r0: u.hypot(v) / rho_bar,
            alpha: rho_bar.atan2(-rho),
            theta0: v.atan2(u),
        })
    }

    /// Correlation recovered from the opening angle.
    pub fn rho(&self) -> f64 {
        -self.alpha.cos()
    }

    /// The problem with the two barriers exchanged: start angle alpha - theta0.
    pub fn swapped(&self) -> Self {
        Self {
            a1: self.a2,
            a2: self.a1,
            theta0: self.alpha - self.theta0,
            ..*self
        }
    }

    /// Rescaled so that r0 = 1. Angles are untouched.
    pub fn normalized(&self) -> Self {
        Self {
            a1: self.a1 / self.r0,
            a2: self.a2 / self.r0,
            r0: 1.0,
            ..*self
        }
    }

    /// Bessel order step π/(2α); the n-th series term uses order n times this.
    pub fn order_step(&self) -> f64 {
        std::f64::consts::PI / (2.0 * self.alpha)
    }
}

/// Validates `p` and returns its wedge coordinates.
pub fn derive_wedge(p: &ModelParams) -> Result<WedgeCoordinates> {
    p.check()?;
    WedgeCoordinates::from_starts(p.rho, p.reduced_x0(), p.y0 / p.nu)
}
