//! Charts, metrics and the seven coordinate maps between the SABR planes and
//! the Poincaré half-plane.
//!
//! | map             | from | to  | formula                                         |
//! |-----------------|------|-----|-------------------------------------------------|
//! | `Phi00Tilde`    | S    | H   | (x^{1−β}/(ρ̄(1−β)) − ρy/ρ̄, y)                    |
//! | `Phi0Hat`       | S    | S0  | (x^{1−β}/(1−β), y)                              |
//! | `Phi0Bar`       | S    | U   | (((1−β)x̃)^{1/(1−β)}, y), x̃ the first entry above |
//! | `Phi0Tilde`     | S0   | H   | ((x − ρy)/ρ̄, y)                                 |
//! | `Chi`           | S0   | S   | (((1−β)x)^{1/(1−β)}, y)                         |
//! | `ChiBar`        | H+   | U   | (((1−β)x)^{1/(1−β)}, y)                         |
//! | `Varphi0Tilde`  | U    | H+  | (x^{1−β}/(1−β), y)                              |
//!
//! Maps built on fractional powers accept x = 0 (continuous extension) but
//! their Jacobians do not.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceId {
    /// General SABR plane, metric g.
    S,
    /// β = 0 SABR plane, metric g⁰.
    S0,
    /// Poincaré half-plane, metric h.
    H,
    /// Uncorrelated SABR plane, metric u.
    U,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceId::S => "S",
            SpaceId::S0 => "S0",
            SpaceId::H => "H",
            SpaceId::U => "U",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub space: SpaceId,
    pub x: f64,
    pub y: f64,
}

impl ChartPoint {
    pub fn new(space: SpaceId, x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::domain("x", format!("x must be finite, got {x}")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::domain("y", format!("y must be > 0, got {y}")));
        }
        Ok(Self { space, x, y })
    }

    fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapId {
    Phi00Tilde,
    Phi0Hat,
    Phi0Bar,
    Phi0Tilde,
    Chi,
    ChiBar,
    Varphi0Tilde,
}

impl MapId {
    pub const ALL: [MapId; 7] = [
        MapId::Phi00Tilde,
        MapId::Phi0Hat,
        MapId::Phi0Bar,
        MapId::Phi0Tilde,
        MapId::Chi,
        MapId::ChiBar,
        MapId::Varphi0Tilde,
    ];

    pub fn source(self) -> SpaceId {
        match self {
            MapId::Phi00Tilde | MapId::Phi0Hat | MapId::Phi0Bar => SpaceId::S,
            MapId::Phi0Tilde | MapId::Chi => SpaceId::S0,
            MapId::ChiBar => SpaceId::H,
            MapId::Varphi0Tilde => SpaceId::U,
        }
    }

    pub fn target(self) -> SpaceId {
        match self {
            MapId::Phi00Tilde | MapId::Phi0Tilde | MapId::Varphi0Tilde => SpaceId::H,
            MapId::Phi0Hat => SpaceId::S0,
            MapId::Chi => SpaceId::S,
            MapId::Phi0Bar | MapId::ChiBar => SpaceId::U,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MapId::Phi00Tilde => "phi00_tilde",
            MapId::Phi0Hat => "phi0_hat",
            MapId::Phi0Bar => "phi0_bar",
            MapId::Phi0Tilde => "phi0_tilde",
            MapId::Chi => "chi",
            MapId::ChiBar => "chi_bar",
            MapId::Varphi0Tilde => "varphi0_tilde",
        }
    }

    /// Whether the map needs x ≥ 0 (x > 0 for derivatives).
    fn needs_positive_x(self) -> bool {
        !matches!(self, MapId::Phi0Tilde)
    }
}

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain("map", format!("unknown map '{s}'")))
    }
}

/// Shape parameters shared by all formulas.
#[derive(Clone, Copy)]
struct Shape {
    beta: f64,
    rho: f64,
    rho_bar: f64,
}

fn shape(p: &ModelParams) -> Result<Shape> {
    if !(0.0..1.0).contains(&p.beta) {
        return Err(Error::domain(
            "beta",
            format!("beta must lie in [0, 1), got {}", p.beta),
        ));
    }
    if !(p.rho.abs() < 1.0) {
        return Err(Error::domain(
            "rho",
            format!("rho must lie in (-1, 1), got {}", p.rho),
        ));
    }
    Ok(Shape {
        beta: p.beta,
        rho: p.rho,
        rho_bar: p.rho_bar(),
    })
}

/// Metric coefficients at `pt` for the metric of its space.
pub fn metric_tensor(pt: &ChartPoint, p: &ModelParams) -> Result<Mat2> {
    let sh = shape(p)?;
    ChartPoint::new(pt.space, pt.x, pt.y)?;
    let y2 = pt.y * pt.y;
    match pt.space {
        SpaceId::H => Ok(diag(1.0 / y2, 1.0 / y2)),
        SpaceId::S0 => Ok(sabr_metric(1.0, pt.y, sh.rho, sh.rho_bar)),
        SpaceId::S => {
            let xb = pow_beta(pt.x, sh.beta, "x")?;
            Ok(sabr_metric(xb, pt.y, sh.rho, sh.rho_bar))
        }
        SpaceId::U => {
            let xb = pow_beta(pt.x, sh.beta, "x")?;
            Ok(diag(1.0 / (y2 * xb * xb), 1.0 / y2))
        }
    }
}

/// x^β, refusing x ≤ 0 unless β = 0.
fn pow_beta(x: f64, beta: f64, field: &'static str) -> Result<f64> {
    if beta == 0.0 {
        return Ok(1.0);
    }
    if !(x > 0.0) {
        return Err(Error::domain(
            field,
            format!("{field} must be > 0 when beta > 0, got {x}"),
        ));
    }
    Ok(x.powf(beta))
}

fn sabr_metric(xb: f64, y: f64, rho: f64, rho_bar: f64) -> Mat2 {
    let c = 1.0 / (rho_bar * rho_bar * y * y);
    let off = -rho * c / xb;
    [[c / (xb * xb), off], [off, c]]
}

fn diag(a: f64, b: f64) -> Mat2 {
    [[a, 0.0], [0.0, b]]
}

fn check_source(m: MapId, pt: &ChartPoint, strict: bool) -> Result<()> {
    ChartPoint::new(pt.space, pt.x, pt.y)?;
    if pt.space != m.source() {
        return Err(Error::domain(
            "space",
            format!(
                "{m} maps from {} but the point lies in {}",
                m.source(),
                pt.space
            ),
        ));
    }
    if m.needs_positive_x() {
        let ok = if strict { pt.x > 0.0 } else { pt.x >= 0.0 };
        if !ok {
            let bound = if strict { "> 0" } else { ">= 0" };
            return Err(Error::domain(
                "x",
                format!("{m} needs x {bound}, got {}", pt.x),
            ));
        }
    }
    Ok(())
}

fn check_rho_nonpositive(m: MapId, rho: f64) -> Result<()> {
    if rho > 0.0 {
        return Err(Error::domain(
            "rho",
            format!("{m} is only defined for rho <= 0, got {rho}"),
        ));
    }
    Ok(())
}

/// x^{1−β}/(1−β).
fn flatten(x: f64, beta: f64) -> f64 {
    let e = 1.0 - beta;
    x.powf(e) / e
}

/// ((1−β)x)^{1/(1−β)}, the inverse of [`flatten`].
fn unflatten(x: f64, beta: f64) -> f64 {
    let e = 1.0 - beta;
    (e * x).powf(1.0 / e)
}

/// Image of `pt` under `m`.
pub fn map_apply(m: MapId, pt: &ChartPoint, p: &ModelParams) -> Result<ChartPoint> {
    let sh = shape(p)?;
    check_source(m, pt, false)?;
    let (x, y) = (pt.x, pt.y);
    let nx = match m {
        MapId::Phi00Tilde => (flatten(x, sh.beta) - sh.rho * y) / sh.rho_bar,
        MapId::Phi0Hat | MapId::Varphi0Tilde => flatten(x, sh.beta),
        MapId::Phi0Bar => {
            check_rho_nonpositive(m, sh.rho)?;
            unflatten((flatten(x, sh.beta) - sh.rho * y) / sh.rho_bar, sh.beta)
        }
        MapId::Phi0Tilde => (x - sh.rho * y) / sh.rho_bar,
        MapId::Chi | MapId::ChiBar => unflatten(x, sh.beta),
    };
    Ok(ChartPoint {
        space: m.target(),
        x: nx,
        y,
    })
}

/// Inverse of `Phi0Tilde`: (x̃, ỹ) ↦ (ρ̄x̃ + ρỹ, ỹ).
pub fn phi0_tilde_inverse(pt: &ChartPoint, p: &ModelParams) -> Result<ChartPoint> {
    let sh = shape(p)?;
    if pt.space != SpaceId::H {
        return Err(Error::domain(
            "space",
            format!("expected a point in H, got {}", pt.space),
        ));
    }
    ChartPoint::new(SpaceId::S0, sh.rho_bar * pt.x + sh.rho * pt.y, pt.y)
}

/// Analytic Jacobian ∂(new x, new y)/∂(x, y); rows are output coordinates.
pub fn map_jacobian(m: MapId, pt: &ChartPoint, p: &ModelParams) -> Result<Mat2> {
    let sh = shape(p)?;
    check_source(m, pt, true)?;
    let (x, y) = (pt.x, pt.y);
    let b = sh.beta;
    let e = 1.0 - b;
    let dx = match m {
        MapId::Phi00Tilde => [x.powf(-b) / sh.rho_bar, -sh.rho / sh.rho_bar],
        MapId::Phi0Hat | MapId::Varphi0Tilde => [x.powf(-b), 0.0],
        MapId::Phi0Bar => {
            check_rho_nonpositive(m, sh.rho)?;
            // ∂x̄/∂x̃ = ((1−β)x̃)^{β/(1−β)}
            let xt = (flatten(x, b) - sh.rho * y) / sh.rho_bar;
            let outer = (e * xt).powf(b / e);
            [
                outer * x.powf(-b) / sh.rho_bar,
                -outer * sh.rho / sh.rho_bar,
            ]
        }
        MapId::Phi0Tilde => [1.0 / sh.rho_bar, -sh.rho / sh.rho_bar],
        MapId::Chi | MapId::ChiBar => [(e * x).powf(b / e), 0.0],
    };
    Ok([dx, [0.0, 1.0]])
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn max_abs(a: &Mat2) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Jᵀ G J.
fn pull_back(j: &Mat2, g: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += j[a][r] * g[a][b] * j[b][c];
                }
            }
            *cell = acc;
        }
    }
    out
}

/// max |Jᵀ G_target(m(pt)) J − G_source(pt)| over the four entries.
pub fn pullback_residual(m: MapId, pt: &ChartPoint, p: &ModelParams) -> Result<f64> {
    let j = map_jacobian(m, pt, p)?;
    let img = map_apply(m, pt, p)?;
    let pulled = pull_back(&j, &metric_tensor(&img, p)?);
    let g = metric_tensor(pt, p)?;
    let mut diff = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            diff[r][c] = pulled[r][c] - g[r][c];
        }
    }
    Ok(max_abs(&diff))
}

/// Same as [`pullback_residual`], divided by the largest entry of G_source.
pub fn pullback_residual_relative(m: MapId, pt: &ChartPoint, p: &ModelParams) -> Result<f64> {
    let g = metric_tensor(pt, p)?;
    Ok(pullback_residual(m, pt, p)? / max_abs(&g))
}

fn then(pt: &ChartPoint, maps: &[MapId], p: &ModelParams) -> Result<ChartPoint> {
    maps.iter().try_fold(*pt, |q, &m| map_apply(m, &q, p))
}

fn gap(a: &ChartPoint, b: &ChartPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y) / b.norm().max(f64::MIN_POSITIVE)
}

/// Largest relative mismatch among the commuting squares, maps applied left
/// to right:
/// phi0_bar·varphi0_tilde = phi00_tilde, phi0_hat·phi0_tilde = phi00_tilde,
/// chi·phi00_tilde = phi0_tilde (at phi0_hat(pt)), phi00_tilde·chi_bar = phi0_bar.
/// The two squares through phi0_bar are skipped when ρ > 0.
pub fn diagram_residual(pt: &ChartPoint, p: &ModelParams) -> Result<f64> {
    use MapId::*;
    if pt.space != SpaceId::S {
        return Err(Error::domain(
            "space",
            format!("diagram starts in S, got {}", pt.space),
        ));
    }
    let direct = map_apply(Phi00Tilde, pt, p)?;
    let mut worst = gap(&then(pt, &[Phi0Hat, Phi0Tilde], p)?, &direct);
    let hat = map_apply(Phi0Hat, pt, p)?;
    worst = worst.max(gap(
        &then(&hat, &[Chi, Phi00Tilde], p)?,
        &map_apply(Phi0Tilde, &hat, p)?,
    ));
    if p.rho <= 0.0 {
        worst = worst.max(gap(&then(pt, &[Phi0Bar, Varphi0Tilde], p)?, &direct));
        worst = worst.max(gap(
            &then(pt, &[Phi00Tilde, ChiBar], p)?,
            &map_apply(Phi0Bar, pt, p)?,
        ));
    }
    Ok(worst)
}
