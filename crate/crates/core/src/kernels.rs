//! Heat kernels on the half-plane and their pullbacks to the SABR planes,
//! plus finite-difference application of the second-order operators.
//!
//! Time is the Brownian clock: kernels solve ∂_t K = ½ Δ K. The half-plane
//! kernel is evaluated from the closed form for ∂_T p = Δ p at T = t/2.
//!
//! [`heat_kernel_h`] is a density with respect to the hyperbolic area
//! dx dy / y². Everything returned as a [`KernelValue`] is a density with
//! respect to Lebesgue measure dx dy in the target variable.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{det, map_apply, map_jacobian, ChartPoint, MapId, SpaceId};
use crate::params::ModelParams;
use crate::quad::{TanhSinh, MAX_LEVEL};
use crate::quadrature::QuadratureResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub time: f64,
    pub source: ChartPoint,
    pub target: ChartPoint,
}

fn expect_space(pt: &ChartPoint, space: SpaceId, field: &'static str) -> Result<()> {
    ChartPoint::new(pt.space, pt.x, pt.y)?;
    if pt.space != space {
        return Err(Error::domain(
            field,
            format!("expected a point in {space}, got {}", pt.space),
        ));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(
            "t",
            format!("t must be finite and > 0, got {t}"),
        ));
    }
    Ok(())
}

/// Geodesic distance in the Poincaré half-plane.
pub fn hyperbolic_distance(z1: &ChartPoint, z2: &ChartPoint) -> Result<f64> {
    expect_space(z1, SpaceId::H, "z1")?;
    expect_space(z2, SpaceId::H, "z2")?;
    Ok(h_dist(z1.x, z1.y, z2.x, z2.y))
}

fn h_dist(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let dx = x1 - x2;
    let dy = y1 - y2;
    // arccosh(1 + q) = ln1p(q + sqrt(q(q + 2))) keeps short distances accurate.
    let q = (dx * dx + dy * dy) / (2.0 * y1 * y2);
    (q + (q * (q + 2.0)).sqrt()).ln_1p()
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// Heat kernel of the half-plane at Brownian time `t` and geodesic distance `d`.
pub fn heat_kernel_h(t: f64, d: f64) -> Result<f64> {
    check_time(t)?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::domain(
            "d",
            format!("d must be finite and >= 0, got {d}"),
        ));
    }
    let tt = 0.5 * t;
    // s = d + w² removes the inverse square root at s = d; the reference
    // exponent keeps the integrand of order one.
    let reference = -d * d / (4.0 * tt) - 0.5 * d;
    let w_max = ((d * d + 160.0 * tt).sqrt() - d).sqrt();
    let rule = TanhSinh {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        min_level: 4,
        max_level: MAX_LEVEL,
    };
    let r = rule.integrate(0.0, w_max, |_, w, _| {
        let w2 = w * w;
        let s = d + w2;
        let ln_g = (2.0 * w * s).ln()
            - s * s / (4.0 * tt)
            - 0.5 * (LN_2 + ln_sinh(d + 0.5 * w2) + ln_sinh(0.5 * w2))
            - reference;
        ln_g.exp()
    });
    let ln_pref = 0.5 * LN_2 - 0.25 * tt - 1.5 * (4.0 * PI * tt).ln() + reference;
    let value = r.value * ln_pref.exp();
    if !r.converged && r.abs_err > 1e-8 * r.value.abs() {
        return Err(Error::NonConvergence(Box::new(QuadratureResult {
            value,
            raw_value: value,
            abs_err: r.abs_err * ln_pref.exp(),
            evals: r.evals,
            converged: false,
        })));
    }
    Ok(value)
}

/// Lebesgue density of hyperbolic Brownian motion from `source` to `target` in H.
pub fn kernel_h(t: f64, source: &ChartPoint, target: &ChartPoint) -> Result<KernelValue> {
    let d = hyperbolic_distance(source, target)?;
    Ok(KernelValue {
        value: heat_kernel_h(t, d)? / (target.y * target.y),
        time: t,
        source: *source,
        target: *target,
    })
}

/// Kernel of Brownian motion on the β = 0 plane: ρ̄⁻¹ · K^h at the images under phi0_tilde.
pub fn kernel_g0(
    t: f64,
    source: &ChartPoint,
    target: &ChartPoint,
    p: &ModelParams,
) -> Result<KernelValue> {
    expect_space(source, SpaceId::S0, "source")?;
    expect_space(target, SpaceId::S0, "target")?;
    let a = map_apply(MapId::Phi0Tilde, source, p)?;
    let b = map_apply(MapId::Phi0Tilde, target, p)?;
    let kh = kernel_h(t, &a, &b)?;
    Ok(KernelValue {
        value: kh.value / p.rho_bar(),
        time: t,
        source: *source,
        target: *target,
    })
}

/// Kernel on the uncorrelated plane: K^h at the images under varphi0_tilde
/// times x̄^{−β} at the target.
pub fn kernel_u(
    t: f64,
    source: &ChartPoint,
    target: &ChartPoint,
    p: &ModelParams,
) -> Result<KernelValue> {
    expect_space(source, SpaceId::U, "source")?;
    expect_space(target, SpaceId::U, "target")?;
    let a = map_apply(MapId::Varphi0Tilde, source, p)?;
    let b = map_apply(MapId::Varphi0Tilde, target, p)?;
    let jac = det(&map_jacobian(MapId::Varphi0Tilde, target, p)?);
    Ok(KernelValue {
        value: kernel_h(t, &a, &b)?.value * jac,
        time: t,
        source: *source,
        target: *target,
    })
}

/// Kernel on the general plane with the default guard δ = 1e-3·x0.
pub fn kernel_g(
    t: f64,
    source: &ChartPoint,
    target: &ChartPoint,
    p: &ModelParams,
) -> Result<KernelValue> {
    kernel_g_guarded(t, source, target, p, 1e-3 * p.x0)
}

/// K^u at the images under phi0_bar times det ∇phi0_bar at the target.
/// Needs ρ ≤ 0 and target x > `delta`.
pub fn kernel_g_guarded(
    t: f64,
    source: &ChartPoint,
    target: &ChartPoint,
    p: &ModelParams,
    delta: f64,
) -> Result<KernelValue> {
    expect_space(source, SpaceId::S, "source")?;
    expect_space(target, SpaceId::S, "target")?;
    if p.rho > 0.0 {
        return Err(Error::domain(
            "rho",
            format!("kernel_g needs rho <= 0, got {}", p.rho),
        ));
    }
    if !(target.x > delta) {
        return Err(Error::domain(
            "x",
            format!("target x must exceed the guard {delta}, got {}", target.x),
        ));
    }
    let a = map_apply(MapId::Phi0Bar, source, p)?;
    let b = map_apply(MapId::Phi0Bar, target, p)?;
    let jac = det(&map_jacobian(MapId::Phi0Bar, target, p)?);
    Ok(KernelValue {
        value: kernel_u(t, &a, &b, p)?.value * jac,
        time: t,
        source: *source,
        target: *target,
    })
}

/// The two generators written without first-order terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// 𝒜 on S.
    Sabr,
    /// 𝒜 with ρ = 0, on U.
    Uncorrelated,
}

/// Central differences of a field at one point.
struct Stencil {
    fx: f64,
    fxx: f64,
    fyy: f64,
    fxy: f64,
}

fn stencil<F: Fn(f64, f64) -> f64>(f: &F, x: f64, y: f64, h: f64) -> Stencil {
    let c = f(x, y);
    let (xp, xm) = (f(x + h, y), f(x - h, y));
    let (yp, ym) = (f(x, y + h), f(x, y - h));
    let cross = f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h);
    let h2 = h * h;
    Stencil {
        fx: (xp - xm) / (2.0 * h),
        fxx: (xp - 2.0 * c + xm) / h2,
        fyy: (yp - 2.0 * c + ym) / h2,
        fxy: cross / (4.0 * h2),
    }
}

fn check_stencil(pt: &ChartPoint, h: f64, needs_x: bool) -> Result<()> {
    ChartPoint::new(pt.space, pt.x, pt.y)?;
    if !(h > 0.0) {
        return Err(Error::domain(
            "h_step",
            format!("h_step must be > 0, got {h}"),
        ));
    }
    if pt.y - h <= 0.0 {
        return Err(Error::domain(
            "y",
            format!("stencil leaves y > 0: y = {}, h = {h}", pt.y),
        ));
    }
    if needs_x && pt.x - h <= 0.0 {
        return Err(Error::domain(
            "x",
            format!("stencil leaves x > 0: x = {}, h = {h}", pt.x),
        ));
    }
    Ok(())
}

/// Laplace–Beltrami operator of the metric of `pt.space` applied to `f` at `pt`.
pub fn laplace_beltrami_apply<F: Fn(f64, f64) -> f64>(
    f: F,
    pt: &ChartPoint,
    h_step: f64,
    p: &ModelParams,
) -> Result<f64> {
    let beta = match pt.space {
        SpaceId::S | SpaceId::U => p.beta,
        SpaceId::S0 | SpaceId::H => 0.0,
    };
    let rho = match pt.space {
        SpaceId::S | SpaceId::S0 => p.rho,
        SpaceId::H | SpaceId::U => 0.0,
    };
    check_stencil(pt, h_step, beta > 0.0)?;
    let (x, y) = (pt.x, pt.y);
    let d = stencil(&f, x, y, h_step);
    if pt.space == SpaceId::H {
        return Ok(y * y * (d.fxx + d.fyy));
    }
    let (xb, drift) = if beta > 0.0 {
        (x.powf(beta), beta * x.powf(2.0 * beta - 1.0))
    } else {
        (1.0, 0.0)
    };
    Ok(y * y * (drift * d.fx + xb * xb * d.fxx + 2.0 * rho * xb * d.fxy + d.fyy))
}

/// 𝒜 f or 𝒜_{ρ=0} f at `pt`.
pub fn generator_apply<F: Fn(f64, f64) -> f64>(
    which: Generator,
    f: F,
    pt: &ChartPoint,
    h_step: f64,
    p: &ModelParams,
) -> Result<f64> {
    let (space, rho) = match which {
        Generator::Sabr => (SpaceId::S, p.rho),
        Generator::Uncorrelated => (SpaceId::U, 0.0),
    };
    expect_space(pt, space, "pt")?;
    check_stencil(pt, h_step, p.beta > 0.0)?;
    let (x, y) = (pt.x, pt.y);
    let d = stencil(&f, x, y, h_step);
    let xb = if p.beta > 0.0 { x.powf(p.beta) } else { 1.0 };
    Ok(y * y * (xb * xb * d.fxx + 2.0 * rho * xb * d.fxy + d.fyy))
}

/// |Δ_source(f ∘ m)(pt) − (Δ_target f)(m(pt))| for a field `f` on the target space.
pub fn commutator_residual<F: Fn(f64, f64) -> f64>(
    m: MapId,
    f: F,
    pt: &ChartPoint,
    h_step: f64,
    p: &ModelParams,
) -> Result<f64> {
    let img = map_apply(m, pt, p)?;
    let pulled = |x: f64, y: f64| {
        let q = ChartPoint {
            space: m.source(),
            x,
            y,
        };
        map_apply(m, &q, p).map(|r| f(r.x, r.y)).unwrap_or(f64::NAN)
    };
    let lhs = laplace_beltrami_apply(pulled, pt, h_step, p)?;
    let rhs = laplace_beltrami_apply(&f, &img, h_step, p)?;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64, y: f64) -> ChartPoint {
        ChartPoint::new(SpaceId::H, x, y).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            hyperbolic_distance(&h(0.3, 2.0), &h(0.3, 2.0)).unwrap(),
            0.0
        );
        let d = hyperbolic_distance(&h(0.0, 1.0), &h(0.0, std::f64::consts::E)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let a = hyperbolic_distance(&h(0.1, 0.4), &h(-2.0, 3.0)).unwrap();
        let b = hyperbolic_distance(&h(-2.0, 3.0), &h(0.1, 0.4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_is_positive_and_decreasing_in_distance() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let v = heat_kernel_h(1.0, 0.25 * k as f64).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn small_time_matches_flat_gaussian() {
        // Near the diagonal the kernel looks like (2πt)^{-1} in the ½Δ convention.
        let t = 1e-4;
        let v = heat_kernel_h(t, 0.0).unwrap();
        let flat = 1.0 / (2.0 * PI * t);
        assert!((v / flat - 1.0).abs() < 1e-3, "{v} vs {flat}");
    }

    #[test]
    fn domain_errors() {
        assert!(heat_kernel_h(0.0, 1.0).is_err());
        assert!(heat_kernel_h(1.0, -1.0).is_err());
        let p = ModelParams::new(0.5, 0.3, 1.0, 1.0, 1.0);
        let s = ChartPoint::new(SpaceId::S, 1.0, 1.0).unwrap();
        assert!(kernel_g(1.0, &s, &s, &p).is_err());
        let p = ModelParams::new(0.5, -0.3, 1.0, 1.0, 1.0);
        let near = ChartPoint::new(SpaceId::S, 1e-4, 1.0).unwrap();
        assert!(kernel_g(1.0, &s, &near, &p).is_err());
    }

    #[test]
    fn constant_field_has_zero_laplacian() {
        let p = ModelParams::new(0.4, -0.3, 1.0, 1.0, 1.0);
        for space in [SpaceId::S, SpaceId::S0, SpaceId::H, SpaceId::U] {
            let pt = ChartPoint::new(space, 1.3, 0.8).unwrap();
            let v = laplace_beltrami_apply(|_, _| 2.5, &pt, 1e-3, &p).unwrap();
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn generator_equals_laplacian_at_beta_zero() {
        let p = ModelParams::new(0.0, -0.45, 1.0, 1.0, 1.0);
        let f = |x: f64, y: f64| (0.7 * x).sin() * (-0.3 * y).exp() + x * y * y;
        let pt = ChartPoint::new(SpaceId::S, 0.9, 1.4).unwrap();
        let a = generator_apply(Generator::Sabr, f, &pt, 1e-3, &p).unwrap();
        let b = laplace_beltrami_apply(f, &pt, 1e-3, &p).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let pt = ChartPoint::new(SpaceId::U, 0.9, 1.4).unwrap();
        let a = generator_apply(Generator::Uncorrelated, f, &pt, 1e-3, &p).unwrap();
        let b = laplace_beltrami_apply(f, &pt, 1e-3, &p).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn stencil_must_stay_inside() {
        let p = ModelParams::new(0.5, 0.0, 1.0, 1.0, 1.0);
        let pt = ChartPoint::new(SpaceId::S, 1e-4, 1.0).unwrap();
        assert!(laplace_beltrami_apply(|x, _| x, &pt, 1e-3, &p).is_err());
    }
}
