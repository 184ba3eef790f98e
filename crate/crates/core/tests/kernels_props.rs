use std::f64::consts::PI;

use sabr_boundary::geometry::{map_apply, ChartPoint, MapId, SpaceId};
use sabr_boundary::kernels::*;
use sabr_boundary::quad::TanhSinh;
use sabr_boundary::ModelParams;

fn rule(tol: f64) -> TanhSinh {
    TanhSinh {
        abs_tol: tol,
        rel_tol: tol,
        min_level: 4,
        max_level: 8,
    }
}

/// ∫_0^R p(t, r) 2π sinh r dr, split where the radial profile bends.
fn radial_mass(t: f64) -> f64 {
    let cuts = [0.0, 0.5, 2.0, 6.0, 20.0];
    cuts.windows(2)
        .map(|w| {
            rule(1e-12)
                .integrate(w[0], w[1], |r, _, _| {
                    heat_kernel_h(t, r).unwrap() * 2.0 * PI * r.sinh()
                })
                .value
        })
        .sum()
}

/// Trapezoid sum over [−l, l] with halving steps; the sinh substitutions in
/// [`plane_integral`] make the integrands decay double-exponentially.
fn trapezoid<F: FnMut(f64) -> f64>(mut f: F, l: f64, tol: f64) -> f64 {
    let mut h = 0.5;
    let n = (l / h) as i64;
    let mut sum: f64 = (-n..=n).map(|k| f(k as f64 * h)).sum();
    let mut prev = sum * h;
    for _ in 0..6 {
        h *= 0.5;
        let n = (l / h) as i64;
        sum += (-n..=n)
            .filter(|k| k % 2 != 0)
            .map(|k| f(k as f64 * h))
            .sum::<f64>();
        let cur = sum * h;
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// ∫∫ g dx dy with x = cx + sx·sinh ξ, y = cy·exp(sy·sinh ζ), ξ, ζ ∈ [−l, l].
fn plane_integral<G: Fn(f64, f64) -> f64>(g: G, c: (f64, f64), s: (f64, f64), l: f64) -> f64 {
    trapezoid(
        |zeta| {
            let y = c.1 * (s.1 * zeta.sinh()).exp();
            let dy = y * s.1 * zeta.cosh();
            let inner = trapezoid(|xi| g(c.0 + s.0 * xi.sinh(), y) * s.0 * xi.cosh(), l, 1e-9);
            inner * dy
        },
        l,
        1e-7,
    )
}

#[test]
fn hyperbolic_kernel_normalized() {
    for &t in &[0.25, 1.0, 4.0] {
        let m = radial_mass(t);
        assert!((m - 1.0).abs() <= 1e-3, "t = {t}: mass {m}");
    }
}

#[test]
fn hyperbolic_kernel_heat_equation() {
    let z0 = (0.2, 1.5);
    for &t in &[0.25, 1.0, 4.0] {
        for &(x, y) in &[(0.9, 1.2), (-0.5, 2.5), (0.2, 0.6), (1.7, 3.0)] {
            let k = |t: f64, x: f64, y: f64| {
                let src = ChartPoint::new(SpaceId::H, x, y).unwrap();
                let dst = ChartPoint::new(SpaceId::H, z0.0, z0.1).unwrap();
                kernel_h(t, &src, &dst).unwrap().value
            };
            let dt = 1e-4 * t;
            let lhs = (k(t + dt, x, y) - k(t - dt, x, y)) / (2.0 * dt);
            let pt = ChartPoint::new(SpaceId::H, x, y).unwrap();
            let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0);
            let rhs = 0.5 * laplace_beltrami_apply(|a, b| k(t, a, b), &pt, 1e-3, &p).unwrap();
            let rel = (lhs - rhs).abs() / lhs.abs();
            assert!(rel <= 1e-4, "t {t} ({x}, {y}): {lhs} vs {rhs}, rel {rel:e}");
        }
    }
}

#[test]
fn g0_kernel_heat_equation_in_source() {
    let p = ModelParams::new(0.0, -0.5, 1.0, 1.0, 1.0);
    let dst = ChartPoint::new(SpaceId::S0, 0.4, 1.1).unwrap();
    for &t in &[0.25, 1.0, 4.0] {
        for &(x, y) in &[(0.9, 1.2), (-0.5, 2.5), (1.4, 0.7)] {
            let k = |t: f64, x: f64, y: f64| {
                let src = ChartPoint::new(SpaceId::S0, x, y).unwrap();
                kernel_g0(t, &src, &dst, &p).unwrap().value
            };
            let dt = 1e-4 * t;
            let lhs = (k(t + dt, x, y) - k(t - dt, x, y)) / (2.0 * dt);
            let pt = ChartPoint::new(SpaceId::S0, x, y).unwrap();
            let rhs = 0.5 * laplace_beltrami_apply(|a, b| k(t, a, b), &pt, 1e-3, &p).unwrap();
            let rel = (lhs - rhs).abs() / lhs.abs();
            assert!(rel <= 1e-3, "t {t} ({x}, {y}): {lhs} vs {rhs}, rel {rel:e}");
        }
    }
}

#[test]
fn g_kernel_heat_equation_in_source() {
    let p = ModelParams::new(0.5, -0.4, 1.0, 1.0, 1.0);
    let dst = ChartPoint::new(SpaceId::S, 1.2, 0.9).unwrap();
    for &t in &[0.25, 1.0] {
        for &(x, y) in &[(0.9, 1.2), (2.0, 0.5), (1.4, 1.7)] {
            let k = |t: f64, x: f64, y: f64| {
                let src = ChartPoint::new(SpaceId::S, x, y).unwrap();
                kernel_g(t, &src, &dst, &p).unwrap().value
            };
            let dt = 1e-4 * t;
            let lhs = (k(t + dt, x, y) - k(t - dt, x, y)) / (2.0 * dt);
            let pt = ChartPoint::new(SpaceId::S, x, y).unwrap();
            let rhs = 0.5 * laplace_beltrami_apply(|a, b| k(t, a, b), &pt, 1e-3, &p).unwrap();
            let rel = (lhs - rhs).abs() / lhs.abs();
            assert!(rel <= 1e-3, "t {t} ({x}, {y}): rel {rel:e}");
        }
    }
}

#[test]
fn g0_kernel_reduces_to_h_at_zero_correlation() {
    let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0);
    let a = ChartPoint::new(SpaceId::S0, 0.3, 1.0).unwrap();
    let b = ChartPoint::new(SpaceId::S0, -0.2, 1.7).unwrap();
    let k0 = kernel_g0(1.0, &a, &b, &p).unwrap().value;
    let ha = ChartPoint {
        space: SpaceId::H,
        ..a
    };
    let hb = ChartPoint {
        space: SpaceId::H,
        ..b
    };
    assert_eq!(k0, kernel_h(1.0, &ha, &hb).unwrap().value);
}

#[test]
fn g0_kernel_integrates_to_one() {
    let p = ModelParams::new(0.0, -0.5, 1.0, 1.0, 1.0);
    let src = ChartPoint::new(SpaceId::S0, 0.3, 1.0).unwrap();
    for &t in &[0.25, 1.0, 4.0] {
        let mass = plane_integral(
            |x, y| {
                let dst = ChartPoint::new(SpaceId::S0, x, y).unwrap();
                kernel_g0(t, &src, &dst, &p).unwrap().value
            },
            (src.x, src.y),
            (1.0, 1.0),
            6.0,
        );
        assert!((mass - 1.0).abs() <= 2e-3, "t {t}: {mass}");
        assert!(mass <= 1.0 + 2e-3);
    }
}

#[test]
fn g_kernel_mass_is_at_most_one() {
    let p = ModelParams::new(0.5, -0.3, 1.0, 1.0, 1.0);
    let src = ChartPoint::new(SpaceId::S, 1.0, 0.5).unwrap();
    for &t in &[0.25, 1.0, 4.0] {
        let mass = plane_integral(
            |x, y| {
                let dst = ChartPoint::new(SpaceId::S, x, y).unwrap();
                match kernel_g_guarded(t, &src, &dst, &p, 0.0) {
                    Ok(k) => {
                        assert!(k.value >= 0.0);
                        k.value
                    }
                    Err(_) => 0.0,
                }
            },
            (src.x, src.y),
            (0.5, 1.0),
            6.0,
        );
        assert!(mass <= 1.0 + 2e-3 && mass > 0.0, "t {t}: {mass}");
    }
}

#[test]
fn g_kernel_matches_direct_route() {
    // Through U or straight to H: x^{−β}/ρ̄ · K^h at the phi00_tilde images.
    for &(beta, rho) in &[(0.0, -0.4), (0.5, -0.2), (0.8, -0.7), (0.3, 0.0)] {
        let p = ModelParams::new(beta, rho, 1.0, 1.0, 1.0);
        let src = ChartPoint::new(SpaceId::S, 1.1, 0.8).unwrap();
        for &(x, y) in &[(0.7, 1.0), (2.0, 0.3), (1.05, 0.81)] {
            let dst = ChartPoint::new(SpaceId::S, x, y).unwrap();
            let via_u = kernel_g(0.7, &src, &dst, &p).unwrap().value;
            let a = map_apply(MapId::Phi00Tilde, &src, &p).unwrap();
            let b = map_apply(MapId::Phi00Tilde, &dst, &p).unwrap();
            let direct = kernel_h(0.7, &a, &b).unwrap().value * x.powf(-beta) / p.rho_bar();
            assert!(
                (via_u - direct).abs() <= 1e-12 * direct,
                "{via_u} vs {direct}"
            );
            if beta == 0.0 {
                let s0 = |q: &ChartPoint| ChartPoint {
                    space: SpaceId::S0,
                    ..*q
                };
                let k0 = kernel_g0(0.7, &s0(&src), &s0(&dst), &p).unwrap().value;
                assert!((via_u - k0).abs() <= 1e-12 * k0);
            }
        }
    }
}

#[test]
fn small_time_concentration() {
    let p = ModelParams::new(0.0, -0.5, 1.0, 1.0, 1.0);
    let src = ChartPoint::new(SpaceId::S0, 0.3, 1.2).unwrap();
    let f = |x: f64, y: f64| (x - 0.1).cos() * (-0.5 * y).exp();
    let t = 1e-3;
    let got = plane_integral(
        |x, y| {
            let dst = ChartPoint::new(SpaceId::S0, x, y).unwrap();
            kernel_g0(t, &src, &dst, &p).unwrap().value * f(x, y)
        },
        (src.x, src.y),
        (0.05, 0.05),
        5.0,
    );
    let want = f(src.x, src.y);
    assert!((got - want).abs() <= 1e-2 * want.abs(), "{got} vs {want}");
}

#[test]
fn laplacian_commutes_with_each_map() {
    let f = |x: f64, y: f64| (0.7 * x + 0.3).sin() * (-0.4 * y).exp() + 0.1 * x * x * y;
    for &(beta, rho) in &[(0.0, -0.5), (0.3, -0.2), (0.5, 0.0), (0.7, -0.8)] {
        let p = ModelParams::new(beta, rho, 1.0, 1.0, 1.0);
        for m in MapId::ALL {
            let pt = ChartPoint::new(m.source(), 1.3, 0.9).unwrap();
            let img = map_apply(m, &pt, &p).unwrap();
            let scale = laplace_beltrami_apply(f, &img, 1e-3, &p)
                .unwrap()
                .abs()
                .max(1.0);
            let r = commutator_residual(m, f, &pt, 1e-3, &p).unwrap();
            assert!(r <= 1e-4 * scale, "{m} beta {beta} rho {rho}: {r:e}");
        }
    }
}
