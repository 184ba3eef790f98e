use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sabr_boundary::geometry::*;
use sabr_boundary::ModelParams;

struct Sample {
    p: ModelParams,
    x: f64,
    y: f64,
}

fn samples(seed: u64, n: usize, rho_max: f64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Sample {
            p: ModelParams::new(
                rng.random_range(0.0..0.9),
                rng.random_range(-0.9..rho_max),
                1.0,
                1.0,
                1.0,
            ),
            x: rng.random_range(0.2..5.0),
            y: rng.random_range(0.2..5.0),
        })
        .collect()
}

fn allowed(m: MapId, rho: f64) -> bool {
    m != MapId::Phi0Bar || rho <= 0.0
}

fn fd_jacobian(m: MapId, pt: &ChartPoint, p: &ModelParams) -> Mat2 {
    let h = 1e-6;
    let mut out = [[0.0; 2]; 2];
    for c in 0..2 {
        let shift = |d: f64| {
            let mut q = *pt;
            if c == 0 {
                q.x += d;
            } else {
                q.y += d;
            }
            map_apply(m, &q, p).unwrap()
        };
        let (a, b) = (shift(h), shift(-h));
        out[0][c] = (a.x - b.x) / (2.0 * h);
        out[1][c] = (a.y - b.y) / (2.0 * h);
    }
    out
}

#[test]
fn pullback_residuals_vanish() {
    for s in samples(11, 100, 0.9) {
        for m in MapId::ALL {
            if !allowed(m, s.p.rho) {
                continue;
            }
            let pt = ChartPoint::new(m.source(), s.x, s.y).unwrap();
            let r = pullback_residual_relative(m, &pt, &s.p).unwrap();
            assert!(r <= 1e-10, "{m} at ({}, {}) {:?}: {r:e}", s.x, s.y, s.p);
        }
    }
}

#[test]
fn diagram_commutes() {
    for s in samples(12, 100, 0.0) {
        let pt = ChartPoint::new(SpaceId::S, s.x, s.y).unwrap();
        let r = diagram_residual(&pt, &s.p).unwrap();
        assert!(r <= 1e-12, "{:?} ({}, {}): {r:e}", s.p, s.x, s.y);
    }
    // Positive correlation: only the squares avoiding phi0_bar.
    for s in samples(13, 50, 0.9) {
        let pt = ChartPoint::new(SpaceId::S, s.x, s.y).unwrap();
        assert!(diagram_residual(&pt, &s.p).unwrap() <= 1e-12);
    }
}

#[test]
fn jacobians_match_finite_differences() {
    for s in samples(14, 100, 0.9) {
        for m in MapId::ALL {
            if !allowed(m, s.p.rho) {
                continue;
            }
            let pt = ChartPoint::new(m.source(), s.x, s.y).unwrap();
            let j = map_jacobian(m, &pt, &s.p).unwrap();
            let fd = fd_jacobian(m, &pt, &s.p);
            let scale = j.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            for r in 0..2 {
                for c in 0..2 {
                    let e = (j[r][c] - fd[r][c]).abs() / scale;
                    assert!(e <= 1e-6, "{m} [{r}][{c}] {:?}: {e:e}", s.p);
                }
            }
        }
    }
}

#[test]
fn inverse_pairs() {
    for s in samples(15, 100, 0.9) {
        let pt = ChartPoint::new(SpaceId::S, s.x, s.y).unwrap();
        let back = map_apply(
            MapId::Chi,
            &map_apply(MapId::Phi0Hat, &pt, &s.p).unwrap(),
            &s.p,
        )
        .unwrap();
        assert_eq!(back.space, SpaceId::S);
        assert!((back.x - pt.x).abs() <= 1e-12 * pt.x);
        assert_eq!(back.y, pt.y);

        let h = ChartPoint::new(SpaceId::H, s.x, s.y).unwrap();
        let u = map_apply(MapId::ChiBar, &h, &s.p).unwrap();
        let back = map_apply(MapId::Varphi0Tilde, &u, &s.p).unwrap();
        assert!((back.x - h.x).abs() <= 1e-12 * h.x);

        let z = ChartPoint::new(SpaceId::S0, s.x - 2.5, s.y).unwrap();
        let img = map_apply(MapId::Phi0Tilde, &z, &s.p).unwrap();
        let back = phi0_tilde_inverse(&img, &s.p).unwrap();
        assert!((back.x - z.x).abs() <= 1e-14 * z.x.abs().max(z.y));
    }
}

#[test]
fn phi0_bar_determinant_at_beta_half() {
    for s in samples(16, 100, 0.0) {
        let p = ModelParams { beta: 0.5, ..s.p };
        let pt = ChartPoint::new(SpaceId::S, s.x, s.y).unwrap();
        let d = det(&map_jacobian(MapId::Phi0Bar, &pt, &p).unwrap());
        let rb2 = 1.0 - p.rho * p.rho;
        let want = (1.0 - p.rho * s.y / (2.0 * s.x.sqrt())) / rb2;
        assert!((d - want).abs() <= 1e-12 * want, "{d} vs {want}");
    }
}

#[test]
fn phi0_tilde_determinant_is_constant() {
    for s in samples(17, 20, 0.9) {
        let pt = ChartPoint::new(SpaceId::S0, s.x, s.y).unwrap();
        let d = det(&map_jacobian(MapId::Phi0Tilde, &pt, &s.p).unwrap());
        assert!((d - 1.0 / s.p.rho_bar()).abs() <= 1e-14 / s.p.rho_bar());
    }
}

#[test]
fn metrics_are_positive_definite() {
    for s in samples(18, 100, 0.9) {
        for space in [SpaceId::S, SpaceId::S0, SpaceId::H, SpaceId::U] {
            let g = metric_tensor(&ChartPoint::new(space, s.x, s.y).unwrap(), &s.p).unwrap();
            assert_eq!(g[0][1], g[1][0]);
            assert!(g[0][0] > 0.0 && det(&g) > 0.0);
        }
    }
}
