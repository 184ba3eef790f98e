use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sabr_boundary::{
    f_joint, f_uncorrelated, series_diagnostics, DensityEvalConfig, Error, WedgeCoordinates,
};

fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Density of the first passage of a unit Brownian motion from a to zero.
fn levy(a: f64, u: f64) -> f64 {
    a / (2.0 * std::f64::consts::PI * u * u * u).sqrt() * (-a * a / (2.0 * u)).exp()
}

#[test]
fn uncorrelated_forms_agree_on_grid() {
    let cfg = DensityEvalConfig::default();
    for &(a1, a2) in &[(1.0, 1.0), (1.0, 2.5), (0.7, 0.3)] {
        let w = WedgeCoordinates::from_starts(0.0, a1, a2).unwrap();
        let grid = log_grid(21, 0.05, 20.0);
        for (i, &s) in grid.iter().enumerate().take(20) {
            for &t in grid[i + 1..].iter().chain(std::iter::once(&(s * 1.001))) {
                let g = f_joint(s, t, &w, &cfg).unwrap();
                let u = f_uncorrelated(s, t, &w, &cfg).unwrap();
                // Independent passage times: the product of two Lévy densities.
                let prod = levy(a1, s) * levy(a2, t);
                let scale = g.abs().max(1e-300);
                assert!((g - u).abs() <= 1e-10 * scale, "({s}, {t}): {g} vs {u}");
                assert!(
                    (g - prod).abs() <= 1e-10 * prod.max(1e-300),
                    "({s}, {t}): {g} vs {prod}"
                );
            }
        }
    }
}

#[test]
fn uncorrelated_point_example() {
    let cfg = DensityEvalConfig::default();
    let w = WedgeCoordinates::from_starts(0.0, 1.0, 1.0).unwrap();
    assert!((w.r0 - 2f64.sqrt()).abs() < 1e-15);
    let g = f_joint(0.25, 1.0, &w, &cfg).unwrap();
    let u = f_uncorrelated(0.25, 1.0, &w, &cfg).unwrap();
    assert!((g - u).abs() <= 1e-10 * g);
    assert!(f_joint(0.5, 1.0, &w, &cfg).unwrap() > 0.0);
}

#[test]
fn nonnegative_on_log_grid() {
    let cfg = DensityEvalConfig::default();
    let grid = log_grid(50, 1e-3, 1e3);
    for &rho in &[-0.8, -0.4, 0.0, 0.4, 0.8] {
        for &(a1, a2) in &[(1.0, 1.0), (1.0, 4.0), (4.0, 1.0)] {
            let w = WedgeCoordinates::from_starts(rho, a1, a2).unwrap();
            for (i, &s) in grid.iter().enumerate() {
                for &t in &grid[i + 1..] {
                    let f = f_joint(s, t, &w, &cfg).unwrap();
                    assert!(f.is_finite());
                    assert!(f >= -1e-12 * (1.0 + f.abs()), "rho {rho} ({s}, {t}): {f}");
                }
            }
        }
    }
}

#[test]
fn ordering_enforced() {
    let cfg = DensityEvalConfig::default();
    let w = WedgeCoordinates::from_starts(0.0, 1.0, 1.0).unwrap();
    assert!(matches!(
        f_joint(1.0, 0.5, &w, &cfg),
        Err(Error::Domain { .. })
    ));
    assert!(matches!(
        f_joint(0.0, 0.5, &w, &cfg),
        Err(Error::Domain { .. })
    ));
    assert!(f_joint(0.5, 0.5, &w, &cfg).is_err());
    let tilted = WedgeCoordinates::from_starts(-0.3, 1.0, 1.0).unwrap();
    assert!(f_uncorrelated(0.5, 1.0, &tilted, &cfg).is_err());
}

#[test]
fn vanishes_on_the_diagonal_when_order_exceeds_one() {
    // ρ < 0 narrows the wedge to α < π/2, so the lowest Bessel order is above one
    // and f ~ (t − s)^{π/(2α) − 1} as t → s.
    let cfg = DensityEvalConfig::default();
    let w = WedgeCoordinates::from_starts(-0.5, 1.0, 1.0).unwrap();
    let power = w.order_step() - 1.0;
    assert!(power > 0.0);
    let a = f_joint(1.0, 1.0 + 1e-8, &w, &cfg).unwrap();
    let b = f_joint(1.0, 1.0 + 1e-10, &w, &cfg).unwrap();
    let slope = (a / b).ln() / 100f64.ln();
    assert!((slope - power).abs() < 1e-3, "slope {slope}, want {power}");
    assert!(b < 1e-4 * f_joint(1.0, 2.0, &w, &cfg).unwrap());
}

#[test]
fn swapped_symmetric_start_is_identical() {
    let cfg = DensityEvalConfig::default();
    let w = WedgeCoordinates::from_starts(0.0, 1.0, 1.0).unwrap();
    let sw = w.swapped();
    for &(s, t) in &[(0.3, 0.9), (1.0, 4.0), (2.0, 2.5)] {
        assert_eq!(
            f_uncorrelated(s, t, &w, &cfg).unwrap(),
            f_uncorrelated(s, t, &sw, &cfg).unwrap()
        );
    }
}

#[test]
fn series_term_counts() {
    let cfg = DensityEvalConfig::default();
    let w = WedgeCoordinates::from_starts(0.4, 1.0, 2.0).unwrap();
    let near = series_diagnostics(1.0, 1.0 + 1e-4, &w, &cfg).unwrap();
    assert!(near.terms_used <= 10, "{near:?}");
    let mut prev = 0;
    for &s in &[1.0, 0.1, 0.01] {
        let d = series_diagnostics(s, 2.0 * s + 1.0, &w, &cfg).unwrap();
        assert!(d.terms_used >= prev && d.terms_used < cfg.n_max, "{d:?}");
        prev = d.terms_used;
    }
    for &(s, t) in &[(0.5, 1.0), (1.0, 3.0), (2.0, 10.0)] {
        let d = series_diagnostics(s, t, &w, &cfg).unwrap();
        assert!(
            d.last_term_magnitude <= cfg.rel_tol * d.value.abs(),
            "({s}, {t}) {d:?}"
        );
    }
}

#[test]
fn truncation_reports_failure() {
    let cfg = DensityEvalConfig {
        n_max: 5,
        n_min: 4,
        ..Default::default()
    };
    let w = WedgeCoordinates::from_starts(0.0, 1.0, 1.0).unwrap();
    assert!(matches!(
        f_joint(1e-3, 10.0, &w, &cfg),
        Err(Error::Truncation { .. })
    ));
}

#[test]
fn denominator_and_exponent_identities() {
    // The two printed denominators and the merged exponent, on random inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.05..3.1);
        let s: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let t = s * (1.0 + 10f64.powf(rng.random_range(-6.0..3.0)));
        let r2: f64 = rng.random_range(0.1..10.0);
        let c2 = alpha.cos().powi(2);
        let lag = t - s * c2;
        let d1 = 2.0 * t - s * (1.0 + (2.0 * alpha).cos());
        let d2 = 2.0 * lag;
        assert!(
            (d1 - d2).abs() <= 1e-13 * d2.abs().max(s * 1e-3),
            "{d1} vs {d2}"
        );

        let c = r2 / (2.0 * s) * (t - s * (2.0 * alpha).cos()) / d1;
        let z = r2 / (2.0 * s) * (t - s) / d1;
        let merged = -r2 * alpha.sin().powi(2) / d2;
        assert!(merged <= 0.0);
        assert!(
            (z - c - merged).abs() <= 1e-12 * c.max(1.0),
            "{}",
            z - c - merged
        );
    }
}
