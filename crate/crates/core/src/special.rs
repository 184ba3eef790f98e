//! Log-gamma and the exponentially scaled modified Bessel function e^{-z} I_ν(z)
//! for real order ν ≥ 0 and real argument z ≥ 0.
//!
//! The density multiplies I_ν(z) by exponentials that are individually huge
//! or tiny, so only the scaled form is ever materialized. Large orders use
//! Debye's uniform expansion. Otherwise the ascending series, summed outward
//! from its largest term, covers z at or below the switch point and Hankel's
//! large-argument expansion covers z above it.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// ζ(k) − 1 for k = 2, 3, ….
const ZETA_MINUS_ONE: [f64; 40] = [
    6.4493406684822644e-1,
    2.0205690315959429e-1,
    8.2323233711138192e-2,
    3.6927755143369926e-2,
    1.734306198444914e-2,
    8.3492773819228268e-3,
    4.0773561979443394e-3,
    2.0083928260822144e-3,
    9.9457512781808534e-4,
    4.9418860411946456e-4,
    2.460865533080483e-4,
    1.2271334757848915e-4,
    6.1248135058704829e-5,
    3.0588236307020494e-5,
    1.5282259408651872e-5,
    7.6371976378997623e-6,
    3.8172932649998399e-6,
    1.9082127165539389e-6,
    9.5396203387279611e-7,
    4.7693298678780646e-7,
    2.3845050272773299e-7,
    1.1921992596531107e-7,
    5.960818905125948e-8,
    2.980350351465228e-8,
    1.4901554828365041e-8,
    7.4507117898354295e-9,
    3.7253340247884571e-9,
    1.862659723513049e-9,
    9.3132743241966818e-10,
    4.6566290650337841e-10,
    2.3283118336765055e-10,
    1.164155017270052e-10,
    5.8207720879027009e-11,
    2.9103850444970997e-11,
    1.4551921891041984e-11,
    7.275959835057481e-12,
    3.6379795473786512e-12,
    1.8189896503070659e-12,
    9.0949478402638893e-13,
    4.547473783042154e-13,
];

/// B_{2k} / (2k (2k − 1)) for the Stirling tail, k = 1..=8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// ln Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(
            "x",
            format!("log_gamma needs x > 0, got {x}"),
        ));
    }
    Ok(ln_gamma_pos(x))
}

/// ln Γ(1 + eps) for |eps| ≤ 1/2 from the zeta-function Taylor series.
fn ln_gamma_1p(eps: f64) -> f64 {
    let mut acc = 0.0;
    let mut pow = -eps;
    for (i, z) in ZETA_MINUS_ONE.iter().enumerate() {
        pow *= -eps;
        let k = (i + 2) as f64;
        let term = z * pow / k;
        acc += term;
        if term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
    }
    // The ζ(k) = 1 part of the series sums to eps − ln(1 + eps).
    acc + (1.0 - EULER_GAMMA) * eps - eps.ln_1p()
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    if x <= 1.5 {
        return ln_gamma_1p(x - 1.0);
    }
    if x <= 2.5 {
        let eps = x - 2.0;
        return ln_gamma_1p(eps) + eps.ln_1p();
    }
    if x < 12.0 {
        // Step down into [1.5, 2.5] and add back the logged product.
        let mut y = x;
        let mut prod = 1.0;
        while y > 2.5 {
            y -= 1.0;
            prod *= y;
        }
        return ln_gamma_pos(y) + prod.ln();
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
}

/// A validated non-negative, finite Bessel order.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu >= 0.0 {
            Ok(Self(nu))
        } else {
            Err(Error::domain(
                "nu",
                format!("Bessel order must be finite and >= 0, got {nu}"),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Orders from here on use the uniform expansion for every argument.
pub const DEBYE_MIN_ORDER: f64 = 20.0;

const DEBYE_TERMS: usize = 14;

/// Arguments above this value use the large-argument expansion (orders
/// below [`DEBYE_MIN_ORDER`]).
pub fn switch_point(nu: f64) -> f64 {
    (0.5 * nu * nu).max(30.0)
}

/// e^{-z} I_ν(z).
pub fn bessel_i_scaled(order: BesselOrder, z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::domain(
            "z",
            format!("Bessel argument must be finite and >= 0, got {z}"),
        ));
    }
    Ok(i_scaled(order.0, z))
}

/// Unchecked core used by the density hot loop.
pub(crate) fn i_scaled(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if nu >= DEBYE_MIN_ORDER {
        i_scaled_debye(nu, z)
    } else if z > switch_point(nu) {
        i_scaled_hankel(nu, z)
    } else {
        i_scaled_series(nu, z)
    }
}

/// Ascending series Σ_k (z/2)^{2k+ν} / (k! Γ(k+ν+1)) times e^{-z}, valid for
/// every z but only used at or below [`switch_point`].
pub fn bessel_i_scaled_series(order: BesselOrder, z: f64) -> f64 {
    if z == 0.0 {
        return if order.0 == 0.0 { 1.0 } else { 0.0 };
    }
    i_scaled_series(order.0, z)
}

/// Hankel expansion (2πz)^{-1/2} Σ_k (−1)^k a_k(ν) / z^k; accurate for z
/// well above ν²/2.
pub fn bessel_i_scaled_asymptotic(order: BesselOrder, z: f64) -> f64 {
    i_scaled_hankel(order.0, z)
}

/// Debye's expansion e^{ν(η − x)} / (√(2πν)(1 + x²)^{1/4}) Σ_k u_k(p)/ν^k
/// with x = z/ν and p = (1 + x²)^{−1/2}; uniform in z for large ν.
pub fn bessel_i_scaled_uniform(order: BesselOrder, z: f64) -> f64 {
    if z == 0.0 {
        return if order.0 == 0.0 { 1.0 } else { 0.0 };
    }
    i_scaled_debye(order.0, z)
}

/// Coefficients of u_k(p) in powers of p, k < [`DEBYE_TERMS`], from
/// u_{k+1} = ½p²(1 − p²)u_k' + ⅛∫₀^p (1 − 5t²)u_k dt.
fn debye_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &out[k];
            let mut next = vec![0.0; u.len() + 3];
            for (j, &c) in u.iter().enumerate().skip(1) {
                // ½p²(1 − p²)·j c p^{j−1}
                next[j + 1] += 0.5 * j as f64 * c;
                next[j + 3] -= 0.5 * j as f64 * c;
            }
            for (j, &c) in u.iter().enumerate() {
                let j = j as f64;
                next[j as usize + 1] += c / (8.0 * (j + 1.0));
                next[j as usize + 3] -= 5.0 * c / (8.0 * (j + 3.0));
            }
            out.push(next);
        }
        out
    })
}

fn i_scaled_debye(nu: f64, z: f64) -> f64 {
    let x = z / nu;
    let root = x.hypot(1.0);
    let p = 1.0 / root;
    // η − x with √(1+x²) − x written without cancellation.
    let eta_minus_x = 1.0 / (root + x) + (x / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for u in debye_polys() {
        let poly = u.iter().rev().fold(0.0, |acc, &c| acc * p + c);
        sum += poly * scale;
        scale /= nu;
    }
    (nu * eta_minus_x).exp() * sum * (p.sqrt() / (2.0 * std::f64::consts::PI * nu).sqrt())
}

fn i_scaled_series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    // Index of the largest term: (k+1)(k+1+ν) ≈ q.
    let b = nu + 2.0;
    let disc = b * b - 4.0 * (nu + 1.0 - q);
    let peak = if disc > 0.0 {
        ((-b + disc.sqrt()) * 0.5).max(0.0).ceil()
    } else {
        0.0
    };
    let log_peak = log_series_term(peak, nu, z);

    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = peak;
    loop {
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        k += 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    term = 1.0;
    k = peak;
    while k > 0.0 {
        term *= k * (k + nu) / q;
        sum += term;
        k -= 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    log_peak.exp() * sum
}

/// ln of the k-th series term times e^{-z}. For large k the Stirling forms
/// of both gamma functions are expanded so that the O(z ln z) pieces cancel
/// analytically instead of in floating point.
fn log_series_term(k: f64, nu: f64, z: f64) -> f64 {
    if k < 12.0 {
        return (2.0 * k + nu) * (0.5 * z).ln()
            - ln_gamma_pos(k + 1.0)
            - ln_gamma_pos(k + nu + 1.0)
            - z;
    }
    let m = k + nu;
    let part = |n: f64| n * ((z - 2.0 * n) / (2.0 * n)).ln_1p() - 0.5 * n.ln() - stirling_tail(n);
    part(k) + part(m) + ((k + m) - z) - 2.0 * HALF_LN_2PI
}

/// ln Γ(n + 1) − ((n + 1/2) ln n − n + ln √(2π)), for n ≥ 12.
fn stirling_tail(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    let mut p = inv;
    for c in STIRLING {
        tail += c * p;
        p *= inv2;
    }
    tail
}

fn i_scaled_hankel(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * z);
        let mag = term.abs();
        if mag > prev {
            break;
        }
        sum += term;
        if mag < 1e-17 * sum.abs() {
            break;
        }
        prev = mag;
    }
    sum / (2.0 * std::f64::consts::PI * z).sqrt()
}
