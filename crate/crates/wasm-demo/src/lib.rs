//! Browser bindings for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; failures at single grid
//! points come back as NaN so one bad cell does not blank a whole plot.

use sabr_boundary::geometry::{
    det, map_apply, map_jacobian, pullback_residual_relative, ChartPoint, MapId,
};
use sabr_boundary::{derive_wedge, f_joint, hitting_probability, DensityEvalConfig, ModelParams};
use wasm_bindgen::prelude::*;

fn js(e: sabr_boundary::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[r0, alpha, theta0, theta0 / alpha]` for the given model.
#[wasm_bindgen]
pub fn wedge(beta: f64, rho: f64, nu: f64, x0: f64, y0: f64) -> Result<Vec<f64>, JsError> {
    let w = derive_wedge(&ModelParams::new(beta, rho, nu, x0, y0)).map_err(js)?;
    Ok(vec![w.r0, w.alpha, w.theta0, w.theta0 / w.alpha])
}

/// Hitting probability on `n` correlations evenly spaced in [−0.95, 0.95],
/// interleaved as `[rho_0, p_0, rho_1, p_1, ...]`.
#[wasm_bindgen]
pub fn probability_vs_rho(
    beta: f64,
    nu: f64,
    x0: f64,
    y0: f64,
    n: usize,
    tol: f64,
) -> Result<Vec<f64>, JsError> {
    ModelParams::new(beta, 0.0, nu, x0, y0)
        .check()
        .map_err(js)?;
    let cfg = DensityEvalConfig::default();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let rho = -0.95 + 1.9 * i as f64 / (n.max(2) - 1) as f64;
        let p = hitting_probability(&ModelParams::new(beta, rho, nu, x0, y0), tol, &cfg)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        out.push(rho);
        out.push(p);
    }
    Ok(out)
}

/// log10 of the joint passage density on an `n`×`n` grid of cell centres over
/// (0, t_max]², row-major in s. Cells with t ≤ s, or zero density, are NaN.
#[wasm_bindgen]
pub fn density_heatmap(
    beta: f64,
    rho: f64,
    nu: f64,
    x0: f64,
    y0: f64,
    n: usize,
    t_max: f64,
) -> Result<Vec<f64>, JsError> {
    let w = derive_wedge(&ModelParams::new(beta, rho, nu, x0, y0)).map_err(js)?;
    let cfg = DensityEvalConfig::default();
    let h = t_max / n as f64;
    let mut out = vec![f64::NAN; n * n];
    for i in 0..n {
        let s = (i as f64 + 0.5) * h;
        for j in (i + 1)..n {
            let t = (j as f64 + 0.5) * h;
            if let Ok(f) = f_joint(s, t, &w, &cfg) {
                if f > 0.0 {
                    out[i * n + j] = f.log10();
                }
            }
        }
    }
    Ok(out)
}

/// `[image_x, image_y, det J, relative pullback residual]` for a named chart map.
#[wasm_bindgen]
pub fn apply_map(name: &str, beta: f64, rho: f64, x: f64, y: f64) -> Result<Vec<f64>, JsError> {
    let m: MapId = name.parse().map_err(js)?;
    let p = ModelParams::new(beta, rho, 1.0, 1.0, 1.0);
    let pt = ChartPoint::new(m.source(), x, y).map_err(js)?;
    let img = map_apply(m, &pt, &p).map_err(js)?;
    let j = map_jacobian(m, &pt, &p).map_err(js)?;
    let r = pullback_residual_relative(m, &pt, &p).map_err(js)?;
    Ok(vec![img.x, img.y, det(&j), r])
}
