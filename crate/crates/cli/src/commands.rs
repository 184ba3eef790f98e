use std::path::Path;

use sabr_boundary::geometry::{
    det, diagram_residual, map_apply, map_jacobian, pullback_residual, pullback_residual_relative,
    ChartPoint, MapId, SpaceId,
};
use sabr_boundary::kernels::{kernel_g, kernel_g0, kernel_h};
use sabr_boundary::montecarlo::{estimate_first_passage, simulate_sabr, McConfig, Scheme};
use sabr_boundary::quadrature::QuadratureResult;
use sabr_boundary::{
    cumulative, derive_wedge, hitting_probability, series_diagnostics, sweep, DensityEvalConfig,
    Error, ModelParams,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{fmt_f64, object};
use crate::{
    Command, KernelSpace, ModelArgs, SeriesArgs, EXIT_IO, EXIT_NONCONVERGENCE, EXIT_VALIDATION,
};

pub enum Payload {
    Value(Option<Value>),
    /// CSV text written as-is; used by `sweep`.
    Table(String),
}

pub struct Run {
    pub command: &'static str,
    pub params: Value,
    pub payload: Payload,
    /// Record body when the payload is a table.
    pub summary: Option<Value>,
    pub error_estimate: Option<f64>,
    pub error: Option<String>,
    pub code: i32,
    pub seed: Option<u64>,
}

impl Run {
    fn new(command: &'static str, params: Value) -> Self {
        Self {
            command,
            params,
            payload: Payload::Value(None),
            summary: None,
            error_estimate: None,
            error: None,
            code: 0,
            seed: None,
        }
    }

    fn ok(mut self, v: Value) -> Self {
        self.payload = Payload::Value(Some(v));
        self
    }

    fn fail(mut self, e: &Error) -> Self {
        self.code = exit_code(e);
        self.error = Some(e.to_string());
        if let Error::NonConvergence(partial) = e {
            self.error_estimate = Some(partial.abs_err);
            self.payload = Payload::Value(Some(object(partial.as_ref())));
        }
        self
    }

    pub fn table_written(&self) -> bool {
        matches!(self.payload, Payload::Table(_))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Truncation { .. } | Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn params_of(m: &ModelArgs) -> ModelParams {
    ModelParams::new(m.beta, m.rho, m.nu, m.x0, m.y0)
}

fn density_cfg(s: &SeriesArgs) -> DensityEvalConfig {
    DensityEvalConfig {
        rel_tol: s.series_rel_tol,
        n_max: s.n_max,
        ..Default::default()
    }
}

/// Flag echo: every flag of the run under its own name.
fn echo(parts: &[Value]) -> Value {
    let mut out = serde_json::Map::new();
    for p in parts {
        if let Value::Object(m) = p {
            out.extend(m.clone());
        }
    }
    Value::Object(out)
}

fn quadrature_run(run: Run, r: sabr_boundary::Result<QuadratureResult>) -> Run {
    match r {
        Ok(q) => {
            let mut run = run.ok(object(&q));
            run.error_estimate = Some(q.abs_err);
            run
        }
        Err(e) => run.fail(&e),
    }
}

pub fn run(cmd: &Command) -> Run {
    match cmd {
        Command::Prob { model, tol, series } => {
            let run = Run::new(
                "prob",
                echo(&[object(model), json!({ "tol": tol }), object(series)]),
            );
            quadrature_run(
                run,
                hitting_probability(&params_of(model), *tol, &density_cfg(series)),
            )
        }
        Command::Cumulative {
            model,
            horizon,
            tol,
            series,
        } => {
            let run = Run::new(
                "cumulative",
                echo(&[
                    object(model),
                    json!({ "T": horizon, "tol": tol }),
                    object(series),
                ]),
            );
            quadrature_run(
                run,
                cumulative(&params_of(model), *horizon, *tol, &density_cfg(series)),
            )
        }
        Command::Density {
            model,
            s,
            t,
            series,
        } => {
            let run = Run::new(
                "density",
                echo(&[object(model), json!({ "s": s, "t": t }), object(series)]),
            );
            let res = derive_wedge(&params_of(model))
                .and_then(|w| series_diagnostics(*s, *t, &w, &density_cfg(series)).map(|d| (w, d)));
            match res {
                Ok((w, d)) => {
                    let mut run = run.ok(json!({
                        "value": d.value,
                        "terms_used": d.terms_used,
                        "last_term_magnitude": d.last_term_magnitude,
                        "wedge": object(&w),
                    }));
                    run.error_estimate = Some(d.last_term_magnitude);
                    run
                }
                Err(e) => run.fail(&e),
            }
        }
        Command::Sweep {
            grid_file,
            tol,
            series,
        } => run_sweep(grid_file, *tol, series),
        Command::Map {
            map,
            x,
            y,
            model,
            check,
        } => {
            let run = Run::new(
                "map",
                echo(&[
                    json!({ "map": map, "x": x, "y": y, "check": check }),
                    object(model),
                ]),
            );
            match map_result(map, *x, *y, &params_of(model), *check) {
                Ok(v) => run.ok(v),
                Err(e) => run.fail(&e),
            }
        }
        Command::Kernel {
            space,
            t,
            x1,
            y1,
            x2,
            y2,
            model,
        } => {
            let run = Run::new(
                "kernel",
                echo(&[
                    json!({ "space": space, "t": t, "x1": x1, "y1": y1, "x2": x2, "y2": y2 }),
                    object(model),
                ]),
            );
            let p = params_of(model);
            let res = (|| {
                let chart = match space {
                    KernelSpace::H => SpaceId::H,
                    KernelSpace::G0 => SpaceId::S0,
                    KernelSpace::G => SpaceId::S,
                };
                let a = ChartPoint::new(chart, *x1, *y1)?;
                let b = ChartPoint::new(chart, *x2, *y2)?;
                match space {
                    KernelSpace::H => kernel_h(*t, &a, &b),
                    KernelSpace::G0 => kernel_g0(*t, &a, &b, &p),
                    KernelSpace::G => kernel_g(*t, &a, &b, &p),
                }
            })();
            match res {
                Ok(k) => run.ok(object(&k)),
                Err(e) => run.fail(&e),
            }
        }
        Command::Mc {
            scheme,
            paths,
            dt,
            tmax,
            seed,
            workers,
            model,
        } => {
            let mut run = Run::new(
                "mc",
                echo(&[
                    json!({
                        "scheme": scheme, "paths": paths, "dt": dt, "tmax": tmax,
                        "seed": seed, "workers": workers,
                    }),
                    object(model),
                ]),
            );
            run.seed = Some(*seed);
            match run_mc(
                scheme,
                *paths,
                *dt,
                *tmax,
                *seed,
                *workers,
                &params_of(model),
            ) {
                Ok(v) => {
                    let se = v.get("std_err").and_then(Value::as_f64);
                    let mut run = run.ok(v);
                    run.error_estimate = se;
                    run
                }
                Err(e) => run.fail(&e),
            }
        }
    }
}

fn map_result(
    name: &str,
    x: f64,
    y: f64,
    p: &ModelParams,
    check: bool,
) -> sabr_boundary::Result<Value> {
    let m: MapId = name.parse()?;
    let pt = ChartPoint::new(m.source(), x, y)?;
    let img = map_apply(m, &pt, p)?;
    let jac = map_jacobian(m, &pt, p)?;
    let mut v = json!({
        "map": m.name(),
        "source": object(&pt),
        "image": object(&img),
        "jacobian": jac,
        "det": det(&jac),
    });
    if check {
        v["pullback_residual"] = json!(pullback_residual(m, &pt, p)?);
        v["pullback_residual_relative"] = json!(pullback_residual_relative(m, &pt, p)?);
        // The diagram starts on S; other sources have no square to close.
        v["diagram_residual"] = if pt.space == SpaceId::S {
            json!(diagram_residual(&pt, p)?)
        } else {
            Value::Null
        };
    }
    Ok(v)
}

fn run_mc(
    scheme: &str,
    paths: u64,
    dt: Option<f64>,
    tmax: Option<f64>,
    seed: u64,
    workers: usize,
    p: &ModelParams,
) -> sabr_boundary::Result<Value> {
    let scheme: Scheme = scheme.parse()?;
    match scheme {
        Scheme::BridgeBm | Scheme::NaiveBm => {
            let w = derive_wedge(p)?;
            let base = McConfig::for_wedge(&w, paths, seed);
            let cfg = McConfig {
                dt: dt.unwrap_or(base.dt),
                t_max: tmax.unwrap_or(base.t_max),
                scheme,
                workers,
                ..base
            };
            let est = estimate_first_passage(&w, &cfg)?;
            let mut v = object(&est);
            v["config"] = object(&cfg);
            v["wedge"] = object(&w);
            Ok(v)
        }
        _ => {
            let cfg = McConfig {
                n_paths: paths,
                dt: dt.unwrap_or(1e-3),
                t_max: tmax.unwrap_or(1.0),
                seed,
                scheme,
                workers,
            };
            let est = simulate_sabr(p, &cfg)?;
            let mut v = object(&est);
            v["config"] = object(&cfg);
            Ok(v)
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct GridRow {
    beta: f64,
    rho: f64,
    nu: f64,
    x0: f64,
    y0: f64,
}

fn run_sweep(grid_file: &Path, tol: f64, series: &SeriesArgs) -> Run {
    let mut run = Run::new(
        "sweep",
        echo(&[
            json!({ "grid-file": grid_file.display().to_string(), "tol": tol }),
            object(series),
        ]),
    );
    let mut reader = match csv::Reader::from_path(grid_file) {
        Ok(r) => r,
        Err(e) => {
            run.code = EXIT_IO;
            run.error = Some(format!("cannot read {}: {e}", grid_file.display()));
            return run;
        }
    };
    let mut grid = Vec::new();
    for (i, row) in reader.deserialize::<GridRow>().enumerate() {
        match row {
            Ok(r) => grid.push(ModelParams::new(r.beta, r.rho, r.nu, r.x0, r.y0)),
            Err(e) => {
                run.code = if e.is_io_error() {
                    EXIT_IO
                } else {
                    EXIT_VALIDATION
                };
                run.error = Some(format!("grid row {}: {e}", i + 1));
                return run;
            }
        }
    }

    let entries = sweep(&grid, tol, &density_cfg(series));
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "beta",
        "rho",
        "nu",
        "x0",
        "y0",
        "prob",
        "abs_err",
        "converged",
        "error",
    ];
    let mut failed = 0usize;
    let mut worst = 0;
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for e in &entries {
        let p = e.params;
        let mut row = vec![
            fmt_f64(p.beta),
            fmt_f64(p.rho),
            fmt_f64(p.nu),
            fmt_f64(p.x0),
            fmt_f64(p.y0),
        ];
        match &e.result {
            Ok(q) => row.extend([
                fmt_f64(q.value),
                fmt_f64(q.abs_err),
                "true".into(),
                String::new(),
            ]),
            Err(err) => {
                failed += 1;
                let code = exit_code(err);
                worst = if worst == EXIT_NONCONVERGENCE {
                    worst
                } else {
                    code
                };
                match err {
                    Error::NonConvergence(q) => {
                        row.extend([fmt_f64(q.value), fmt_f64(q.abs_err), "false".into()])
                    }
                    _ => row.extend([String::new(), String::new(), "false".into()]),
                }
                row.push(err.to_string());
            }
        }
        rows.push(row);
    }
    for r in &rows {
        if let Err(e) = w.write_record(r) {
            run.code = EXIT_IO;
            run.error = Some(e.to_string());
            return run;
        }
    }
    let table = match w.into_inner() {
        Ok(b) => String::from_utf8(b).expect("csv writes UTF-8"),
        Err(e) => {
            run.code = EXIT_IO;
            run.error = Some(e.to_string());
            return run;
        }
    };
    run.code = worst;
    if failed > 0 {
        run.error = Some(format!("{failed} of {} rows failed", entries.len()));
    }
    run.summary = Some(json!({ "rows": entries.len(), "failed": failed }));
    run.payload = Payload::Table(table);
    run
}
