//! Monte Carlo estimates of the hitting probability.
//!
//! `BridgeBm` simulates the decorrelated driver pair started at (a1, a2)
//! and asks which coordinate reaches zero first. Between grid points each
//! coordinate gets the Brownian-bridge crossing test exp(−2·x·x'/h), which is
//! exact for any step length, so far from both barriers many grid steps are
//! merged into one ("leaps" of k·dt with k·dt ≈ (distance/5)²).
//!
//! The SABR schemes run in calendar time and report P(X hits zero by t_max).
//!
//! Every path draws from its own ChaCha stream keyed by (seed, path index)
//! and results are integer counts, so output does not depend on the number
//! of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, WedgeCoordinates};

/// Environment variable capping the worker count (0 or unset = all cores).
pub const THREADS_ENV: &str = "SABR_BOUNDARY_THREADS";

const CHUNK: u64 = 2048;

/// Leap only when the nearer barrier is this many step deviations away.
const LEAP_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BridgeBm,
    /// `BridgeBm` without bridge tests or leaps: a crossing is only seen
    /// when a grid value is ≤ 0.
    NaiveBm,
    EulerDriftedSabr,
    EulerSabr,
    HobsonNormal,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::BridgeBm => "bridge_bm",
            Scheme::NaiveBm => "naive_bm",
            Scheme::EulerDriftedSabr => "euler_drifted_sabr",
            Scheme::EulerSabr => "euler_sabr",
            Scheme::HobsonNormal => "hobson_normal",
        }
    }

    fn is_wedge(self) -> bool {
        matches!(self, Scheme::BridgeBm | Scheme::NaiveBm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Scheme::BridgeBm,
            Scheme::NaiveBm,
            Scheme::EulerDriftedSabr,
            Scheme::EulerSabr,
            Scheme::HobsonNormal,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: u64,
    /// Step size; Brownian clock for the wedge schemes and `HobsonNormal`,
    /// calendar time for the Euler schemes.
    pub dt: f64,
    /// Horizon in the time unit of the scheme (calendar time for all SABR schemes).
    pub t_max: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Worker threads; 0 defers to [`THREADS_ENV`] and then to all cores.
    #[serde(default)]
    pub workers: usize,
}

impl McConfig {
    /// Wedge defaults: dt = 1e-3·r0², t_max = 400·r0².
    pub fn for_wedge(w: &WedgeCoordinates, n_paths: u64, seed: u64) -> Self {
        let r2 = w.r0 * w.r0;
        Self {
            n_paths,
            dt: 1e-3 * r2,
            t_max: 400.0 * r2,
            seed,
            scheme: Scheme::BridgeBm,
            workers: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "t_max must be > 0, got {}",
                self.t_max
            )));
        }
        if (self.t_max / self.dt) > 1e12 {
            return Err(Error::Config("t_max / dt exceeds 1e12 steps".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.t_max / self.dt).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    /// Unresolved paths counted as misses.
    pub p_low: f64,
    /// Unresolved paths counted as hits.
    pub p_high: f64,
    pub n_unresolved: u64,
    pub n_paths: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(c: &Counts, n: u64, seed: u64) -> Self {
        let nf = n as f64;
        let p = c.hits as f64 / nf;
        Self {
            p_hat: p,
            std_err: (p * (1.0 - p) / nf).sqrt(),
            p_low: p,
            p_high: (c.hits + c.unresolved) as f64 / nf,
            n_unresolved: c.unresolved,
            n_paths: n,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Counts {
    hits: u64,
    unresolved: u64,
}

impl Counts {
    fn add(mut self, o: Outcome) -> Self {
        match o {
            Outcome::Hit { .. } => self.hits += 1,
            Outcome::Unresolved => self.unresolved += 1,
            Outcome::Miss => {}
        }
        self
    }

    fn merge(self, o: Counts) -> Self {
        Counts {
            hits: self.hits + o.hits,
            unresolved: self.unresolved + o.unresolved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    /// X reached zero at `time`; `other` is the volatility driver's distance then.
    Hit {
        time: f64,
        other: f64,
    },
    Miss,
    Unresolved,
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Source of the normals and uniforms one path consumes.
trait Draws {
    fn normal(&mut self) -> f64;
    fn uniform(&mut self) -> f64;
}

impl Draws for ChaCha8Rng {
    fn normal(&mut self) -> f64 {
        normal(self)
    }

    fn uniform(&mut self) -> f64 {
        self.random()
    }
}

/// Bridge crossing test for a coordinate moving from `a` to `b` > 0 over variance `h`.
fn bridge_crossed<D: Draws + ?Sized>(rng: &mut D, a: f64, b: f64, h: f64) -> bool {
    let e = -2.0 * a * b / h;
    // exp(−40) ≈ 4e-18 cannot change any estimate; skip the draw.
    e > -40.0 && rng.uniform() < e.exp()
}

/// Worker count from the config, then the environment.
pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

/// Runs `per_path` over all path indices and folds the results chunk by chunk.
fn run_paths<T, F, M>(cfg: &McConfig, init: T, per_chunk: F, merge: M) -> T
where
    T: Send + Sync + Clone,
    F: Fn(u64, u64) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    let n = cfg.n_paths;
    let chunks = n.div_ceil(CHUNK);
    let chunk = |c: u64| per_chunk(c * CHUNK, ((c + 1) * CHUNK).min(n));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || {
            let parts: Vec<T> = (0..chunks).into_par_iter().map(chunk).collect();
            parts.into_iter().fold(init.clone(), &merge)
        };
        let workers = resolve_workers(cfg.workers);
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(chunk).fold(init, merge)
    }
}

/// One decorrelated driver pair. Returns the asset-first outcome with the
/// volatility distance at the hit, `Miss` when the volatility driver wins.
fn wedge_path(w: &WedgeCoordinates, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Outcome {
    let rho = w.rho();
    let rho_bar = w.rho_bar;
    let bridge = cfg.scheme == Scheme::BridgeBm;
    let n_max = cfg.steps();
    let (mut x1, mut x2) = (w.a1, w.a2);
    let mut step = 0u64;
    while step < n_max {
        let k = if bridge {
            let m = x1.min(x2) / LEAP_SIGMAS;
            ((m * m / cfg.dt).floor() as u64).clamp(1, n_max - step)
        } else {
            1
        };
        let h = k as f64 * cfg.dt;
        let sq = h.sqrt();
        let d2 = sq * normal(rng);
        let d1 = rho * d2 + rho_bar * sq * normal(rng);
        let (n1, n2) = (x1 + d1, x2 + d2);
        let hit1 = n1 <= 0.0 || (bridge && bridge_crossed(rng, x1, n1, h));
        let hit2 = n2 <= 0.0 || (bridge && bridge_crossed(rng, x2, n2, h));
        if hit1 || hit2 {
            // Both in one step: the coordinate that started closer wins.
            let asset = hit1 && (!hit2 || x1 <= x2);
            if !asset {
                return Outcome::Miss;
            }
            return Outcome::Hit {
                time: (step as f64 + 0.5 * k as f64) * cfg.dt,
                other: (0.5 * (x2 + n2)).max(0.0),
            };
        }
        x1 = n1;
        x2 = n2;
        step += k;
    }
    Outcome::Unresolved
}

/// P(asset driver reaches zero first) for a wedge, by simulation.
pub fn estimate_first_passage(w: &WedgeCoordinates, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check()?;
    if !cfg.scheme.is_wedge() {
        return Err(Error::Config(format!(
            "estimate_first_passage runs bridge_bm or naive_bm, got {}",
            cfg.scheme
        )));
    }
    let counts = run_paths(
        cfg,
        Counts::default(),
        |lo, hi| {
            (lo..hi).fold(Counts::default(), |c, i| {
                c.add(wedge_path(w, cfg, &mut path_rng(cfg.seed, i)))
            })
        },
        Counts::merge,
    );
    Ok(McEstimate::from_counts(&counts, cfg.n_paths, cfg.seed))
}

fn check_sabr(p: &ModelParams, cfg: &McConfig) -> Result<()> {
    p.check()?;
    cfg.check()?;
    match cfg.scheme {
        Scheme::EulerSabr | Scheme::EulerDriftedSabr => Ok(()),
        Scheme::HobsonNormal if p.beta == 0.0 => Ok(()),
        Scheme::HobsonNormal => Err(Error::Config(format!(
            "hobson_normal needs beta = 0, got {}",
            p.beta
        ))),
        s => Err(Error::Config(format!("simulate_sabr does not run {s}"))),
    }
}

/// X = x0 + (ρ/ν)(Ỹ − y0) + ρ̄B̃ in the Brownian clock u, with Ỹ = y0 + νW.
/// Calendar time is ∫ Ỹ⁻² du by trapezoid; a hit counts if it happens by t_max.
fn hobson_path(p: &ModelParams, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Outcome {
    let rb = p.rho_bar();
    let du = cfg.dt;
    let sq = du.sqrt();
    // Generous cap on the Brownian clock: a hundred times the mean clock at t_max.
    let g = p.nu * p.nu * cfg.t_max;
    let mean_clock = p.y0
        * p.y0
        * if g < 1e-8 {
            cfg.t_max
        } else {
            g.exp_m1() / (p.nu * p.nu)
        };
    let n_max = ((100.0 * mean_clock / du).ceil() as u64).max(1);
    let (mut yt, mut b, mut x) = (p.y0, 0.0f64, p.x0);
    let mut clock = 0.0f64;
    for _ in 0..n_max {
        let ny = yt + p.nu * sq * normal(rng);
        let nb = b + sq * normal(rng);
        if ny <= 0.0 || bridge_crossed(rng, yt, ny, p.nu * p.nu * du) {
            // The volatility clock ran out: X never reaches zero.
            return Outcome::Miss;
        }
        let dt = 0.5 * du * (1.0 / (yt * yt) + 1.0 / (ny * ny));
        let nx = p.x0 + p.rho / p.nu * (ny - p.y0) + rb * nb;
        if nx <= 0.0 || bridge_crossed(rng, x, nx, du) {
            let t = clock + 0.5 * dt;
            return if t <= cfg.t_max {
                Outcome::Hit { time: t, other: yt }
            } else {
                Outcome::Miss
            };
        }
        clock += dt;
        if clock > cfg.t_max {
            return Outcome::Miss;
        }
        yt = ny;
        b = nb;
        x = nx;
    }
    Outcome::Unresolved
}

fn sabr_outcome(p: &ModelParams, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Outcome {
    match cfg.scheme {
        Scheme::EulerSabr | Scheme::EulerDriftedSabr => {
            let drift = cfg.scheme == Scheme::EulerDriftedSabr;
            euler_path(p, drift, cfg.dt, cfg.steps(), rng)
        }
        _ => hobson_path(p, cfg, rng),
    }
}

/// P(X hits zero by t_max) for the SABR dynamics, by simulation.
pub fn simulate_sabr(p: &ModelParams, cfg: &McConfig) -> Result<McEstimate> {
    check_sabr(p, cfg)?;
    let counts = run_paths(
        cfg,
        Counts::default(),
        |lo, hi| {
            (lo..hi).fold(Counts::default(), |c, i| {
                c.add(sabr_outcome(p, cfg, &mut path_rng(cfg.seed, i)))
            })
        },
        Counts::merge,
    );
    Ok(McEstimate::from_counts(&counts, cfg.n_paths, cfg.seed))
}

/// Euler estimates at dt and dt/2 driven by the same Brownian increments:
/// each coarse increment is the sum of two fine ones.
pub fn euler_refinement(p: &ModelParams, cfg: &McConfig) -> Result<(McEstimate, McEstimate)> {
    check_sabr(p, cfg)?;
    let drift = match cfg.scheme {
        Scheme::EulerSabr => false,
        Scheme::EulerDriftedSabr => true,
        s => {
            return Err(Error::Config(format!(
                "euler_refinement needs an Euler scheme, got {s}"
            )))
        }
    };
    let n = cfg.steps();
    let (coarse, fine) = run_paths(
        cfg,
        (Counts::default(), Counts::default()),
        |lo, hi| {
            let mut acc = (Counts::default(), Counts::default());
            for i in lo..hi {
                let mut src = PairedNormals::new(path_rng(cfg.seed, i));
                acc.1 = acc
                    .1
                    .add(euler_path(p, drift, 0.5 * cfg.dt, 2 * n, &mut src));
                src.rewind();
                src.coarse_mode = true;
                acc.0 = acc.0.add(euler_path(p, drift, cfg.dt, n, &mut src));
            }
            acc
        },
        |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
    );
    Ok((
        McEstimate::from_counts(&coarse, cfg.n_paths, cfg.seed),
        McEstimate::from_counts(&fine, cfg.n_paths, cfg.seed),
    ))
}

/// Replays one path's normals at two resolutions. Bridge uniforms are not
/// shared between the two runs.
struct PairedNormals {
    rng: ChaCha8Rng,
    tape: Vec<f64>,
    pos: usize,
    coarse_mode: bool,
}

impl Draws for PairedNormals {
    fn normal(&mut self) -> f64 {
        if self.coarse_mode {
            self.coarse()
        } else {
            self.fine()
        }
    }

    fn uniform(&mut self) -> f64 {
        // Interleaved with fresh tape entries; the order is still fixed by the path.
        self.rng.random()
    }
}

impl PairedNormals {
    fn new(rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            tape: Vec::new(),
            pos: 0,
            coarse_mode: false,
        }
    }

    fn fine(&mut self) -> f64 {
        if self.pos == self.tape.len() {
            let z = normal(&mut self.rng);
            self.tape.push(z);
        }
        self.pos += 1;
        self.tape[self.pos - 1]
    }

    fn rewind(&mut self) {
        self.pos = 0;
    }

    /// (z_a + z_b)/√2 from two consecutive fine steps of the same driver.
    /// Fine steps draw (w, z) pairs, so the partner is two entries ahead.
    fn coarse(&mut self) -> f64 {
        let k = self.pos;
        let pair = k / 2;
        let which = k % 2;
        let base = pair * 4 + which;
        while self.tape.len() <= base + 2 {
            let z = normal(&mut self.rng);
            self.tape.push(z);
        }
        self.pos += 1;
        (self.tape[base] + self.tape[base + 2]) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Euler step of X with absorption and a per-step bridge test; Y is stepped exactly.
fn euler_path<D: Draws>(p: &ModelParams, drift: bool, dt: f64, n: u64, draw: &mut D) -> Outcome {
    let rb = p.rho_bar();
    let sq = dt.sqrt();
    let (mut x, mut y) = (p.x0, p.y0);
    let ydrift = -0.5 * p.nu * p.nu * dt;
    for i in 0..n {
        let zw = draw.normal();
        let zz = p.rho * zw + rb * draw.normal();
        let vol = y * if p.beta == 0.0 { 1.0 } else { x.powf(p.beta) };
        let mut nx = x + vol * sq * zw;
        if drift && p.beta > 0.0 {
            nx += 0.5 * p.beta * y * y * x.powf(2.0 * p.beta - 1.0) * dt;
        }
        let crossed = nx <= 0.0
            || if drift {
                // x^{1−β}/(1−β) is driftless with volatility y under the drifted dynamics.
                let e = 1.0 - p.beta;
                let reduce = |v: f64| if p.beta == 0.0 { v } else { v.powf(e) / e };
                bridge_crossed(draw, reduce(x), reduce(nx), y * y * dt)
            } else {
                bridge_crossed(draw, x, nx, vol * vol * dt)
            };
        if crossed {
            return Outcome::Hit {
                time: (i as f64 + 1.0) * dt,
                other: y,
            };
        }
        x = nx;
        y *= (p.nu * sq * zz + ydrift).exp();
    }
    Outcome::Miss
}

/// Bin edges for [`first_passage_histogram`]; both strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    pub s_edges: Vec<f64>,
    pub t_edges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub s_edges: Vec<f64>,
    pub t_edges: Vec<f64>,
    /// `counts[i][j]`: asset passage in s-bin i and volatility passage in t-bin j.
    pub counts: Vec<Vec<u64>>,
    /// Asset-first paths whose pair falls outside the grid.
    pub outside: u64,
    pub hits: u64,
    pub n_unresolved: u64,
    pub n_paths: u64,
    pub seed: u64,
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    if v < edges[0] || v >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// 2-D histogram of (asset passage, volatility passage) on the asset-first
/// event. After the asset hit the volatility driver's remaining passage time
/// is drawn exactly as d²/Z².
pub fn first_passage_histogram(
    w: &WedgeCoordinates,
    cfg: &McConfig,
    bins: &HistogramBins,
) -> Result<Histogram> {
    cfg.check()?;
    if cfg.scheme != Scheme::BridgeBm {
        return Err(Error::Config(format!(
            "histogram runs bridge_bm, got {}",
            cfg.scheme
        )));
    }
    for edges in [&bins.s_edges, &bins.t_edges] {
        if edges.len() < 2 || edges.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::Config(
                "bin edges must be increasing with >= 2 entries".into(),
            ));
        }
    }
    let (ns, nt) = (bins.s_edges.len() - 1, bins.t_edges.len() - 1);
    #[derive(Clone)]
    struct Acc {
        counts: Vec<u64>,
        outside: u64,
        tally: Counts,
    }
    let empty = Acc {
        counts: vec![0; ns * nt],
        outside: 0,
        tally: Counts::default(),
    };
    let acc = run_paths(
        cfg,
        empty.clone(),
        |lo, hi| {
            let mut a = empty.clone();
            for i in lo..hi {
                let mut rng = path_rng(cfg.seed, i);
                let o = wedge_path(w, cfg, &mut rng);
                a.tally = a.tally.add(o);
                if let Outcome::Hit { time, other } = o {
                    let z: f64 = normal(&mut rng);
                    let t = time + other * other / (z * z);
                    match (bin_of(&bins.s_edges, time), bin_of(&bins.t_edges, t)) {
                        (Some(si), Some(ti)) => a.counts[si * nt + ti] += 1,
                        _ => a.outside += 1,
                    }
                }
            }
            a
        },
        |mut a, b| {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
            a.outside += b.outside;
            a.tally = a.tally.merge(b.tally);
            a
        },
    );
    Ok(Histogram {
        s_edges: bins.s_edges.clone(),
        t_edges: bins.t_edges.clone(),
        counts: acc.counts.chunks(nt).map(|r| r.to_vec()).collect(),
        outside: acc.outside,
        hits: acc.tally.hits,
        n_unresolved: acc.tally.unresolved,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    })
}
