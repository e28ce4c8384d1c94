//! Finite-difference solvers for the linear two-timescale problem and its
//! KPP variant in one space dimension.
//!
//! Each step applies the growth term exactly (linear) or by a per-cell
//! implicit step (KPP), then implicit Euler across the layers, then implicit
//! Euler along `x` with Neumann ends.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::medium::{InitialSupport, ValidatedMedium};
use crate::numeric::solve_tridiagonal;
use crate::spectral::InterfaceGrid;

/// Discretisation of a PDE run.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    /// Nodes across the layers, one of them at `m`.
    pub y_points: usize,
    pub dt: f64,
    /// Times at which to keep a copy of the field.
    pub record_times: Vec<f64>,
}

impl PdeConfig {
    /// Default resolution at scale `epsilon`: `dx = ε/5`, `dt = ε/50`.
    pub fn for_epsilon(epsilon: f64, x_lo: f64, x_hi: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            dx: 0.2 * epsilon,
            y_points: 33,
            dt: 0.02 * epsilon,
            record_times: Vec::new(),
        }
    }

    /// Halves `dx` and `dt` `levels` times.
    pub fn refined(&self, levels: u32) -> Self {
        let f = 0.5f64.powi(levels as i32);
        Self {
            dx: self.dx * f,
            dt: self.dt * f,
            y_points: (self.y_points - 1) * 2usize.pow(levels) + 1,
            ..self.clone()
        }
    }
}

/// Field `u = values · exp(log_scale)` at one time; `x` varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeField {
    pub time: f64,
    pub log_scale: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdeDiagnostics {
    pub steps: usize,
    /// Steps where the growth-free field raised its max or lowered its min by more than 1e−10.
    pub max_principle_violations: usize,
    pub min_value: f64,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub epsilon: f64,
    pub beta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub interface: usize,
    pub dt: f64,
    pub field: PdeField,
    pub snapshots: Vec<PdeField>,
    pub diagnostics: PdeDiagnostics,
}

fn nearest(grid: &[f64], v: f64) -> usize {
    let i = grid.partition_point(|&g| g < v);
    if i == 0 {
        0
    } else if i == grid.len() || v - grid[i - 1] <= grid[i] - v {
        i - 1
    } else {
        i
    }
}

impl PdeField {
    pub fn u(&self, nx: usize, i: usize, j: usize) -> f64 {
        self.values[j * nx + i] * self.log_scale.exp()
    }

    pub fn ln_u(&self, nx: usize, i: usize, j: usize) -> f64 {
        self.values[j * nx + i].ln() + self.log_scale
    }
}

impl PdeRun {
    pub fn x_index(&self, x: f64) -> usize {
        nearest(&self.x, x)
    }

    pub fn y_index(&self, y: f64) -> usize {
        nearest(&self.y, y)
    }

    /// `u` at the grid node nearest to `(x, y)`.
    pub fn u_at(&self, x: f64, y: f64) -> f64 {
        self.field.u(self.x.len(), self.x_index(x), self.y_index(y))
    }

    /// `ε ln u` at the grid node nearest to `(x, y)`.
    pub fn eps_ln_u_at(&self, x: f64, y: f64) -> f64 {
        self.epsilon * self.field.ln_u(self.x.len(), self.x_index(x), self.y_index(y))
    }

    /// Spread of `ε ln u` over the layers at the node nearest to `x`.
    pub fn y_variation(&self, x: f64) -> f64 {
        let i = self.x_index(x);
        let vals: Vec<f64> = (0..self.y.len())
            .map(|j| self.epsilon * self.field.ln_u(self.x.len(), i, j))
            .collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Per-layer reaction rate `u ↦ c(u)`.
pub type ReactionFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// KPP reaction rates of both layers.
#[derive(Clone)]
pub struct KppProfile {
    pub layers: [ReactionFn; 2],
}

impl std::fmt::Debug for KppProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("KppProfile")
    }
}

impl KppProfile {
    /// `c_k(u) = r_k (1 − u)`.
    pub fn logistic(r1: f64, r2: f64) -> Self {
        Self {
            layers: [Arc::new(move |u| r1 * (1.0 - u)), Arc::new(move |u| r2 * (1.0 - u))],
        }
    }

    fn validate(&self) -> Result<()> {
        for (k, c) in self.layers.iter().enumerate() {
            let ok = c(1.0).abs() <= 1e-12
                && [0.0, 0.25, 0.5, 0.75, 0.99].iter().all(|&u| c(u) > 0.0)
                && [1.01, 1.5, 2.0].iter().all(|&u| c(u) < 0.0);
            if !ok {
                return Err(Error::PreconditionViolation(format!(
                    "reaction of layer {} is not of KPP type (need c(1) = 0, c > 0 on [0, 1), c < 0 above 1)",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

enum Reaction<'a> {
    Linear,
    Kpp(&'a KppProfile),
}

struct Coeffs {
    /// x-diffusion per (row j, column i).
    a: Vec<f64>,
    /// Linear growth per (j, i).
    c: Vec<f64>,
    /// Layer weights per row j.
    mix: Vec<(f64, f64)>,
    /// Cross-layer operator per column i (shared when homogeneous).
    ygrid: Vec<InterfaceGrid>,
}

fn check_common(medium: &ValidatedMedium, beta: f64, epsilon: f64, t: f64, cfg: &PdeConfig) -> Result<()> {
    if medium.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: medium.dimension(),
        });
    }
    if !(1e-3..=1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} outside [1e-3, 1]")));
    }
    if !beta.is_finite() || beta <= -1.0 {
        return Err(Error::InvalidInput(format!("beta = {beta} must exceed -1")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
    }
    if !(cfg.x_hi > cfg.x_lo && cfg.dx > 0.0 && cfg.dt > 0.0) {
        return Err(Error::InvalidInput(format!("invalid PDE grid {cfg:?}")));
    }
    if cfg.y_points < 3 {
        return Err(Error::GridMissesInterface);
    }
    Ok(())
}

fn build(medium: &ValidatedMedium, x: &[f64], y_points: usize) -> Result<(Coeffs, Vec<f64>, usize)> {
    let nx = x.len();
    let m = medium.m();
    let locals: Vec<_> = if medium.is_homogeneous() {
        vec![medium.local(&[x[0]])]
    } else {
        x.iter().map(|&xi| medium.local(&[xi])).collect()
    };
    let local = |i: usize| &locals[if locals.len() == 1 { 0 } else { i }];
    let ygrid: Vec<InterfaceGrid> = locals
        .iter()
        .map(|l| InterfaceGrid::new(l.layers[0].alpha, l.layers[1].alpha, m, y_points))
        .collect::<Result<_>>()?;
    let y = ygrid[0].nodes.clone();
    let iface = ygrid[0].interface;
    let ny = y.len();
    let mut a = vec![0.0; nx * ny];
    let mut c = vec![0.0; nx * ny];
    let mut mix = Vec::with_capacity(ny);
    for j in 0..ny {
        for i in 0..nx {
            let l = local(i);
            let g = &ygrid[if ygrid.len() == 1 { 0 } else { i }];
            let (w1, w2) = g.mix(j, l.layers[0].alpha, l.layers[1].alpha);
            if i == 0 {
                mix.push((w1, w2));
            }
            a[j * nx + i] = w1 * l.layers[0].a[(0, 0)] + w2 * l.layers[1].a[(0, 0)];
            c[j * nx + i] = w1 * l.layers[0].c + w2 * l.layers[1].c;
        }
    }
    Ok((Coeffs { a, c, mix, ygrid }, y, iface))
}

fn x_grid(cfg: &PdeConfig) -> Vec<f64> {
    let cells = ((cfg.x_hi - cfg.x_lo) / cfg.dx).round().max(2.0) as usize;
    (0..=cells)
        .map(|i| cfg.x_lo + (cfg.x_hi - cfg.x_lo) * i as f64 / cells as f64)
        .collect()
}

fn initial(g0: &InitialSupport, x: &[f64], ny: usize) -> Result<Vec<f64>> {
    g0.validate(1)?;
    let row: Vec<f64> = x.iter().map(|&xi| if g0.contains(&[xi]) { 1.0 } else { 0.0 }).collect();
    if row.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("initial support contains no x-grid node".into()));
    }
    Ok((0..ny).flat_map(|_| row.iter().copied()).collect())
}

/// Solves `v − τ c(v) v = u` for `v` between `u` and 1.
fn implicit_reaction(c: impl Fn(f64) -> f64, u: f64, tau: f64) -> f64 {
    let f = |v: f64| v - tau * c(v) * v - u;
    let (mut lo, mut hi) = if u <= 1.0 { (u, 1.0) } else { (1.0, u) };
    if f(lo) >= 0.0 {
        return lo;
    }
    if f(hi) <= 0.0 {
        return hi;
    }
    let mut v = u;
    for _ in 0..60 {
        let fv = f(v);
        if fv.abs() <= 1e-15 * (1.0 + u) {
            return v;
        }
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let h = 1e-7 * (1.0 + v.abs());
        let d = (f(v + h) - f(v - h)) / (2.0 * h);
        let next = v - fv / d;
        v = if d > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
    }
    v
}

fn run(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    g0: &InitialSupport,
    t: f64,
    cfg: &PdeConfig,
    reaction: Reaction<'_>,
) -> Result<PdeRun> {
    check_common(medium, beta, epsilon, t, cfg)?;
    let x = x_grid(cfg);
    let nx = x.len();
    let (co, y, iface) = build(medium, &x, cfg.y_points)?;
    let ny = y.len();
    let mut u = initial(g0, &x, ny)?;
    let steps = (t / cfg.dt).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let growth_free = matches!(reaction, Reaction::Linear) && co.c.iter().all(|&c| c == 0.0);
    let c_max = match reaction {
        Reaction::Linear => co.c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Reaction::Kpp(_) => 0.0,
    };
    let growth: Vec<f64> = match reaction {
        Reaction::Linear => co.c.iter().map(|&c| (dt / epsilon * (c - c_max)).exp()).collect(),
        Reaction::Kpp(_) => Vec::new(),
    };
    let tau_y = dt * epsilon.powf(-beta);
    let k_x = 0.5 * epsilon * dt / (cfg.dx_actual(&x) * cfg.dx_actual(&x));

    // Cross-layer systems per column (or one shared).
    let ysys: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = co
        .ygrid
        .iter()
        .map(|g| {
            (
                g.lower.iter().map(|v| -tau_y * v).collect(),
                g.diag.iter().map(|v| 1.0 - tau_y * v).collect(),
                g.upper.iter().map(|v| -tau_y * v).collect(),
            )
        })
        .collect();
    // Along-x systems per row.
    let xsys: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..ny)
        .map(|j| {
            let mut lo = vec![0.0; nx];
            let mut di = vec![0.0; nx];
            let mut up = vec![0.0; nx];
            for i in 0..nx {
                let k = k_x * co.a[j * nx + i];
                if i == 0 {
                    up[i] = -2.0 * k;
                    di[i] = 1.0 + 2.0 * k;
                } else if i == nx - 1 {
                    lo[i] = -2.0 * k;
                    di[i] = 1.0 + 2.0 * k;
                } else {
                    lo[i] = -k;
                    up[i] = -k;
                    di[i] = 1.0 + 2.0 * k;
                }
            }
            (lo, di, up)
        })
        .collect();

    let mut log_scale = 0.0;
    let mut diag = PdeDiagnostics {
        steps,
        ..Default::default()
    };
    let mut snapshots = Vec::new();
    let mut record: Vec<(usize, f64)> = cfg
        .record_times
        .iter()
        .filter(|&&s| s >= 0.0 && s <= t)
        .map(|&s| ((s / dt).round() as usize, s))
        .collect();
    record.sort_by(|a, b| a.0.cmp(&b.0));
    let mut next_record = 0;
    let mut col = vec![0.0; ny];
    let mut scratch = Vec::new();
    let (mut prev_max, mut prev_min) = extrema(&u);
    let push_records = |step: usize, u: &[f64], log_scale: f64, next: &mut usize, snaps: &mut Vec<PdeField>| {
        while *next < record.len() && record[*next].0 == step {
            snaps.push(PdeField {
                time: record[*next].1,
                log_scale,
                values: u.to_vec(),
            });
            *next += 1;
        }
    };
    push_records(0, &u, log_scale, &mut next_record, &mut snapshots);
    for step in 1..=steps {
        match reaction {
            Reaction::Linear => {
                u.iter_mut().zip(&growth).for_each(|(v, g)| *v *= g);
                log_scale += dt * c_max / epsilon;
            }
            Reaction::Kpp(p) => {
                let tau = dt / epsilon;
                for j in 0..ny {
                    let (w1, w2) = co.mix[j];
                    for i in 0..nx {
                        let cell = &mut u[j * nx + i];
                        *cell = implicit_reaction(|v| w1 * (p.layers[0])(v) + w2 * (p.layers[1])(v), *cell, tau);
                    }
                }
            }
        }
        for i in 0..nx {
            let (lo, di, up) = &ysys[if ysys.len() == 1 { 0 } else { i }];
            for j in 0..ny {
                col[j] = u[j * nx + i];
            }
            solve_tridiagonal(lo, di, up, &mut col, &mut scratch);
            for j in 0..ny {
                u[j * nx + i] = col[j];
            }
        }
        for j in 0..ny {
            let (lo, di, up) = &xsys[j];
            solve_tridiagonal(lo, di, up, &mut u[j * nx..(j + 1) * nx], &mut scratch);
        }
        let (mx, mn) = extrema(&u);
        if !mx.is_finite() || mn < -1e-12 {
            return Err(Error::StepSizeRejected(format!(
                "field left the admissible range at step {step} (min {mn}, max {mx})"
            )));
        }
        if matches!(reaction, Reaction::Linear) && mx > 1e250 {
            u.iter_mut().for_each(|v| *v /= mx);
            log_scale += mx.ln();
        }
        if growth_free && (mx > prev_max + 1e-10 || mn < prev_min - 1e-10) {
            diag.max_principle_violations += 1;
        }
        prev_max = mx;
        prev_min = mn;
        push_records(step, &u, log_scale, &mut next_record, &mut snapshots);
    }
    u.iter_mut().for_each(|v| *v = v.max(0.0));
    let (mx, mn) = extrema(&u);
    diag.max_value = mx * log_scale.exp();
    diag.min_value = mn * log_scale.exp();
    Ok(PdeRun {
        epsilon,
        beta,
        x,
        y,
        interface: iface,
        dt,
        field: PdeField {
            time: t,
            log_scale,
            values: u,
        },
        snapshots,
        diagnostics: diag,
    })
}

impl PdeConfig {
    fn dx_actual(&self, x: &[f64]) -> f64 {
        x[1] - x[0]
    }
}

fn extrema(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(mx, mn), &v| (mx.max(v), mn.min(v)))
}

/// Solves `∂u/∂t = (ε/2) a u_xx + (ε^{−β}/2) α u_yy + ε^{−1} c̃ u` with
/// `u(0, x, y) = 1_{G₀}(x)`.
pub fn linear_pde_solve(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    g0: &InitialSupport,
    t: f64,
    cfg: &PdeConfig,
) -> Result<PdeRun> {
    run(medium, beta, epsilon, g0, t, cfg, Reaction::Linear)
}

/// KPP variant: growth `ε^{−1} c_k(u) u` per layer.
pub fn kpp_pde_solve(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    g0: &InitialSupport,
    t: f64,
    profile: &KppProfile,
    cfg: &PdeConfig,
) -> Result<PdeRun> {
    profile.validate()?;
    run(medium, beta, epsilon, g0, t, cfg, Reaction::Kpp(profile))
}
