//! Position-dependent coefficients: the path-variational exponent
//! `λ(t, x, x')`, the constrained reachable set, the worked jump example and
//! the inclusion jump time.
//!
//! `λ(t, x, x')` is the supremum of `∫ ℓ(φ, φ')` over paths from `x` to `x'`.
//! It is computed in two stages. A dynamic programme on a space-time lattice
//! chains straight segments spanning up to `max_lag` time slabs; segment
//! rewards use the midpoint rule on every slab. The extracted plan is then
//! refined continuously (Levenberg–Marquardt on finite-difference Hessians,
//! then coordinate golden sweeps), accepting only improvements.

use std::sync::Arc;

use dashmap::DashMap;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::front::{FrontSet, GridMask};
use crate::medium::{
    BoundingBox, CompositeMedium, InitialSupport, LayerCoefficients, LayerField, RegimeBeta, SimplexWeights,
    ValidatedMedium, validate_medium,
};
use crate::numeric::{golden_max, maximize_concave};
use crate::rates::{LagrangianValue, LocalRates};

const CACHE_CAP: usize = 1 << 19;

/// Time-gridded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub time_grid: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// Maximising occupation proportions per segment (reporting only).
    pub occupation: Vec<SimplexWeights>,
}

impl PathPlan {
    pub fn new(time_grid: Vec<f64>, nodes: Vec<Vec<f64>>) -> Result<Self> {
        if time_grid.len() != nodes.len() || nodes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "plan needs matching time grid and nodes (got {} and {})",
                time_grid.len(),
                nodes.len()
            )));
        }
        if time_grid.windows(2).any(|w| !(w[1] > w[0])) || time_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("plan time grid must be strictly increasing".into()));
        }
        if nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("plan nodes must be finite".into()));
        }
        Ok(Self {
            time_grid,
            nodes,
            occupation: Vec::new(),
        })
    }

    /// Straight segment from `a` to `b` over `[0, t]` with `pieces` equal steps.
    pub fn straight(t: f64, a: &[f64], b: &[f64], pieces: usize) -> Result<Self> {
        let pieces = pieces.max(1);
        let time_grid = (0..=pieces).map(|i| t * i as f64 / pieces as f64).collect();
        let nodes = (0..=pieces)
            .map(|i| {
                let th = i as f64 / pieces as f64;
                a.iter().zip(b).map(|(x, y)| x + th * (y - x)).collect()
            })
            .collect();
        Self::new(time_grid, nodes)
    }

    pub fn duration(&self) -> f64 {
        self.time_grid[self.time_grid.len() - 1] - self.time_grid[0]
    }
}

/// Discretisation parameters of the dynamic programme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    /// Grid nodes per axis over the medium's bounding box.
    pub cells: usize,
    /// Time slabs over `[0, t]`.
    pub slabs: usize,
    /// Largest displacement, in cells per slab.
    pub cone: usize,
    /// Longest straight segment, in slabs.
    pub max_lag: usize,
    /// Position lattice refinement used to look up segment midpoints.
    pub lattice: usize,
    /// Run the continuous refinement stage.
    pub refine: bool,
    pub newton_iterations: usize,
    pub sweeps: usize,
    /// Reachability slack on `λ ≥ 0`.
    pub reach_tol: f64,
}

impl DpConfig {
    pub fn default_for(dimension: usize) -> Self {
        if dimension <= 1 {
            Self {
                cells: 129,
                slabs: 128,
                cone: 8,
                max_lag: 8,
                lattice: 4,
                refine: true,
                newton_iterations: 40,
                sweeps: 3,
                reach_tol: 1e-6,
            }
        } else {
            Self {
                cells: 65,
                slabs: 64,
                cone: 3,
                max_lag: 2,
                lattice: 2,
                refine: true,
                newton_iterations: 25,
                sweeps: 2,
                reach_tol: 1e-6,
            }
        }
    }

    /// Multiplies the space and time resolution by `factor`.
    pub fn scaled(self, factor: usize) -> Self {
        let f = factor.max(1);
        Self {
            cells: (self.cells - 1) * f + 1,
            slabs: self.slabs * f,
            ..self
        }
    }
}

/// Result of [`XdepEngine::lambda`].
#[derive(Debug, Clone, PartialEq)]
pub struct XdepResult {
    /// Refined value (the reported exponent).
    pub value: f64,
    /// Value of the plan extracted from the dynamic programme.
    pub dp_value: f64,
    pub plan: PathPlan,
}

/// Best value `W_i(z)` of paths from a fixed start, per slab and grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub axes: Vec<Vec<f64>>,
    pub slab_times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Value of staying at the start point up to each slab.
    pub start_values: Vec<f64>,
    /// Witness-reachable nodes per slab.
    pub mask: Vec<Vec<bool>>,
}

/// Membership of query points in `G_s` for every slab time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableSet {
    pub slab_times: Vec<f64>,
    /// One mask over the query grid per slab.
    pub masks: Vec<GridMask>,
}

impl ReachableSet {
    /// The front at the final time.
    pub fn front(&self) -> FrontSet {
        FrontSet::Mask(self.masks[self.masks.len() - 1].clone())
    }

    /// Slabs where newly reached cells are not adjacent to previously reached ones.
    pub fn jumps(&self) -> Vec<JumpEvent> {
        let mut out = Vec::new();
        for i in 1..self.masks.len() {
            let prev = &self.masks[i - 1];
            let cur = &self.masks[i];
            let detached: Vec<usize> = (0..cur.len())
                .filter(|&c| cur.cells[c] && !prev.cells[c])
                .filter(|&c| !prev.cells[c] && prev.neighbours(c).iter().all(|&nb| !prev.cells[nb]))
                .collect();
            // A detached cell whose own new component touches the old set is not a jump.
            let detached: Vec<usize> = detached
                .into_iter()
                .filter(|&c| !component_touches(cur, prev, c))
                .collect();
            if !detached.is_empty() && prev.count() > 0 {
                out.push(JumpEvent {
                    slab: i,
                    time: self.slab_times[i],
                    cells: detached,
                });
            }
        }
        out
    }
}

/// Newly reached cells disconnected from the previous front.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub slab: usize,
    pub time: f64,
    pub cells: Vec<usize>,
}

fn component_touches(cur: &GridMask, prev: &GridMask, start: usize) -> bool {
    let mut seen = vec![false; cur.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(c) = stack.pop() {
        if prev.cells[c] {
            return true;
        }
        for nb in cur.neighbours(c) {
            if cur.cells[nb] && !seen[nb] {
                seen[nb] = true;
                stack.push(nb);
            }
        }
    }
    false
}

/// Lagrangian evaluator for a field medium, memoised on local coefficients.
pub struct XdepEngine<'a> {
    medium: &'a ValidatedMedium,
    regime: RegimeBeta,
    bounds: BoundingBox,
    rates: DashMap<Vec<u64>, Arc<LocalRates>>,
    values: DashMap<Vec<u64>, LagrangianValue>,
}

impl<'a> XdepEngine<'a> {
    pub fn new(medium: &'a ValidatedMedium, regime: RegimeBeta) -> Result<Self> {
        let bounds = medium
            .bounding_box()
            .ok_or_else(|| Error::InvalidInput("position-dependent engine needs a field medium with a bounding box".into()))?
            .clone();
        Ok(Self {
            medium,
            regime,
            bounds,
            rates: DashMap::new(),
            values: DashMap::new(),
        })
    }

    pub fn regime(&self) -> RegimeBeta {
        self.regime
    }

    fn rates_at(&self, x: &[f64]) -> Result<(Arc<LocalRates>, Vec<u64>)> {
        let local = self.medium.local(x);
        let mut key = Vec::with_capacity(16);
        local.key_bits(&mut key);
        if let Some(r) = self.rates.get(&key) {
            return Ok((r.clone(), key));
        }
        if self.rates.len() >= CACHE_CAP {
            self.rates.clear();
        }
        let r = Arc::new(LocalRates::new(local)?);
        self.rates.insert(key.clone(), r.clone());
        Ok((r, key))
    }

    /// `ℓ(x, v)`.
    pub fn lagrangian(&self, x: &[f64], v: &[f64]) -> Result<LagrangianValue> {
        let (rates, mut key) = self.rates_at(x)?;
        key.extend(v.iter().map(|vi| vi.to_bits()));
        if let Some(val) = self.values.get(&key) {
            return Ok(*val);
        }
        let val = rates.lagrangian(self.regime, v)?;
        if self.values.len() >= CACHE_CAP {
            self.values.clear();
        }
        self.values.insert(key, val);
        Ok(val)
    }

    fn segment(&self, a: &[f64], b: &[f64], ds: f64) -> Result<f64> {
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / ds).collect();
        Ok(ds * self.lagrangian(&mid, &v)?.value)
    }

    /// Midpoint-rule value of a plan.
    pub fn path_value(&self, plan: &PathPlan) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..plan.nodes.len() - 1 {
            total += self.segment(&plan.nodes[i], &plan.nodes[i + 1], plan.time_grid[i + 1] - plan.time_grid[i])?;
        }
        Ok(total)
    }

    /// Fills the per-segment occupation proportions and returns the value.
    pub fn annotate(&self, plan: &mut PathPlan) -> Result<f64> {
        let mut total = 0.0;
        plan.occupation.clear();
        for i in 0..plan.nodes.len() - 1 {
            let (a, b) = (&plan.nodes[i], &plan.nodes[i + 1]);
            let ds = plan.time_grid[i + 1] - plan.time_grid[i];
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / ds).collect();
            let l = self.lagrangian(&mid, &v)?;
            total += ds * l.value;
            plan.occupation.push(l.argmax);
        }
        Ok(total)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.bounds.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.dimension(),
                found: x.len(),
            });
        }
        if !self.bounds.contains(x) {
            return Err(Error::InvalidInput(format!("point {x:?} lies outside the medium's bounding box")));
        }
        Ok(())
    }

    /// `λ(t, x, x')`: supremum of the path value over paths from `x` to `x'`.
    pub fn lambda(&self, t: f64, x: &[f64], x_end: &[f64], cfg: &DpConfig) -> Result<XdepResult> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
        }
        self.check_point(x)?;
        self.check_point(x_end)?;
        let grid = DpGrid::new(self, t, cfg)?;
        let dp = grid.run(self, x, Some(x_end))?;
        let mut plan = dp.plan.ok_or_else(|| {
            Error::GridTooCoarse(format!(
                "no lattice path joins {x:?} to {x_end:?} in time {t} (cone {} cells per slab)",
                cfg.cone
            ))
        })?;
        let dp_value = self.path_value(&plan)?;
        let mut value = dp_value;
        if cfg.refine && plan.nodes.len() > 2 {
            value = self.refine(&mut plan, cfg, grid.dx_min())?;
        }
        debug_assert!(value >= dp_value - 1e-12);
        self.annotate(&mut plan)?;
        Ok(XdepResult { value, dp_value, plan })
    }

    /// Value field and witness-reachable nodes from start `x`.
    pub fn value_field(&self, t: f64, x: &[f64], cfg: &DpConfig) -> Result<ValueField> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
        }
        self.check_point(x)?;
        let grid = DpGrid::new(self, t, cfg)?;
        let dp = grid.run(self, x, None)?;
        let mask = grid.reach(&dp, x, cfg.reach_tol);
        Ok(ValueField {
            axes: grid.axes.clone(),
            slab_times: (0..=cfg.slabs).map(|i| grid.ds * i as f64).collect(),
            values: dp.w,
            start_values: dp.start,
            mask,
        })
    }

    /// Whether `x ∈ G_{s_i}` for every slab time `s_i` of `[0, t]`.
    pub fn membership(&self, g0: &InitialSupport, t: f64, x: &[f64], cfg: &DpConfig) -> Result<Vec<bool>> {
        g0.validate(self.bounds.dimension())?;
        if g0.contains(x) {
            return Ok(vec![true; cfg.slabs + 1]);
        }
        let field = self.value_field(t, x, cfg)?;
        let probe = GridMask::new(field.axes.clone());
        let in_g0: Vec<bool> = (0..probe.len()).map(|c| g0.contains(&probe.point(c))).collect();
        Ok(field
            .mask
            .iter()
            .map(|m| m.iter().zip(&in_g0).any(|(&a, &b)| a && b))
            .collect())
    }

    /// Membership masks over the query grid `axes`, one per slab.
    pub fn reachable_set(&self, g0: &InitialSupport, t: f64, axes: Vec<Vec<f64>>, cfg: &DpConfig) -> Result<ReachableSet> {
        let n = self.bounds.dimension();
        if n > 2 {
            return Err(Error::InvalidInput("reachable sets are computed for n ≤ 2".into()));
        }
        if axes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: axes.len(),
            });
        }
        let template = GridMask::new(axes);
        if t == 0.0 {
            g0.validate(n)?;
            let mut mask = template.clone();
            for c in 0..mask.len() {
                mask.cells[c] = g0.contains(&template.point(c));
            }
            return Ok(ReachableSet {
                slab_times: vec![0.0],
                masks: vec![mask],
            });
        }
        let rows: Vec<Vec<bool>> = (0..template.len())
            .into_par_iter()
            .map(|c| self.membership(g0, t, &template.point(c), cfg))
            .collect::<Result<_>>()?;
        let mut masks = vec![template.clone(); cfg.slabs + 1];
        for (c, row) in rows.iter().enumerate() {
            for (i, &b) in row.iter().enumerate() {
                masks[i].cells[c] = b;
            }
        }
        Ok(ReachableSet {
            slab_times: (0..=cfg.slabs).map(|i| t * i as f64 / cfg.slabs as f64).collect(),
            masks,
        })
    }

    fn refine(&self, plan: &mut PathPlan, cfg: &DpConfig, dx: f64) -> Result<f64> {
        let mut best = self.path_value(plan)?;
        for round in 0..3 {
            let before = best;
            best = self.newton(plan, best, cfg.newton_iterations)?;
            best = self.sweep(plan, best, cfg.sweeps, dx * 0.5f64.powi(round))?;
            if best - before < 1e-12 {
                break;
            }
        }
        Ok(best)
    }

    fn clamp_into_box(&self, x: &mut [f64]) {
        for (ax, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.bounds.lower[ax], self.bounds.upper[ax]);
        }
    }

    /// Levenberg–Marquardt ascent on all interior nodes.
    fn newton(&self, plan: &mut PathPlan, mut current: f64, iterations: usize) -> Result<f64> {
        let n = self.bounds.dimension();
        let nodes = plan.nodes.len();
        let free = nodes - 2;
        let m = n * free;
        let width = self
            .bounds
            .lower
            .iter()
            .zip(&self.bounds.upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max);
        let h = 1e-5 * width;
        let mut mu = -1.0;
        for _ in 0..iterations {
            let mut grad = DVector::<f64>::zeros(m);
            let mut hess = DMatrix::<f64>::zeros(m, m);
            for i in 0..nodes - 1 {
                let ds = plan.time_grid[i + 1] - plan.time_grid[i];
                // Free variables of this segment: (global index, node, axis).
                let mut vars = Vec::with_capacity(2 * n);
                for (slot, node) in [i, i + 1].into_iter().enumerate() {
                    if node >= 1 && node <= nodes - 2 {
                        for ax in 0..n {
                            vars.push(((node - 1) * n + ax, slot, ax));
                        }
                    }
                }
                if vars.is_empty() {
                    continue;
                }
                let base = [plan.nodes[i].clone(), plan.nodes[i + 1].clone()];
                let eval = |shift: &[(usize, f64)]| -> Result<f64> {
                    let mut p = base.clone();
                    for &(k, d) in shift {
                        let (_, slot, ax) = vars[k];
                        p[slot][ax] += d;
                    }
                    self.segment(&p[0], &p[1], ds)
                };
                let f0 = eval(&[])?;
                let k = vars.len();
                let mut plus = vec![0.0; k];
                let mut minus = vec![0.0; k];
                for a in 0..k {
                    plus[a] = eval(&[(a, h)])?;
                    minus[a] = eval(&[(a, -h)])?;
                    grad[vars[a].0] += (plus[a] - minus[a]) / (2.0 * h);
                    hess[(vars[a].0, vars[a].0)] += (plus[a] - 2.0 * f0 + minus[a]) / (h * h);
                }
                for a in 0..k {
                    for b in a + 1..k {
                        let pp = eval(&[(a, h), (b, h)])?;
                        let pm = eval(&[(a, h), (b, -h)])?;
                        let mp = eval(&[(a, -h), (b, h)])?;
                        let mm = eval(&[(a, -h), (b, -h)])?;
                        let v = (pp - pm - mp + mm) / (4.0 * h * h);
                        hess[(vars[a].0, vars[b].0)] += v;
                        hess[(vars[b].0, vars[a].0)] += v;
                    }
                }
            }
            if !grad.iter().chain(hess.iter()).all(|v| v.is_finite()) {
                break;
            }
            let scale = hess.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
            if mu < 0.0 {
                mu = 1e-8 * scale;
            }
            let mut improved = false;
            while mu <= 1e6 * scale {
                let mut sys = -hess.clone();
                for d in 0..m {
                    sys[(d, d)] += mu;
                }
                let step = match sys.cholesky() {
                    Some(ch) => ch.solve(&grad),
                    None => {
                        mu *= 10.0;
                        continue;
                    }
                };
                let mut trial = plan.clone();
                for j in 0..free {
                    for ax in 0..n {
                        trial.nodes[j + 1][ax] += step[j * n + ax];
                    }
                    self.clamp_into_box(&mut trial.nodes[j + 1]);
                }
                let val = self.path_value(&trial)?;
                if val > current {
                    let gain = val - current;
                    *plan = trial;
                    current = val;
                    mu = (mu / 3.0).max(1e-14 * scale);
                    improved = gain > 1e-13 * (1.0 + current.abs());
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        Ok(current)
    }

    /// Coordinate golden-section sweeps over interior nodes.
    fn sweep(&self, plan: &mut PathPlan, mut current: f64, sweeps: usize, window: f64) -> Result<f64> {
        let n = self.bounds.dimension();
        let nodes = plan.nodes.len();
        for _ in 0..sweeps {
            let start = current;
            for j in 1..nodes - 1 {
                for ax in 0..n {
                    let ds0 = plan.time_grid[j] - plan.time_grid[j - 1];
                    let ds1 = plan.time_grid[j + 1] - plan.time_grid[j];
                    let prev = plan.nodes[j - 1].clone();
                    let next = plan.nodes[j + 1].clone();
                    let mut node = plan.nodes[j].clone();
                    let cur = node[ax];
                    let mut err = None;
                    let local = |u: f64, node: &mut Vec<f64>, err: &mut Option<Error>| {
                        node[ax] = u;
                        match (self.segment(&prev, node, ds0), self.segment(node, &next, ds1)) {
                            (Ok(a), Ok(b)) => a + b,
                            (Err(e), _) | (_, Err(e)) => {
                                *err = Some(e);
                                f64::NEG_INFINITY
                            }
                        }
                    };
                    let f_cur = local(cur, &mut node, &mut err);
                    let lo = (cur - window).max(self.bounds.lower[ax]);
                    let hi = (cur + window).min(self.bounds.upper[ax]);
                    let (u, f_u) = golden_max(|u| local(u, &mut node, &mut err), lo, hi, 1e-9 * window.max(1e-12));
                    if let Some(e) = err {
                        return Err(e);
                    }
                    if f_u > f_cur {
                        plan.nodes[j][ax] = u;
                        current += f_u - f_cur;
                    }
                }
            }
            if current - start < 1e-13 {
                break;
            }
        }
        // Re-evaluate to avoid drift from the incremental updates.
        self.path_value(plan)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Back {
    None,
    Cell { r: u8, trans: u32 },
    Start { r: u8 },
}

struct Transition {
    /// Per-axis displacement in cells.
    dq: Vec<isize>,
    r: usize,
    /// Flat offsets (relative to the source lattice index) of the slab midpoints.
    lat_offsets: Vec<isize>,
}

struct DpOutput {
    w: Vec<Vec<f64>>,
    start: Vec<f64>,
    plan: Option<PathPlan>,
}

/// Space-time lattice and the tabulated segment rewards.
struct DpGrid {
    n: usize,
    axes: Vec<Vec<f64>>,
    dx: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    ds: f64,
    slabs: usize,
    max_lag: usize,
    cone: usize,
    /// Transitions grouped by lag (index 0 unused).
    trans: Vec<Vec<Transition>>,
    /// Segment reward for `(source cell, lag, transition)`; `-inf` when out of range.
    seg: Vec<Vec<Vec<f64>>>,
}

impl DpGrid {
    fn new(engine: &XdepEngine<'_>, t: f64, cfg: &DpConfig) -> Result<Self> {
        let b = &engine.bounds;
        let n = b.dimension();
        if cfg.cells < 3 || cfg.slabs < 1 || cfg.cone < 1 || cfg.max_lag < 1 || cfg.lattice < 1 {
            return Err(Error::GridTooCoarse(format!("invalid dynamic-programming configuration {cfg:?}")));
        }
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|ax| {
                (0..cfg.cells)
                    .map(|i| b.lower[ax] + (b.upper[ax] - b.lower[ax]) * i as f64 / (cfg.cells - 1) as f64)
                    .collect()
            })
            .collect();
        let dx: Vec<f64> = (0..n).map(|ax| (b.upper[ax] - b.lower[ax]) / (cfg.cells - 1) as f64).collect();
        let shape = vec![cfg.cells; n];
        let mut strides = vec![1; n];
        let lat_len = (cfg.cells - 1) * cfg.lattice + 1;
        let mut lat_strides = vec![1; n];
        for ax in 1..n {
            strides[ax] = strides[ax - 1] * shape[ax - 1];
            lat_strides[ax] = lat_strides[ax - 1] * lat_len;
        }
        let ds = t / cfg.slabs as f64;
        let f = cfg.lattice as isize;

        // Transitions per lag.
        let mut trans: Vec<Vec<Transition>> = vec![Vec::new()];
        for r in 1..=cfg.max_lag {
            let k = (cfg.cone * r) as isize;
            let count = (2 * k + 1).pow(n as u32) as usize;
            let mut list = Vec::with_capacity(count);
            for flat in 0..count {
                let mut rem = flat;
                let dq: Vec<isize> = (0..n)
                    .map(|_| {
                        let v = (rem % (2 * k as usize + 1)) as isize - k;
                        rem /= 2 * k as usize + 1;
                        v
                    })
                    .collect();
                let lat_offsets = (0..r)
                    .map(|s| {
                        dq.iter()
                            .enumerate()
                            .map(|(ax, &q)| {
                                let off = ((q * f * (2 * s as isize + 1)) as f64 / (2 * r) as f64).round() as isize;
                                off * lat_strides[ax] as isize
                            })
                            .sum()
                    })
                    .collect();
                list.push(Transition { dq, r, lat_offsets });
            }
            trans.push(list);
        }

        // Local rates on the position lattice, deduplicated by coefficients.
        let lat_total = lat_len.pow(n as u32);
        let mut ids = vec![0usize; lat_total];
        let mut distinct: Vec<Arc<LocalRates>> = Vec::new();
        let mut keys: Vec<Vec<u64>> = Vec::new();
        let mut lookup: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
        for (li, slot) in ids.iter_mut().enumerate() {
            let mut rem = li;
            let x: Vec<f64> = (0..n)
                .map(|ax| {
                    let i = rem % lat_len;
                    rem /= lat_len;
                    b.lower[ax] + dx[ax] * i as f64 / cfg.lattice as f64
                })
                .collect();
            let (rates, key) = engine.rates_at(&x)?;
            let id = *lookup.entry(key.clone()).or_insert_with(|| {
                distinct.push(rates);
                keys.push(key);
                distinct.len() - 1
            });
            *slot = id;
        }

        // Lagrangian tables: per distinct medium, per (lag, transition).
        let tables: Vec<Vec<Vec<f64>>> = distinct
            .par_iter()
            .map(|rates| {
                (0..=cfg.max_lag)
                    .map(|r| {
                        trans[r]
                            .iter()
                            .map(|tr| {
                                let v: Vec<f64> =
                                    tr.dq.iter().enumerate().map(|(ax, &q)| q as f64 * dx[ax] / (tr.r as f64 * ds)).collect();
                                rates.lagrangian(engine.regime, &v).map(|l| l.value)
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()
            })
            .collect::<Result<_>>()?;

        let cells_total = cfg.cells.pow(n as u32);
        let seg: Vec<Vec<Vec<f64>>> = (0..cells_total)
            .into_par_iter()
            .map(|c| {
                let mut rem = c;
                let multi: Vec<usize> = (0..n)
                    .map(|_| {
                        let i = rem % cfg.cells;
                        rem /= cfg.cells;
                        i
                    })
                    .collect();
                let base_lat: usize = multi.iter().enumerate().map(|(ax, &i)| i * cfg.lattice * lat_strides[ax]).sum();
                (0..=cfg.max_lag)
                    .map(|r| {
                        trans[r]
                            .iter()
                            .enumerate()
                            .map(|(ti, tr)| {
                                let inside = multi
                                    .iter()
                                    .zip(&tr.dq)
                                    .all(|(&i, &q)| (i as isize + q) >= 0 && (i as isize + q) < cfg.cells as isize);
                                if !inside {
                                    return f64::NEG_INFINITY;
                                }
                                let sum: f64 = tr
                                    .lat_offsets
                                    .iter()
                                    .map(|&off| tables[ids[(base_lat as isize + off) as usize]][r][ti])
                                    .sum();
                                ds * sum
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            n,
            axes,
            dx,
            shape,
            strides,
            ds,
            slabs: cfg.slabs,
            max_lag: cfg.max_lag,
            cone: cfg.cone,
            trans,
            seg,
        })
    }

    fn dx_min(&self) -> f64 {
        self.dx.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    fn multi(&self, mut c: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|&s| {
                let i = c % s;
                c /= s;
                i
            })
            .collect()
    }

    fn point(&self, c: usize) -> Vec<f64> {
        self.multi(c).iter().enumerate().map(|(ax, &i)| self.axes[ax][i]).collect()
    }

    fn offset(&self, dq: &[isize]) -> isize {
        dq.iter().zip(&self.strides).map(|(&q, &s)| q * s as isize).sum()
    }

    /// Exact reward of a straight segment over `r` slabs.
    fn exact_segment(&self, engine: &XdepEngine<'_>, a: &[f64], b: &[f64], r: usize) -> Result<f64> {
        let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / (r as f64 * self.ds)).collect();
        let mut sum = 0.0;
        for s in 0..r {
            let th = (s as f64 + 0.5) / r as f64;
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + th * (y - x)).collect();
            sum += engine.lagrangian(&mid, &v)?.value;
        }
        Ok(self.ds * sum)
    }

    /// Cells within the velocity cone of an off-grid point for lag `r`.
    fn cone_cells(&self, x: &[f64], r: usize) -> Vec<usize> {
        let reach = (self.cone * r) as f64;
        let ranges: Vec<(usize, usize)> = (0..self.n)
            .map(|ax| {
                let u = (x[ax] - self.axes[ax][0]) / self.dx[ax];
                let lo = (u - reach).ceil().max(0.0) as usize;
                let hi = ((u + reach).floor() as isize).min(self.shape[ax] as isize - 1).max(-1);
                (lo, hi.max(0) as usize)
            })
            .collect();
        if ranges.iter().any(|&(lo, hi)| lo > hi) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let count: usize = ranges.iter().map(|&(lo, hi)| hi - lo + 1).product();
        for flat in 0..count {
            let mut rem = flat;
            let mut c = 0;
            for (ax, &(lo, hi)) in ranges.iter().enumerate() {
                let span = hi - lo + 1;
                c += (lo + rem % span) * self.strides[ax];
                rem /= span;
            }
            out.push(c);
        }
        out
    }

    fn run(&self, engine: &XdepEngine<'_>, x0: &[f64], x1: Option<&[f64]>) -> Result<DpOutput> {
        let cells = self.cells();
        let n_slabs = self.slabs;
        let stay0 = engine.lagrangian(x0, &vec![0.0; self.n])?.value;
        let start: Vec<f64> = (0..=n_slabs).map(|i| self.ds * stay0 * i as f64).collect();

        // Start segments: start_seg[r] = [(cell, reward)].
        let mut start_seg: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.max_lag + 1];
        for r in 1..=self.max_lag {
            for c in self.cone_cells(x0, r) {
                start_seg[r].push((c, self.exact_segment(engine, x0, &self.point(c), r)?));
            }
        }
        let mut start_lookup: Vec<Vec<f64>> = vec![vec![f64::NEG_INFINITY; cells]; self.max_lag + 1];
        for r in 1..=self.max_lag {
            for &(c, v) in &start_seg[r] {
                start_lookup[r][c] = v;
            }
        }

        let mut w: Vec<Vec<f64>> = vec![vec![f64::NEG_INFINITY; cells]; n_slabs + 1];
        let mut back: Vec<Vec<Back>> = vec![vec![Back::None; cells]; n_slabs + 1];
        for i in 1..=n_slabs {
            let (done, _) = w.split_at(i);
            let row: Vec<(f64, Back)> = (0..cells)
                .into_par_iter()
                .map(|c| {
                    let multi = self.multi(c);
                    let mut best = f64::NEG_INFINITY;
                    let mut bp = Back::None;
                    for r in 1..=self.max_lag.min(i) {
                        let prev = &done[i - r];
                        for (ti, tr) in self.trans[r].iter().enumerate() {
                            let inside = multi.iter().zip(&tr.dq).all(|(&m, &q)| {
                                let s = m as isize - q;
                                s >= 0 && s < self.shape[0] as isize
                            });
                            if !inside {
                                continue;
                            }
                            let src = (c as isize - self.offset(&tr.dq)) as usize;
                            let wv = prev[src];
                            if wv == f64::NEG_INFINITY {
                                continue;
                            }
                            let val = wv + self.seg[src][r][ti];
                            if val > best {
                                best = val;
                                bp = Back::Cell { r: r as u8, trans: ti as u32 };
                            }
                        }
                        let sv = start_lookup[r][c];
                        if sv > f64::NEG_INFINITY {
                            let val = start[i - r] + sv;
                            if val > best {
                                best = val;
                                bp = Back::Start { r: r as u8 };
                            }
                        }
                    }
                    (best, bp)
                })
                .collect();
            for (c, (v, b)) in row.into_iter().enumerate() {
                w[i][c] = v;
                back[i][c] = b;
            }
        }

        let plan = match x1 {
            None => None,
            Some(x1) => self.finish(engine, x0, x1, &w, &back, &start)?,
        };
        Ok(DpOutput { w, start, plan })
    }

    /// End-point stage and plan extraction.
    fn finish(
        &self,
        engine: &XdepEngine<'_>,
        x0: &[f64],
        x1: &[f64],
        w: &[Vec<f64>],
        back: &[Vec<Back>],
        start: &[f64],
    ) -> Result<Option<PathPlan>> {
        let n_slabs = self.slabs;
        let stay1 = engine.lagrangian(x1, &vec![0.0; self.n])?.value;
        let mut end_seg: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.max_lag + 1];
        let mut direct = vec![f64::NEG_INFINITY; self.max_lag + 1];
        for r in 1..=self.max_lag {
            for c in self.cone_cells(x1, r) {
                end_seg[r].push((c, self.exact_segment(engine, &self.point(c), x1, r)?));
            }
            let reach = (self.cone * r) as f64;
            if x0.iter().zip(x1).zip(&self.dx).all(|((a, b), d)| (b - a).abs() <= reach * d) {
                direct[r] = self.exact_segment(engine, x0, x1, r)?;
            }
        }
        #[derive(Clone, Copy)]
        enum EndBack {
            None,
            Linger,
            Cell(usize, usize),
            Start(usize),
        }
        let mut e = vec![f64::NEG_INFINITY; n_slabs + 1];
        let mut eb = vec![EndBack::None; n_slabs + 1];
        for i in 1..=n_slabs {
            let mut best = e[i - 1] + self.ds * stay1;
            let mut bp = if best > f64::NEG_INFINITY { EndBack::Linger } else { EndBack::None };
            for r in 1..=self.max_lag.min(i) {
                for &(c, sv) in &end_seg[r] {
                    let val = w[i - r][c] + sv;
                    if val > best {
                        best = val;
                        bp = EndBack::Cell(r, c);
                    }
                }
                if direct[r] > f64::NEG_INFINITY {
                    let val = start[i - r] + direct[r];
                    if val > best {
                        best = val;
                        bp = EndBack::Start(r);
                    }
                }
            }
            e[i] = best;
            eb[i] = bp;
        }
        if e[n_slabs] == f64::NEG_INFINITY {
            return Ok(None);
        }
        // Break points (slab, position), collected backwards.
        let mut pts: Vec<(usize, Vec<f64>)> = vec![(n_slabs, x1.to_vec())];
        let mut i = n_slabs;
        let mut cell: Option<usize> = None;
        loop {
            match cell {
                None => match eb[i] {
                    EndBack::Linger => {
                        i -= 1;
                        pts.push((i, x1.to_vec()));
                    }
                    EndBack::Cell(r, c) => {
                        i -= r;
                        pts.push((i, self.point(c)));
                        cell = Some(c);
                    }
                    EndBack::Start(r) => {
                        i -= r;
                        pts.push((i, x0.to_vec()));
                        break;
                    }
                    EndBack::None => return Ok(None),
                },
                Some(c) => match back[i][c] {
                    Back::Cell { r, trans } => {
                        let tr = &self.trans[r as usize][trans as usize];
                        let src = (c as isize - self.offset(&tr.dq)) as usize;
                        i -= r as usize;
                        pts.push((i, self.point(src)));
                        cell = Some(src);
                    }
                    Back::Start { r } => {
                        i -= r as usize;
                        pts.push((i, x0.to_vec()));
                        break;
                    }
                    Back::None => return Ok(None),
                },
            }
        }
        pts.reverse();
        // Lingering at the start before the first move.
        let mut nodes = vec![x0.to_vec(); pts[0].0 + 1];
        for win in pts.windows(2) {
            let (i0, a) = (&win[0].0, &win[0].1);
            let (i1, b) = (&win[1].0, &win[1].1);
            for k in 1..=(i1 - i0) {
                let th = k as f64 / (i1 - i0) as f64;
                nodes.push(a.iter().zip(b).map(|(x, y)| x + th * (y - x)).collect());
            }
        }
        let time_grid = (0..=n_slabs).map(|k| self.ds * k as f64).collect();
        Ok(Some(PathPlan::new(time_grid, nodes)?))
    }

    /// Witness-reachable nodes per slab: components of `{W ≥ −tol}` that
    /// connect to the previous slab's reachable nodes (or to the start).
    fn reach(&self, dp: &DpOutput, x0: &[f64], tol: f64) -> Vec<Vec<bool>> {
        let cells = self.cells();
        let mask = GridMask::new(self.axes.clone());
        let mut seeds_start: Vec<usize> = Vec::new();
        {
            // Grid nodes of the cell containing the start point.
            let lo: Vec<usize> = (0..self.n)
                .map(|ax| (((x0[ax] - self.axes[ax][0]) / self.dx[ax]).floor().max(0.0) as usize).min(self.shape[ax] - 1))
                .collect();
            for corner in 0..(1usize << self.n) {
                let mut c = 0;
                for ax in 0..self.n {
                    let i = (lo[ax] + ((corner >> ax) & 1)).min(self.shape[ax] - 1);
                    c += i * self.strides[ax];
                }
                seeds_start.push(c);
            }
        }
        let mut out = vec![vec![false; cells]; self.slabs + 1];
        for i in 1..=self.slabs {
            let a: Vec<bool> = dp.w[i].iter().map(|&v| v >= -tol).collect();
            let mut seeds: Vec<usize> = (0..cells).filter(|&c| out[i - 1][c] && a[c]).collect();
            if dp.start[i - 1] >= -tol {
                seeds.extend(seeds_start.iter().copied().filter(|&c| a[c]));
            }
            let reach = &mut out[i];
            let mut stack = seeds;
            for &s in &stack {
                reach[s] = true;
            }
            while let Some(c) = stack.pop() {
                for nb in mask.neighbours(c) {
                    if a[nb] && !reach[nb] {
                        reach[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        out
    }
}

/// Midpoint-rule value of a plan.
pub fn path_value(medium: &ValidatedMedium, regime: RegimeBeta, plan: &PathPlan) -> Result<f64> {
    XdepEngine::new(medium, regime)?.path_value(plan)
}

/// `λ(t, x, x')` on the default grid.
pub fn lambda_xdep(medium: &ValidatedMedium, regime: RegimeBeta, t: f64, x: &[f64], x_end: &[f64]) -> Result<XdepResult> {
    let cfg = DpConfig::default_for(medium.dimension());
    XdepEngine::new(medium, regime)?.lambda(t, x, x_end, &cfg)
}

/// Membership masks of `G_s` over a query grid on the default DP grid.
pub fn reachable_set_xdep(
    medium: &ValidatedMedium,
    regime: RegimeBeta,
    g0: &InitialSupport,
    t: f64,
    axes: Vec<Vec<f64>>,
) -> Result<ReachableSet> {
    let cfg = DpConfig::default_for(medium.dimension());
    XdepEngine::new(medium, regime)?.reachable_set(g0, t, axes, &cfg)
}

/// `T₀ = (1 − δ)√(2(c₁ − c₀))/c₁` and the bound `1/√(2c₀)` it stays below.
pub fn inclusion_jump_time(c0: f64, c1: f64, delta: f64) -> Result<(f64, f64)> {
    if !(c0 > 0.0) || !(c1 > 2.0 * c0) || !c1.is_finite() {
        return Err(Error::PreconditionViolation(format!("need c1 > 2 c0 > 0 (c0 = {c0}, c1 = {c1})")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::PreconditionViolation(format!("need 0 < delta < 1 (delta = {delta})")));
    }
    let t0 = (1.0 - delta) * (2.0 * (c1 - c0)).sqrt() / c1;
    let bound = 1.0 / (2.0 * c0).sqrt();
    if !(t0 < bound) {
        return Err(Error::PreconditionViolation(format!("jump time {t0} not below {bound}")));
    }
    Ok((t0, bound))
}

/// Interface position of the jump example.
pub const JUMP_M: f64 = 2.0 / 3.0;

/// Fast diffusion of the jump example: `1/δ` left of `−δ`, `δ` right of `δ`,
/// linear in `log α` in between.
pub fn jump_alpha(delta: f64, x: f64) -> f64 {
    if x <= -delta {
        1.0 / delta
    } else if x >= delta {
        delta
    } else {
        let th = (x + delta) / (2.0 * delta);
        (-(1.0 - th) * delta.ln() + th * delta.ln()).exp()
    }
}

/// The one-dimensional jump example medium on `bounds`.
pub fn jump_medium(delta: f64, bounds: BoundingBox) -> Result<ValidatedMedium> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} must lie in (0, 1)")));
    }
    let layer = |c: f64| LayerField {
        a: Arc::new(|_: &[f64]| DMatrix::from_element(1, 1, 1.0)),
        alpha: Arc::new(move |x: &[f64]| jump_alpha(delta, x[0])),
        c: Arc::new(move |_: &[f64]| c),
    };
    validate_medium(&CompositeMedium::field(JUMP_M, layer(delta), layer(1.0), bounds))
}

/// Default box for the jump example: grid nodes at `0` and `−1`.
pub fn jump_bounds() -> BoundingBox {
    BoundingBox::new(vec![-1.5], vec![0.5])
}

/// Limit profile `s + (t − s)/3 − 1/(2(t − s))` of the jump example.
pub fn jump_profile(t: f64, s: f64) -> f64 {
    s + (t - s) / 3.0 - 1.0 / (2.0 * (t - s))
}

/// Report of the jump example.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport {
    pub delta: f64,
    pub t: f64,
    /// `λ(t, 0, −1)` from the path optimiser.
    pub lambda: f64,
    pub lambda_dp: f64,
    /// `sup_s [s ℓ_right(0) + (t − s) ℓ_left(−1/(t − s))]` at the same δ.
    pub two_region_value: f64,
    /// `sup_{s ∈ [0, t]}` of the limit profile.
    pub limit_value: f64,
    /// Analytic optimiser `t − √3/2` clipped to `[0, t]`.
    pub s_star: f64,
    /// Limit profile maximised over `[0, 1]` instead of `[0, t]`.
    pub limit_value_unit_interval: f64,
    /// Threshold `2/√3` above which the limit value is positive.
    pub threshold: f64,
    pub limit_positive: bool,
    pub profile: Vec<(f64, f64)>,
    pub plan: PathPlan,
}

impl JumpReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("jump example: n = 1, G0 = [-2, -1], a = 1, m = 2/3, c = (delta, 1), beta = 1\n");
        s.push_str(&format!("delta = {}\nt = {}\n", self.delta, self.t));
        s.push_str(&format!("lambda(t, 0, -1) path optimiser = {}\n", self.lambda));
        s.push_str(&format!("lambda(t, 0, -1) lattice stage = {}\n", self.lambda_dp));
        s.push_str(&format!("two-region value at this delta = {}\n", self.two_region_value));
        s.push_str(&format!("limit value sup over s in [0, t] = {}\n", self.limit_value));
        s.push_str(&format!("optimal s* = t - sqrt(3)/2 clipped = {}\n", self.s_star));
        s.push_str(&format!(
            "note: the time spent right of the origin ranges over [0, t]; over [0, 1] the limit value would be {}\n",
            self.limit_value_unit_interval
        ));
        s.push_str(&format!(
            "threshold 2/sqrt(3) = {}; limit value {} at this t\n",
            self.threshold,
            if self.limit_positive { "positive" } else { "non-positive" }
        ));
        s
    }
}

/// Semi-analytic value of the jump example at finite δ: wait right of the
/// origin for time `s`, then cross to `−1` at constant speed.
pub fn jump_two_region_value(delta: f64, t: f64, regime: RegimeBeta) -> Result<f64> {
    let side = |alpha: f64| {
        LocalRates::new(crate::medium::LocalMedium::new(
            JUMP_M,
            LayerCoefficients::isotropic(1, 1.0, alpha, delta),
            LayerCoefficients::isotropic(1, 1.0, alpha, 1.0),
        ))
    };
    let right = side(delta)?;
    let left = side(1.0 / delta)?;
    let rest = right.lagrangian(regime, &[0.0])?.value;
    let mut err = None;
    let (_, v) = maximize_concave(
        |s| {
            let travel = t - s;
            if travel <= 0.0 {
                return f64::NEG_INFINITY;
            }
            match left.lagrangian(regime, &[-1.0 / travel]) {
                Ok(l) => s * rest + travel * l.value,
                Err(e) => {
                    err = Some(e);
                    f64::NEG_INFINITY
                }
            }
        },
        0.0,
        t,
        256,
        1e-12,
    );
    err.map_or(Ok(v), Err)
}

/// Runs the jump example at `(δ, t)`.
pub fn jump_demo(delta: f64, t: f64) -> Result<JumpReport> {
    jump_demo_with(delta, t, &DpConfig::default_for(1))
}

pub fn jump_demo_with(delta: f64, t: f64, cfg: &DpConfig) -> Result<JumpReport> {
    if !(delta > 0.0 && delta <= 0.01) {
        return Err(Error::PreconditionViolation(format!("need 0 < delta <= 0.01 (delta = {delta})")));
    }
    if !(t > 0.0 && t <= 3.0) {
        return Err(Error::PreconditionViolation(format!("need t in (0, 3] (t = {t})")));
    }
    let medium = jump_medium(delta, jump_bounds())?;
    let engine = XdepEngine::new(&medium, RegimeBeta::Equal)?;
    let res = engine.lambda(t, &[0.0], &[-1.0], cfg)?;
    let s_star = (t - 3f64.sqrt() / 2.0).clamp(0.0, t);
    let limit_value = jump_profile(t, s_star);
    let (_, unit) = maximize_concave(|s| jump_profile(t, s), 0.0, 1.0f64.min(t * (1.0 - 1e-12)), 256, 1e-12);
    let profile = (0..200)
        .map(|k| {
            let s = t * k as f64 / 200.0;
            (s, jump_profile(t, s))
        })
        .collect();
    Ok(JumpReport {
        delta,
        t,
        lambda: res.value,
        lambda_dp: res.dp_value,
        two_region_value: jump_two_region_value(delta, t, RegimeBeta::Equal)?,
        limit_value,
        s_star,
        limit_value_unit_interval: unit,
        threshold: 2.0 / 3f64.sqrt(),
        limit_positive: limit_value > 0.0,
        profile,
        plan: res.plan,
    })
}
