//! Monte Carlo Feynman–Kac estimator for the two-timescale diffusion.
//!
//! The cross-layer coordinate is simulated on its natural scale: a folded
//! Gaussian walk in `[0, 1]` with fixed natural-time steps `Δb`, each step
//! consuming clock time `ε^β Δb / α` of the layer it starts in. The walk
//! crosses the interface symmetrically, and its stationary layer occupation
//! is `p_π` exactly; the transient crossing error is `O(√Δb)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{InitialSupport, LocalMedium, ValidatedMedium};

/// Sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    /// Largest clock step; `None` selects `ε^β · 1e−3`.
    pub dt: Option<f64>,
    pub seed: u64,
}

impl McConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self { paths, dt: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub epsilon: f64,
    pub beta: f64,
    pub paths: usize,
    pub dt: f64,
    /// Natural-scale step `Δb` of the cross-layer walk.
    pub natural_step: f64,
    pub seed: u64,
    /// `ln` of the estimator (−∞ when every weight vanished).
    pub log_estimate: f64,
    /// Standard error of the estimator relative to its value.
    pub rel_std_error: f64,
    /// Paths with `g(X_t) = 0`.
    pub zero_paths: usize,
    /// Mean fraction of time in layer 1 and its standard error.
    pub occupation: (f64, f64),
    /// First-order bound on the bias in `ln u` from the interface crossing:
    /// `√Δb (t|c̃₁ − c̃₂|/ε + |a₁ − a₂|/a_min · |ln u|)`.
    pub interface_bias_bound: f64,
}

impl McRun {
    pub fn estimate(&self) -> f64 {
        self.log_estimate.exp()
    }

    pub fn eps_ln_estimate(&self) -> f64 {
        self.epsilon * self.log_estimate
    }
}

struct PathOutcome {
    log_weight: f64,
    occupation: f64,
}

fn fold(y: f64) -> f64 {
    let r = y.abs() % 2.0;
    if r > 1.0 { 2.0 - r } else { r }
}

struct Sampler<'a> {
    medium: &'a ValidatedMedium,
    fixed: Option<(LocalMedium, [DMatrix<f64>; 2])>,
    n: usize,
    m: f64,
    eps: f64,
    eps_beta: f64,
    natural_step: f64,
}

impl Sampler<'_> {
    fn at(&self, x: &[f64]) -> Result<(LocalMedium, [DMatrix<f64>; 2])> {
        if let Some(f) = &self.fixed {
            return Ok(f.clone());
        }
        let l = self.medium.local(x);
        let chol = |k: usize| {
            l.layers[k]
                .a
                .clone()
                .cholesky()
                .map(|c| c.l())
                .ok_or(Error::SingularMixture)
        };
        let c = [chol(0)?, chol(1)?];
        Ok((l, c))
    }

    fn path(&self, t: f64, x0: &[f64], y0: f64, g0: Option<&InitialSupport>, rng: &mut ChaCha8Rng) -> Result<PathOutcome> {
        let mut x = x0.to_vec();
        let mut y = y0;
        let mut clock = t;
        let mut integral = 0.0;
        let mut occ = 0.0;
        let mut xi = vec![0.0; self.n];
        while clock > 0.0 {
            let (local, chol) = self.at(&x)?;
            let k = usize::from(y >= self.m);
            let alpha = local.layers[k].alpha;
            let mut db = self.natural_step;
            let mut h = self.eps_beta * db / alpha;
            if h >= clock {
                h = clock;
                db = h * alpha / self.eps_beta;
            }
            let eta: f64 = StandardNormal.sample(rng);
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let s = (self.eps * h).sqrt();
            for i in 0..self.n {
                let mut inc = 0.0;
                for j in 0..=i {
                    inc += chol[k][(i, j)] * xi[j];
                }
                x[i] += s * inc;
            }
            integral += local.layers[k].c * h;
            if k == 0 {
                occ += h;
            }
            y = fold(y + db.sqrt() * eta);
            clock -= h;
        }
        let log_g = match g0 {
            None => 0.0,
            Some(g) if g.contains(&x) => 0.0,
            Some(_) => f64::NEG_INFINITY,
        };
        Ok(PathOutcome {
            log_weight: log_g + integral / self.eps,
            occupation: occ / t,
        })
    }
}

fn sampler<'a>(medium: &'a ValidatedMedium, beta: f64, epsilon: f64, dt: f64) -> Result<Sampler<'a>> {
    let n = medium.dimension();
    let fixed = if medium.is_homogeneous() {
        let l = medium.local(&vec![0.0; n]);
        let chol = |k: usize| {
            l.layers[k]
                .a
                .clone()
                .cholesky()
                .map(|c| c.l())
                .ok_or(Error::SingularMixture)
        };
        let c = [chol(0)?, chol(1)?];
        Some((l, c))
    } else {
        None
    };
    let eps_beta = epsilon.powf(beta);
    let natural_step = dt / eps_beta * medium.bounds().alpha_min;
    Ok(Sampler {
        medium,
        fixed,
        n,
        m: medium.m(),
        eps: epsilon,
        eps_beta,
        natural_step,
    })
}

fn check(beta: f64, epsilon: f64, t: f64, cfg: &McConfig) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} must be positive")));
    }
    if !beta.is_finite() || beta <= -1.0 {
        return Err(Error::InvalidInput(format!("beta = {beta} must exceed -1")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
    }
    if cfg.paths < 1000 {
        return Err(Error::InvalidInput(format!("{} paths requested (need at least 1000)", cfg.paths)));
    }
    let dt = cfg.dt.unwrap_or(epsilon.powf(beta) * 1e-3);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("step dt = {dt} must be positive")));
    }
    Ok(dt)
}

fn simulate(
    s: &Sampler<'_>,
    t: f64,
    x: &[f64],
    y0: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
    g0: Option<&InitialSupport>,
    cfg: &McConfig,
) -> Result<Vec<PathOutcome>> {
    (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let y = y0(&mut rng);
            s.path(t, x, y, g0, &mut rng)
        })
        .collect()
}

fn mean_se(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Estimates `u^ε(t, x, y) = E[1_{G₀}(X_t) exp(ε^{−1} ∫₀ᵗ c̃(X_s, Y_s) ds)]`.
pub fn mc_feynman_kac(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    g0: &InitialSupport,
    t: f64,
    x: &[f64],
    y: f64,
    cfg: &McConfig,
) -> Result<McRun> {
    let dt = check(beta, epsilon, t, cfg)?;
    g0.validate(medium.dimension())?;
    if x.len() != medium.dimension() {
        return Err(Error::DimensionMismatch {
            expected: medium.dimension(),
            found: x.len(),
        });
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidInput(format!("y = {y} outside [0, 1]")));
    }
    let s = sampler(medium, beta, epsilon, dt)?;
    let out = simulate(&s, t, x, |_| y, Some(g0), cfg)?;
    let max = out.iter().map(|o| o.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let zero_paths = out.iter().filter(|o| o.log_weight == f64::NEG_INFINITY).count();
    let (log_estimate, rel_std_error) = if max == f64::NEG_INFINITY {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let (mean, se) = mean_se(out.iter().map(|o| (o.log_weight - max).exp()));
        (max + mean.ln(), se / mean)
    };
    let occupation = mean_se(out.iter().map(|o| o.occupation));
    let b = medium.bounds();
    let local = medium.local(x);
    let dc = (local.layers[0].c - local.layers[1].c).abs();
    let da = (local.layers[0].a.clone() - local.layers[1].a.clone()).abs().max();
    let bias = s.natural_step.sqrt() * (t * dc / epsilon + da / b.a_min * log_estimate.abs().min(1e300));
    Ok(McRun {
        epsilon,
        beta,
        paths: cfg.paths,
        dt,
        natural_step: s.natural_step,
        seed: cfg.seed,
        log_estimate,
        rel_std_error,
        zero_paths,
        occupation,
        interface_bias_bound: bias,
    })
}

/// Mean fraction of `[0, t]` spent in layer 1, started from the stationary
/// law (density ∝ 1/α), with its standard error.
pub fn mc_occupation(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    t: f64,
    x: &[f64],
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    let v = mc_occupation_samples(medium, beta, epsilon, t, x, cfg)?;
    Ok(mean_se(v.iter().copied()))
}

/// Per-path fractions of `[0, t]` spent in layer 1, started from the
/// stationary law, in path order.
pub fn mc_occupation_samples(
    medium: &ValidatedMedium,
    beta: f64,
    epsilon: f64,
    t: f64,
    x: &[f64],
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    let dt = check(beta, epsilon, t, cfg)?;
    let s = sampler(medium, beta, epsilon, dt)?;
    let local = medium.local(x);
    let m = medium.m();
    let w1 = m / local.layers[0].alpha;
    let w2 = (1.0 - m) / local.layers[1].alpha;
    let p1 = w1 / (w1 + w2);
    let start = |rng: &mut ChaCha8Rng| {
        let u: f64 = rand::Rng::random(rng);
        if u < p1 { m * u / p1 } else { m + (1.0 - m) * (u - p1) / (1.0 - p1) }
    };
    let out = simulate(&s, t, x, start, None, cfg)?;
    Ok(out.into_iter().map(|o| o.occupation).collect())
}
