//! The `lambda`, `front` and `verify` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use layered_fronts::front::{FrontSet, GridMask, polygon_contains};
use layered_fronts::homog::HomogeneousModel;
use layered_fronts::medium::ValidatedMedium;
use layered_fronts::oracles::{McConfig, PdeConfig, epsilon_convergence_table, linear_pde_solve, mc_feynman_kac};
use layered_fronts::xdep::{PathPlan, XdepEngine, jump_demo_with};

use crate::CliError;
use crate::config::{
    DEFAULT_DIRECTIONS, DEFAULT_EPSILONS, DEFAULT_MC_EPSILON, DEFAULT_MC_PATHS, DEFAULT_PDE_DOMAIN, DEFAULT_PROBE_Y,
    DEFAULT_QUERY_POINTS, MediumSpec, RunConfig,
};
use crate::output::{Table, header, num, text};

/// Standard errors allowed between the Monte Carlo and PDE values of `ln u`.
pub const MC_SIGMAS: f64 = 3.0;
/// Absolute slack for the two-time nesting check.
pub const NESTING_TOL: f64 = 1e-9;

pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Failed checks; the files are still written.
    pub failures: Vec<String>,
}

pub fn lambda(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let med = cfg.medium()?;
    let regime = cfg.regime()?;
    let n = med.dimension();
    let times = cfg.times()?;
    let points = cfg.points(n)?;
    let mut files = Vec::new();
    if med.is_homogeneous() {
        let model = HomogeneousModel::new(&med, regime)?;
        let mut out = Table::create(dir, "lambda.csv", &header(&["t"], &[("x", n)], &["lambda", "p1", "p2"]))?;
        for &t in times {
            for x in points {
                let r = model.lambda(t, x)?;
                let mut row = vec![num(t)];
                row.extend(x.iter().map(|&v| num(v)));
                row.extend([num(r.value), num(r.argmax_p.p1), num(r.argmax_p.p2)]);
                out.row(row)?;
            }
        }
        files.push(out.finish()?);
    } else {
        let engine = XdepEngine::new(&med, regime)?;
        let dp = cfg.dp(n)?;
        let targets = cfg.targets(n)?;
        let mut out = Table::create(
            dir,
            "lambda.csv",
            &header(&["t"], &[("x", n), ("target", n)], &["lambda", "lambda_dp", "p1_mean", "p2_mean"]),
        )?;
        for &t in times {
            for x in points {
                for target in targets {
                    let r = engine.lambda(t, x, target, &dp)?;
                    let p1 = mean_p1(&r.plan);
                    let mut row = vec![num(t)];
                    row.extend(x.iter().chain(target).map(|&v| num(v)));
                    row.extend([num(r.value), num(r.dp_value), num(p1), num(1.0 - p1)]);
                    out.row(row)?;
                }
            }
        }
        files.push(out.finish()?);
    }
    Ok(Outcome {
        files,
        failures: Vec::new(),
    })
}

fn mean_p1(plan: &PathPlan) -> f64 {
    let total = plan.duration();
    plan.time_grid
        .windows(2)
        .zip(&plan.occupation)
        .map(|(w, p)| (w[1] - w[0]) * p.p1)
        .sum::<f64>()
        / total
}

pub fn front(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let med = cfg.medium()?;
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut report = String::new();
    if let MediumSpec::JumpExample { delta } = cfg.medium {
        let n = med.dimension();
        let dp = cfg.dp(n)?;
        let mut profile = Table::create(dir, "jump_profile.csv", &header(&["t", "s", "value"], &[], &[]))?;
        let mut body = String::new();
        for &t in cfg.times()?.iter().filter(|&&t| t > 0.0) {
            let r = jump_demo_with(delta, t, &dp)?;
            body.push_str(&r.to_text());
            body.push('\n');
            for &(s, v) in &r.profile {
                profile.row([num(t), num(s), num(v)])?;
            }
        }
        files.push(text(dir, "jump_report.txt", &body)?);
        files.push(profile.finish()?);
        if cfg.g0.is_some() {
            masks(cfg, &med, dir, &mut files, &mut report)?;
        }
    } else if med.is_homogeneous() {
        homogeneous_fronts(cfg, &med, dir, &mut files, &mut failures, &mut report)?;
    } else {
        masks(cfg, &med, dir, &mut files, &mut report)?;
    }
    if !report.is_empty() {
        files.push(text(dir, "front_report.txt", &report)?);
    }
    Ok(Outcome { files, failures })
}

fn homogeneous_fronts(
    cfg: &RunConfig,
    med: &ValidatedMedium,
    dir: &Path,
    files: &mut Vec<PathBuf>,
    failures: &mut Vec<String>,
    report: &mut String,
) -> Result<(), CliError> {
    let n = med.dimension();
    if n > 2 {
        return Err(CliError::Config(format!("front sets are drawn for n ≤ 2, medium has n = {n}")));
    }
    let model = HomogeneousModel::new(med, cfg.regime()?)?;
    let g0 = cfg.support(n)?;
    let directions = cfg.solver.directions.unwrap_or(DEFAULT_DIRECTIONS);
    let cols: &[&str] = if n == 1 {
        &["t", "piece", "lo", "hi"]
    } else {
        &["t", "piece", "vertex", "x1", "x2"]
    };
    let mut out = Table::create(dir, "front.csv", &header(cols, &[], &[]))?;
    let mut fronts = Vec::new();
    for &t in cfg.times()? {
        let f = model.front_set(&g0, t, directions)?;
        match &f {
            FrontSet::Intervals(iv) => {
                for (k, &(lo, hi)) in iv.iter().enumerate() {
                    out.row([num(t), k.to_string(), num(lo), num(hi)])?;
                }
            }
            FrontSet::Polygons(polys) => {
                for (k, poly) in polys.iter().enumerate() {
                    for (j, v) in poly.iter().enumerate() {
                        out.row([num(t), k.to_string(), j.to_string(), num(v[0]), num(v[1])])?;
                    }
                }
            }
            FrontSet::Mask(_) => unreachable!("homogeneous fronts are geometric"),
        }
        fronts.push((t, f));
    }
    files.push(out.finish()?);
    fronts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let _ = writeln!(report, "regime: {}", model.regime().name());
    for pair in fronts.windows(2) {
        let ((ta, fa), (tb, fb)) = (&pair[0], &pair[1]);
        let ok = nested(fa, fb);
        let _ = writeln!(
            report,
            "nesting G_{ta} within G_{tb}: {}",
            if ok { "ok" } else { "FAILED" }
        );
        if !ok {
            failures.push(format!("front at t = {ta} is not contained in the front at t = {tb}"));
        }
    }
    Ok(())
}

/// Whether every vertex of `inner` lies in `outer`.
fn nested(inner: &FrontSet, outer: &FrontSet) -> bool {
    match (inner, outer) {
        (FrontSet::Intervals(a), FrontSet::Intervals(_)) => a
            .iter()
            .all(|&(lo, hi)| outer.contains(&[lo], NESTING_TOL) && outer.contains(&[hi], NESTING_TOL)),
        (FrontSet::Polygons(a), FrontSet::Polygons(b)) => a.iter().flatten().all(|&v| {
            let tol = NESTING_TOL * (1.0 + v[0].abs() + v[1].abs());
            b.iter().any(|p| polygon_contains(p, v, tol))
        }),
        _ => false,
    }
}

fn masks(
    cfg: &RunConfig,
    med: &ValidatedMedium,
    dir: &Path,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<(), CliError> {
    let n = med.dimension();
    if n > 2 {
        return Err(CliError::Config(format!("reachable sets are computed for n ≤ 2, medium has n = {n}")));
    }
    let engine = XdepEngine::new(med, cfg.regime()?)?;
    let g0 = cfg.support(n)?;
    let dp = cfg.dp(n)?;
    let q = cfg.solver.query_points.unwrap_or(DEFAULT_QUERY_POINTS);
    if q < 2 {
        return Err(CliError::Config("solver.query_points must be at least 2".into()));
    }
    let bounds = med.bounding_box().expect("field media carry a box");
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
            (0..q).map(|i| lo + (hi - lo) * i as f64 / (q - 1) as f64).collect()
        })
        .collect();
    let mut out = Table::create(dir, "mask.csv", &header(&["t"], &[("x", n)], &["reached"]))?;
    let _ = writeln!(report, "regime: {}", engine.regime().name());
    for &t in cfg.times()? {
        let reach = engine.reachable_set(&g0, t, axes.clone(), &dp)?;
        let last: &GridMask = reach.masks.last().expect("at least one slab");
        for c in 0..last.len() {
            let mut row = vec![num(t)];
            row.extend(last.point(c).into_iter().map(num));
            row.push(u8::from(last.cells[c]).to_string());
            out.row(row)?;
        }
        let _ = writeln!(report, "t = {t}: {} of {} query points reached", last.count(), last.len());
        for j in reach.jumps() {
            let pts: Vec<String> = j.cells.iter().map(|&c| format!("{:?}", reach.masks[j.slab].point(c))).collect();
            let _ = writeln!(report, "  jump at s = {}: {}", j.time, pts.join(" "));
        }
    }
    files.push(out.finish()?);
    Ok(())
}

pub fn verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let med = cfg.medium()?;
    if !med.is_homogeneous() || med.dimension() != 1 {
        return Err(CliError::Config("verify needs a one-dimensional homogeneous medium".into()));
    }
    let beta = cfg.beta()?;
    let g0 = cfg.support(1)?;
    let t = *cfg
        .times()?
        .iter()
        .find(|&&t| t > 0.0)
        .ok_or_else(|| CliError::Config("times: verify needs a positive time".into()))?;
    let xs: Vec<f64> = cfg.points(1)?.iter().map(|p| p[0]).collect();
    let s = &cfg.solver;
    let eps = s.epsilons.clone().unwrap_or(DEFAULT_EPSILONS.to_vec());
    let [lo, hi] = s.pde_domain.unwrap_or(DEFAULT_PDE_DOMAIN);
    let y = s.probe_y.unwrap_or(DEFAULT_PROBE_Y);
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut report = String::new();

    let table = epsilon_convergence_table(&med, beta, &g0, t, &xs, &eps, y, (lo, hi))?;
    let mut out = Table::create(dir, "epsilon_table.csv", &header(&["epsilon", "x", "y", "eps_ln_u", "lambda", "gap"], &[], &[]))?;
    for r in &table.rows {
        out.row([num(r.epsilon), num(r.x), num(r.y), num(r.eps_ln_u), num(r.lambda), num(r.gap)])?;
    }
    files.push(out.finish()?);
    let _ = writeln!(report, "beta = {beta}, t = {t}, y = {y}");
    let _ = writeln!(report, "epsilon table: gaps {}", if table.monotone { "shrinking" } else { "NOT shrinking" });
    for v in &table.violations {
        let _ = writeln!(report, "  {v}");
        failures.push(v.clone());
    }

    let e = s.mc_epsilon.unwrap_or(DEFAULT_MC_EPSILON);
    let mc_cfg = McConfig::new(s.mc_paths.unwrap_or(DEFAULT_MC_PATHS), cfg.seed());
    let x = xs[0];
    let mc = mc_feynman_kac(&med, beta, e, &g0, t, &[x], y, &mc_cfg)?;
    let pde = linear_pde_solve(&med, beta, e, &g0, t, &PdeConfig::for_epsilon(e, lo, hi).refined(1))?;
    let ln_pde = pde.eps_ln_u_at(x, y) / e;
    let allowed = MC_SIGMAS * (mc.rel_std_error + mc.interface_bias_bound);
    let diff = (mc.log_estimate - ln_pde).abs();
    let agree = diff <= allowed;
    let mut out = Table::create(
        dir,
        "mc_pde.csv",
        &header(
            &["epsilon", "t", "x", "y", "paths", "seed", "mc_ln_u", "mc_rel_se", "bias_bound", "pde_ln_u", "abs_diff", "allowed", "agree"],
            &[],
            &[],
        ),
    )?;
    out.row([
        num(e),
        num(t),
        num(x),
        num(y),
        mc.paths.to_string(),
        mc.seed.to_string(),
        num(mc.log_estimate),
        num(mc.rel_std_error),
        num(mc.interface_bias_bound),
        num(ln_pde),
        num(diff),
        num(allowed),
        agree.to_string(),
    ])?;
    files.push(out.finish()?);
    let _ = writeln!(
        report,
        "monte carlo vs pde at epsilon = {e}, x = {x}: ln u {} vs {} (allowed {}): {}",
        mc.log_estimate,
        ln_pde,
        allowed,
        if agree { "agree" } else { "DISAGREE" }
    );
    if !agree {
        failures.push(format!("monte carlo and pde disagree: |{} - {}| > {allowed}", mc.log_estimate, ln_pde));
    }
    files.push(text(dir, "report.txt", &report)?);
    Ok(Outcome { files, failures })
}
