//! Tables of `ε ln u^ε` against the limiting exponent for decreasing `ε`.

use crate::error::{Error, Result};
use crate::homog::HomogeneousModel;
use crate::medium::{InitialSupport, RegimeBeta, ValidatedMedium};
use crate::oracles::pde::{PdeConfig, linear_pde_solve};

/// Relative slack allowed when a gap grows from one `ε` to the next.
pub const GAP_SLACK: f64 = 0.1;
/// Absolute slack for gaps already at the discretisation floor.
pub const GAP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub x: f64,
    pub y: f64,
    pub eps_ln_u: f64,
    pub lambda: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Gaps non-increasing in `ε` up to [`GAP_SLACK`] and [`GAP_FLOOR`].
    pub monotone: bool,
    pub violations: Vec<String>,
}

impl ConvergenceTable {
    pub fn gap(&self, epsilon: f64, x: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epsilon == epsilon && r.x == x)
            .map(|r| r.gap)
    }
}

/// Runs the linear solver for each `ε` and compares `ε ln u^ε(t, x, y)`
/// with `sup_{x' ∈ G₀} λ(t, x − x')`.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_convergence_table(
    medium: &ValidatedMedium,
    beta: f64,
    g0: &InitialSupport,
    t: f64,
    x_list: &[f64],
    eps_list: &[f64],
    y: f64,
    domain: (f64, f64),
) -> Result<ConvergenceTable> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.is_empty() {
        return Err(Error::InvalidInput("epsilon list must be non-empty and decreasing".into()));
    }
    for &eps in eps_list {
        let cfg = PdeConfig::for_epsilon(eps, domain.0, domain.1);
        if !(t > 10.0 * cfg.dt) {
            return Err(Error::InvalidInput(format!(
                "t = {t} must exceed 10 dt = {} at epsilon = {eps}",
                10.0 * cfg.dt
            )));
        }
    }
    if x_list.iter().any(|&x| x < domain.0 || x > domain.1) {
        return Err(Error::InvalidInput("query points must lie inside the PDE domain".into()));
    }
    let model = HomogeneousModel::new(medium, RegimeBeta::from_beta(beta)?)?;
    let lambdas: Vec<f64> = x_list
        .iter()
        .map(|&x| model.lambda_sup(t, &[x], g0))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let run = linear_pde_solve(medium, beta, eps, g0, t, &PdeConfig::for_epsilon(eps, domain.0, domain.1))?;
        for (&x, &lambda) in x_list.iter().zip(&lambdas) {
            let v = run.eps_ln_u_at(x, y);
            rows.push(ConvergenceRow {
                epsilon: eps,
                x,
                y,
                eps_ln_u: v,
                lambda,
                gap: (v - lambda).abs(),
            });
        }
    }
    let mut violations = Vec::new();
    for &x in x_list {
        let gaps: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.x == x).collect();
        for w in gaps.windows(2) {
            if w[1].gap > (1.0 + GAP_SLACK) * w[0].gap + GAP_FLOOR {
                violations.push(format!(
                    "x = {x}: gap {} at epsilon {} exceeds gap {} at epsilon {}",
                    w[1].gap, w[1].epsilon, w[0].gap, w[0].epsilon
                ));
            }
        }
    }
    Ok(ConvergenceTable {
        monotone: violations.is_empty(),
        rows,
        violations,
    })
}
