//! Occupation, kinetic and growth rates, and the local Lagrangian that
//! combines them for each regime.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::medium::{LocalMedium, RegimeBeta, SimplexWeights, ValidatedMedium};
use crate::numeric::{brent_root, golden_max, maximize_concave};
use crate::spectral::{invariant_proportions, reduced};

/// Largest dual variable `|f2 − f1|` explored before switching to the corner limit.
pub const DUAL_CAP: f64 = 1e6;

/// Number of pre-scan intervals for the sup over occupation proportions.
pub const P_SCAN: usize = 64;

/// Absolute tolerance of the golden-section refinement in `p1`.
pub const P_TOL: f64 = 1e-10;

/// Value of the local Lagrangian and the maximising proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianValue {
    pub value: f64,
    pub argmax: SimplexWeights,
}

/// Cost of spending all the time in one layer: the lowest Dirichlet–Neumann
/// eigenvalue of that layer.
pub fn corner_rate(alpha: f64, len: f64) -> f64 {
    alpha * PI * PI / (8.0 * len * len)
}

/// Occupation rate `S(p) = sup_f (p·f − H(f))` together with the optimal
/// potential difference `f2 − f1` (infinite at the corners).
pub fn occupation_rate_dual(local: &LocalMedium, p: SimplexWeights) -> Result<(f64, f64)> {
    let (a1, a2) = local.alphas();
    let m = local.m;
    let pi = invariant_proportions(a1, a2, m)?;
    let p2 = p.p2;
    if !(0.0..=1.0).contains(&p2) {
        return Err(Error::NotOnSimplex { p1: p.p1, p2: p.p2 });
    }
    if p2 == pi.p2 {
        return Ok((0.0, 0.0));
    }
    if p2 >= 1.0 {
        return Ok((corner_rate(a2, 1.0 - m), f64::INFINITY));
    }
    if p2 <= 0.0 {
        return Ok((corner_rate(a1, m), f64::NEG_INFINITY));
    }
    let occ = |d: f64| reduced(a1, a2, m, d).map(|(_, o)| o);
    let dir: f64 = if p2 > pi.p2 { 1.0 } else { -1.0 };
    let mut inner = 0.0;
    let mut g_inner = pi.p2 - p2;
    let mut step: f64 = 1.0;
    let mut outer;
    let mut g_outer;
    loop {
        outer = (dir * step).clamp(-DUAL_CAP, DUAL_CAP);
        g_outer = occ(outer)? - p2;
        if g_outer == 0.0 || g_outer.signum() != g_inner.signum() {
            break;
        }
        if outer.abs() >= DUAL_CAP {
            return chord_to_corner(local, p2, outer);
        }
        inner = outer;
        g_inner = g_outer;
        step *= 2.0;
    }
    let xtol = 1e-13 * outer.abs().max(1.0);
    let mut err = None;
    let d = brent_root(
        |d| match occ(d) {
            Ok(o) => o - p2,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        inner,
        outer,
        g_inner,
        g_outer,
        xtol,
        "occupation dual",
    );
    if let Some(e) = err {
        return Err(e);
    }
    let d = d?;
    let (h, _) = reduced(a1, a2, m, d)?;
    Ok(((p2 * d - h).max(0.0), d))
}

/// Between the proportion reached at the dual cap and the corner, `S` is
/// interpolated along the chord joining the two exact values.
fn chord_to_corner(local: &LocalMedium, p2: f64, d_cap: f64) -> Result<(f64, f64)> {
    let (a1, a2) = local.alphas();
    let m = local.m;
    let (h, occ_cap) = reduced(a1, a2, m, d_cap)?;
    let s_cap = occ_cap * d_cap - h;
    let (corner_p2, s_corner) = if d_cap > 0.0 {
        (1.0, corner_rate(a2, 1.0 - m))
    } else {
        (0.0, corner_rate(a1, m))
    };
    let span = corner_p2 - occ_cap;
    if span == 0.0 {
        return Ok((s_corner, d_cap));
    }
    let theta = ((p2 - occ_cap) / span).clamp(0.0, 1.0);
    Ok((s_cap + theta * (s_corner - s_cap), d_cap))
}

/// `S(p)` at the coefficients of one position.
pub fn occupation_rate(local: &LocalMedium, p: SimplexWeights) -> Result<f64> {
    occupation_rate_dual(local, p).map(|(s, _)| s)
}

/// `½ vᵀ (p1 a¹ + p2 a²)⁻¹ v`.
pub fn kinetic_rate(local: &LocalMedium, p: SimplexWeights, v: &[f64]) -> Result<f64> {
    let n = local.dimension();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if n == 1 {
        let mix = p.p1 * local.layers[0].a[(0, 0)] + p.p2 * local.layers[1].a[(0, 0)];
        if !(mix > 0.0) {
            return Err(Error::SingularMixture);
        }
        return Ok(0.5 * v[0] * v[0] / mix);
    }
    let mix: DMatrix<f64> = &local.layers[0].a * p.p1 + &local.layers[1].a * p.p2;
    let chol = mix.cholesky().ok_or(Error::SingularMixture)?;
    let rhs = DVector::from_column_slice(v);
    let sol = chol.solve(&rhs);
    Ok(0.5 * rhs.dot(&sol))
}

/// `p1 c¹ + p2 c²`.
pub fn growth_rate(local: &LocalMedium, p: SimplexWeights) -> f64 {
    p.p1 * local.layers[0].c + p.p2 * local.layers[1].c
}

/// Local Lagrangian `ℓ(x, v)` for a regime.
pub fn local_lagrangian(local: &LocalMedium, regime: RegimeBeta, v: &[f64]) -> Result<LagrangianValue> {
    LocalRates::new(local.clone())?.lagrangian(regime, v)
}

/// Rates at one position, with the occupation-rate pre-scan cached so that
/// repeated Lagrangian evaluations only pay for the refinement.
#[derive(Debug)]
pub struct LocalRates {
    local: LocalMedium,
    invariant: SimplexWeights,
    /// `(S, dual)` at `p1 = i / P_SCAN`.
    scan: OnceLock<Result<Vec<(f64, f64)>>>,
}

impl LocalRates {
    pub fn new(local: LocalMedium) -> Result<Self> {
        let (a1, a2) = local.alphas();
        let invariant = invariant_proportions(a1, a2, local.m)?;
        Ok(Self {
            local,
            invariant,
            scan: OnceLock::new(),
        })
    }

    pub fn local(&self) -> &LocalMedium {
        &self.local
    }

    pub fn invariant(&self) -> SimplexWeights {
        self.invariant
    }

    fn scan(&self) -> Result<&Vec<(f64, f64)>> {
        self.scan
            .get_or_init(|| {
                (0..=P_SCAN)
                    .map(|i| occupation_rate_dual(&self.local, SimplexWeights::from_p1(i as f64 / P_SCAN as f64)))
                    .collect()
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `ℓ(v)` for a regime.
    pub fn lagrangian(&self, regime: RegimeBeta, v: &[f64]) -> Result<LagrangianValue> {
        let local = &self.local;
        // Validates the velocity before any optimisation.
        let r_pi = kinetic_rate(local, self.invariant, v)?;
        match regime {
            RegimeBeta::Fast => Ok(LagrangianValue {
                value: growth_rate(local, self.invariant) - r_pi,
                argmax: self.invariant,
            }),
            RegimeBeta::Slow => {
                let (p1, value) = maximize_concave(
                    |p1| {
                        let p = SimplexWeights::from_p1(p1);
                        growth_rate(local, p) - kinetic_rate(local, p, v).unwrap_or(f64::INFINITY)
                    },
                    0.0,
                    1.0,
                    P_SCAN,
                    P_TOL,
                );
                Ok(LagrangianValue {
                    value,
                    argmax: SimplexWeights::from_p1(p1),
                })
            }
            RegimeBeta::Equal => self.equal_regime(v),
        }
    }

    fn objective(&self, p: SimplexWeights, s: f64, v: &[f64]) -> f64 {
        growth_rate(&self.local, p) - s - kinetic_rate(&self.local, p, v).unwrap_or(f64::INFINITY)
    }

    /// Pre-scan on the `p1` grid, then golden-section in `asinh` of the dual
    /// variable over the bracketing cell pair. The dual parametrisation is
    /// monotone in `p`, so the objective stays unimodal along it.
    fn equal_regime(&self, v: &[f64]) -> Result<LagrangianValue> {
        let scan = self.scan()?;
        let mut best_i = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, &(s, _)) in scan.iter().enumerate() {
            let val = self.objective(SimplexWeights::from_p1(i as f64 / P_SCAN as f64), s, v);
            if val > best_v {
                best_v = val;
                best_i = i;
            }
        }
        let (a1, a2) = self.local.alphas();
        let m = self.local.m;
        let dual_at = |i: usize| scan[i].1.clamp(-DUAL_CAP, DUAL_CAP);
        // p1 increases with i, the dual decreases.
        let d_hi = dual_at(best_i.saturating_sub(1));
        let d_lo = dual_at((best_i + 1).min(P_SCAN));
        let mut err = None;
        let (u, val) = golden_max(
            |u| {
                let d = u.sinh();
                match reduced(a1, a2, m, d) {
                    Ok((h, occ2)) => self.objective(SimplexWeights::from_p1(1.0 - occ2), occ2 * d - h, v),
                    Err(e) => {
                        err = Some(e);
                        f64::NEG_INFINITY
                    }
                }
            },
            d_lo.asinh(),
            d_hi.asinh(),
            P_TOL,
        );
        if let Some(e) = err {
            return Err(e);
        }
        if val > best_v {
            let (_, occ2) = reduced(a1, a2, m, u.sinh())?;
            Ok(LagrangianValue {
                value: val,
                argmax: SimplexWeights::from_p1(1.0 - occ2),
            })
        } else {
            Ok(LagrangianValue {
                value: best_v,
                argmax: SimplexWeights::from_p1(best_i as f64 / P_SCAN as f64),
            })
        }
    }
}

/// The rate ingredients of a medium, evaluated at positions.
#[derive(Debug, Clone, Copy)]
pub struct RateBundle<'a> {
    medium: &'a ValidatedMedium,
}

impl<'a> RateBundle<'a> {
    pub fn new(medium: &'a ValidatedMedium) -> Self {
        Self { medium }
    }

    pub fn occupation(&self, p: SimplexWeights, x: &[f64]) -> Result<f64> {
        occupation_rate(&self.medium.local(x), p)
    }

    pub fn kinetic(&self, p: SimplexWeights, x: &[f64], v: &[f64]) -> Result<f64> {
        kinetic_rate(&self.medium.local(x), p, v)
    }

    pub fn growth(&self, p: SimplexWeights, x: &[f64]) -> f64 {
        growth_rate(&self.medium.local(x), p)
    }

    pub fn invariant(&self, x: &[f64]) -> Result<SimplexWeights> {
        let l = self.medium.local(x);
        invariant_proportions(l.layers[0].alpha, l.layers[1].alpha, l.m)
    }

    pub fn lagrangian(&self, regime: RegimeBeta, x: &[f64], v: &[f64]) -> Result<LagrangianValue> {
        local_lagrangian(&self.medium.local(x), regime, v)
    }
}
