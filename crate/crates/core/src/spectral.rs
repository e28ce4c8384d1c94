//! Top eigenvalue of `(α(y)/2) u'' + f u` on `[0, 1]` with Neumann ends and
//! a C¹ gluing at `y = m`, for layer-wise constant `α` and `f`.
//!
//! In each layer the positive eigenfunction is a `cosh` (or `cos`) centred on
//! the outer wall, so matching the logarithmic derivative at `m` gives a
//! scalar equation that is increasing in the eigenvalue. The occupation
//! gradient `∂H/∂f_k` is the share of `∫ u² · 2/α` carried by layer `k`,
//! which has a closed form for these eigenfunctions.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::medium::SimplexWeights;
use crate::numeric::{brent_root, solve_tridiagonal};

/// Layer-wise constant potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialPair {
    pub f1: f64,
    pub f2: f64,
}

impl PotentialPair {
    pub fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    /// Top eigenvalue.
    pub h: f64,
    /// `(∂H/∂f1, ∂H/∂f2)`, the occupation proportions of the tilted process.
    pub occ_grad: [f64; 2],
    /// `(y, u(y))` samples of the eigenfunction, normalised by `u(m) = 1`.
    pub eigenfunction: Option<Vec<(f64, f64)>>,
}

/// Log-derivative contribution of one layer: `u'/u` seen from the interface,
/// oriented so that the matching condition is `g1 + g2 = 0`.
fn layer_slope(z: f64, len: f64) -> f64 {
    if z > 0.0 {
        let w = z.sqrt();
        w * (w * len).tanh()
    } else if z < 0.0 {
        let k = (-z).sqrt();
        let arg = k * len;
        if arg >= FRAC_PI_2 {
            f64::NEG_INFINITY
        } else {
            -k * arg.tan()
        }
    } else {
        0.0
    }
}

/// `∫ u²` over one layer for the eigenfunction normalised to 1 at `m`.
fn layer_mass(z: f64, len: f64) -> f64 {
    if z > 0.0 {
        let w = z.sqrt();
        let ch = (w * len).cosh();
        len / (2.0 * ch * ch) + (w * len).tanh() / (2.0 * w)
    } else if z < 0.0 {
        let k = (-z).sqrt();
        let cs = (k * len).cos();
        len / (2.0 * cs * cs) + (k * len).tan() / (2.0 * k)
    } else {
        len
    }
}

fn layer_profile(z: f64, dist: f64, len: f64) -> f64 {
    if z > 0.0 {
        let w = z.sqrt();
        // cosh(w·dist)/cosh(w·len) without overflow
        let e = (-w * (len - dist)).exp();
        e * (1.0 + (-2.0 * w * dist).exp()) / (1.0 + (-2.0 * w * len).exp())
    } else if z < 0.0 {
        let k = (-z).sqrt();
        (k * dist).cos() / (k * len).cos()
    } else {
        1.0
    }
}

fn check_inputs(alpha1: f64, alpha2: f64, m: f64) -> Result<()> {
    if !(alpha1 > 0.0) || !alpha1.is_finite() {
        return Err(Error::NonPositive {
            layer: 1,
            name: "alpha",
            value: alpha1,
        });
    }
    if !(alpha2 > 0.0) || !alpha2.is_finite() {
        return Err(Error::NonPositive {
            layer: 2,
            name: "alpha",
            value: alpha2,
        });
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InterfaceOutOfRange(m));
    }
    Ok(())
}

/// Eigenvalue and layer-2 occupation for the potential `(0, d)`.
pub(crate) fn reduced(alpha1: f64, alpha2: f64, m: f64, d: f64) -> Result<(f64, f64)> {
    let (h, z1, z2) = reduced_root(alpha1, alpha2, m, d)?;
    let w1 = layer_mass(z1, m) / alpha1;
    let w2 = layer_mass(z2, 1.0 - m) / alpha2;
    Ok((h, w2 / (w1 + w2)))
}

fn reduced_root(alpha1: f64, alpha2: f64, m: f64, d: f64) -> Result<(f64, f64, f64)> {
    if !d.is_finite() {
        return Err(Error::NumericalOverflow("potential difference"));
    }
    let l1 = m;
    let l2 = 1.0 - m;
    let zs = |h: f64| (2.0 * h / alpha1, 2.0 * (h - d) / alpha2);
    if d == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let matching = |h: f64| {
        let (z1, z2) = zs(h);
        layer_slope(z1, l1) + layer_slope(z2, l2)
    };
    let hi = d.max(0.0);
    let floor = (-alpha1 * PI * PI / (8.0 * l1 * l1)).max(d - alpha2 * PI * PI / (8.0 * l2 * l2));
    let mut lo = floor.max(d.min(0.0));
    let f_hi = matching(hi);
    if f_hi <= 0.0 {
        if f_hi == 0.0 {
            let (z1, z2) = zs(hi);
            return Ok((hi, z1, z2));
        }
        return Err(Error::BracketingFailure(format!("matching function negative at max potential (d = {d})")));
    }
    let mut f_lo = matching(lo);
    let mut upper = hi;
    let mut steps = 0;
    while !(f_lo.is_finite() && f_lo < 0.0) {
        steps += 1;
        if steps > 200 {
            return Err(Error::BracketingFailure(format!("no sign change below the first pole (d = {d})")));
        }
        let mid = 0.5 * (lo + upper);
        let fm = matching(mid);
        if fm == 0.0 {
            let (z1, z2) = zs(mid);
            return Ok((mid, z1, z2));
        }
        if !fm.is_finite() || fm < 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            upper = mid;
        }
    }
    let f_up = matching(upper);
    let xtol = 1e-14 * (upper - lo).abs().max(1.0);
    let h = brent_root(matching, lo, upper, f_lo, f_up, xtol, "principal eigenvalue")?;
    let (z1, z2) = zs(h);
    Ok((h, z1, z2))
}

/// Top eigenvalue, occupation gradient and (optionally) eigenfunction samples.
pub fn principal_eigenvalue(alpha1: f64, alpha2: f64, m: f64, f: PotentialPair) -> Result<SpectralSolution> {
    solve(alpha1, alpha2, m, f, 0)
}

/// As [`principal_eigenvalue`], also sampling the eigenfunction at `samples`
/// evenly spaced points of `[0, 1]`.
pub fn principal_eigenvalue_sampled(
    alpha1: f64,
    alpha2: f64,
    m: f64,
    f: PotentialPair,
    samples: usize,
) -> Result<SpectralSolution> {
    solve(alpha1, alpha2, m, f, samples.max(2))
}

fn solve(alpha1: f64, alpha2: f64, m: f64, f: PotentialPair, samples: usize) -> Result<SpectralSolution> {
    check_inputs(alpha1, alpha2, m)?;
    if !f.f1.is_finite() || !f.f2.is_finite() {
        return Err(Error::InvalidInput("potential must be finite".into()));
    }
    let d = f.f2 - f.f1;
    let (h0, z1, z2) = reduced_root(alpha1, alpha2, m, d)?;
    let w1 = layer_mass(z1, m) / alpha1;
    let w2 = layer_mass(z2, 1.0 - m) / alpha2;
    let occ2 = w2 / (w1 + w2);
    let eigenfunction = (samples > 0).then(|| {
        (0..samples)
            .map(|i| {
                let y = i as f64 / (samples - 1) as f64;
                let u = if y <= m {
                    layer_profile(z1, y, m)
                } else {
                    layer_profile(z2, 1.0 - y, 1.0 - m)
                };
                (y, u)
            })
            .collect()
    });
    Ok(SpectralSolution {
        h: h0 + f.f1,
        occ_grad: [1.0 - occ2, occ2],
        eigenfunction,
    })
}

/// Stationary layer proportions, proportional to `ℓ_k / α_k`.
pub fn invariant_proportions(alpha1: f64, alpha2: f64, m: f64) -> Result<SimplexWeights> {
    check_inputs(alpha1, alpha2, m)?;
    let w1 = m / alpha1;
    let w2 = (1.0 - m) / alpha2;
    let z = w1 + w2;
    Ok(SimplexWeights { p1: w1 / z, p2: w2 / z })
}

/// Finite-difference tridiagonal discretisation of the operator with a grid
/// node on the interface.
pub(crate) struct InterfaceGrid {
    pub nodes: Vec<f64>,
    pub interface: usize,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Weights in which the operator is symmetric.
    pub weights: Vec<f64>,
}

impl InterfaceGrid {
    /// Discretises `(α/2) ∂²` (no potential) on `points` nodes.
    pub fn new(alpha1: f64, alpha2: f64, m: f64, points: usize) -> Result<Self> {
        let n1 = (m * (points - 1) as f64).round() as usize;
        let n2 = points - 1 - n1;
        if n1 == 0 || n2 == 0 {
            return Err(Error::GridMissesInterface);
        }
        let h1 = m / n1 as f64;
        let h2 = (1.0 - m) / n2 as f64;
        let mut nodes = Vec::with_capacity(points);
        for i in 0..=n1 {
            nodes.push(h1 * i as f64);
        }
        for j in 1..=n2 {
            nodes.push(m + h2 * j as f64);
        }
        nodes[points - 1] = 1.0;
        let mut lower = vec![0.0; points];
        let mut diag = vec![0.0; points];
        let mut upper = vec![0.0; points];
        let mut weights = vec![0.0; points];
        for i in 0..points {
            if i == n1 {
                let w = h1 / alpha1 + h2 / alpha2;
                lower[i] = 1.0 / (h1 * w);
                upper[i] = 1.0 / (h2 * w);
                diag[i] = -(lower[i] + upper[i]);
                weights[i] = 0.5 * w;
                continue;
            }
            let (alpha, h) = if i < n1 { (alpha1, h1) } else { (alpha2, h2) };
            let k = 0.5 * alpha / (h * h);
            if i == 0 {
                upper[i] = 2.0 * k;
                diag[i] = -2.0 * k;
                weights[i] = 0.5 * h / alpha;
            } else if i == points - 1 {
                lower[i] = 2.0 * k;
                diag[i] = -2.0 * k;
                weights[i] = 0.5 * h / alpha;
            } else {
                lower[i] = k;
                upper[i] = k;
                diag[i] = -2.0 * k;
                weights[i] = h / alpha;
            }
        }
        Ok(Self {
            nodes,
            interface: n1,
            lower,
            diag,
            upper,
            weights,
        })
    }

    /// Layer index (0 or 1) owning the potential at node `i`; the interface
    /// node mixes both and is reported separately by [`Self::mix`].
    pub fn mix(&self, i: usize, alpha1: f64, alpha2: f64) -> (f64, f64) {
        if i < self.interface {
            (1.0, 0.0)
        } else if i > self.interface {
            (0.0, 1.0)
        } else {
            let h1 = self.nodes[i] - self.nodes[i - 1];
            let h2 = self.nodes[i + 1] - self.nodes[i];
            let w1 = h1 / alpha1;
            let w2 = h2 / alpha2;
            (w1 / (w1 + w2), w2 / (w1 + w2))
        }
    }
}

/// Top eigenvalue of the finite-difference matrix on `grid_points` nodes,
/// by shifted inverse iteration with a weighted Rayleigh quotient.
pub fn principal_eigenvalue_oracle(alpha1: f64, alpha2: f64, m: f64, f: PotentialPair, grid_points: usize) -> Result<f64> {
    check_inputs(alpha1, alpha2, m)?;
    if grid_points < 16 {
        return Err(Error::GridTooCoarse(format!("{grid_points} grid points (need at least 16)")));
    }
    let g = InterfaceGrid::new(alpha1, alpha2, m, grid_points)?;
    let n = grid_points;
    let pot: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = g.mix(i, alpha1, alpha2);
            a * f.f1 + b * f.f2
        })
        .collect();
    let fmax = f.f1.max(f.f2);
    let shift = fmax + 0.05 * (1.0 + (f.f1 - f.f2).abs());
    let shifted: Vec<f64> = (0..n).map(|i| g.diag[i] + pot[i] - shift).collect();
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut v = (g.diag[i] + pot[i]) * u[i];
            if i > 0 {
                v += g.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += g.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
    };
    let mut u = vec![1.0; n];
    let mut au = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut last = f64::NAN;
    const MAX_ITER: usize = 500;
    for _ in 0..MAX_ITER {
        solve_tridiagonal(&g.lower, &shifted, &g.upper, &mut u, &mut scratch);
        let norm = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalOverflow("inverse iteration"));
        }
        u.iter_mut().for_each(|v| *v /= norm);
        apply(&u, &mut au);
        let num: f64 = (0..n).map(|i| g.weights[i] * u[i] * au[i]).sum();
        let den: f64 = (0..n).map(|i| g.weights[i] * u[i] * u[i]).sum();
        let rq = num / den;
        if (rq - last).abs() <= 1e-14 * (1.0 + rq.abs()) {
            return Ok(rq);
        }
        last = rq;
    }
    Err(Error::NoConvergence {
        what: "inverse iteration",
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h(alpha1: f64, alpha2: f64, m: f64, f1: f64, f2: f64) -> f64 {
        principal_eigenvalue(alpha1, alpha2, m, PotentialPair::new(f1, f2)).unwrap().h
    }

    #[test]
    fn constant_potential() {
        let s = principal_eigenvalue(2.0, 1.0, 2.0 / 3.0, PotentialPair::new(1.7, 1.7)).unwrap();
        assert_eq!(s.h, 1.7);
        assert_abs_diff_eq!(s.occ_grad[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn step_potential_value() {
        // Frozen from an independent bisection of the matching equation.
        let s = principal_eigenvalue(1.0, 1.0, 0.5, PotentialPair::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(s.h, 0.541341233468723, epsilon = 1e-12);
        assert!((s.h - 0.542).abs() <= 2e-3);
        assert_abs_diff_eq!(s.occ_grad[0], 0.41796, epsilon = 1e-5);
    }

    #[test]
    fn shift_invariance_exact() {
        for &(f1, f2, s) in &[(0.0, 1.0, 3.25), (-2.0, 0.5, -1.5), (1.0, -4.0, 0.125)] {
            let a = h(1.0, 3.0, 0.4, f1, f2);
            let b = h(1.0, 3.0, 0.4, f1 + s, f2 + s);
            assert!((b - a - s).abs() <= 1e-12, "{a} {b} {s}");
        }
    }

    #[test]
    fn invariant_proportion_examples() {
        let p = invariant_proportions(2.0, 1.0, 2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(p.p1, 0.5, epsilon = 1e-15);
        let p = invariant_proportions(1.0, 3.0, 0.5).unwrap();
        assert_abs_diff_eq!(p.p1, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(p.p2, 0.25, epsilon = 1e-15);
        let p = invariant_proportions(1.5, 1.5, 0.3).unwrap();
        assert_abs_diff_eq!(p.p1, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn occupation_at_equal_potential_is_invariant_measure() {
        let p = invariant_proportions(1.0, 3.0, 0.35).unwrap();
        let s = principal_eigenvalue(1.0, 3.0, 0.35, PotentialPair::new(0.2, 0.2 + 1e-300)).unwrap();
        assert_abs_diff_eq!(s.occ_grad[0], p.p1, epsilon = 1e-8);
    }

    #[test]
    fn corner_limits() {
        // Layer 2 strongly favoured: H − f2 tends to −α2π²/(8(1−m)²).
        let hh = h(1.0, 1.0, 0.5, -1e9, 0.0);
        assert!((hh + PI * PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn eigenfunction_positive_and_glued() {
        let s = principal_eigenvalue_sampled(1.0, 4.0, 0.3, PotentialPair::new(-3.0, 2.0), 1025).unwrap();
        let ef = s.eigenfunction.unwrap();
        assert!(ef.iter().all(|&(_, u)| u > 0.0));
        let near: Vec<_> = ef.iter().filter(|(y, _)| (y - 0.3).abs() < 2e-3).collect();
        for w in near.windows(2) {
            assert!((w[0].1 - w[1].1).abs() < 1e-2);
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let hh = principal_eigenvalue_oracle(1.0, 2.0, 0.4, PotentialPair::new(0.7, 0.7), 64).unwrap();
        assert_abs_diff_eq!(hh, 0.7, epsilon = 1e-10);
        let hh = principal_eigenvalue_oracle(4.0, 1.0, 0.5, PotentialPair::new(0.0, 0.0), 128).unwrap();
        assert!(hh.abs() < 1e-8);
        assert!(principal_eigenvalue_oracle(1.0, 1.0, 0.5, PotentialPair::new(0.0, 1.0), 8).is_err());
    }

    #[test]
    fn oracle_converges_to_characteristic_root() {
        let exact = h(1.0, 3.0, 0.37, 0.0, 1.5);
        let e1 = principal_eigenvalue_oracle(1.0, 3.0, 0.37, PotentialPair::new(0.0, 1.5), 257).unwrap() - exact;
        let e2 = principal_eigenvalue_oracle(1.0, 3.0, 0.37, PotentialPair::new(0.0, 1.5), 513).unwrap() - exact;
        assert!(e2.abs() < e1.abs());
        assert!(e2.abs() < 1e-4);
    }

    #[test]
    fn oracle_fine_grid_step_potential() {
        let exact = h(1.0, 1.0, 0.5, 0.0, 1.0);
        let fd = principal_eigenvalue_oracle(1.0, 1.0, 0.5, PotentialPair::new(0.0, 1.0), 2048).unwrap();
        assert!((fd - exact).abs() <= 1e-5, "{fd} vs {exact}");
    }

    #[test]
    fn bad_inputs() {
        assert!(principal_eigenvalue(0.0, 1.0, 0.5, PotentialPair::new(0.0, 1.0)).is_err());
        assert!(principal_eigenvalue(1.0, 1.0, 1.0, PotentialPair::new(0.0, 1.0)).is_err());
        assert!(principal_eigenvalue(1.0, 1.0, 0.5, PotentialPair::new(f64::NAN, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn bounded_by_potential(a1 in 0.05f64..20.0, a2 in 0.05f64..20.0, m in 0.02f64..0.98,
                                f1 in -50.0f64..50.0, f2 in -50.0f64..50.0) {
            let s = principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2)).unwrap();
            prop_assert!(s.h >= f1.min(f2) - 1e-12 && s.h <= f1.max(f2) + 1e-12);
            prop_assert!(s.occ_grad[0] >= 0.0 && s.occ_grad[1] >= 0.0);
            prop_assert!((s.occ_grad[0] + s.occ_grad[1] - 1.0).abs() < 1e-8);
            if f1 != f2 {
                prop_assert!(s.h > f1.min(f2) && s.h < f1.max(f2));
            }
        }

        #[test]
        fn convex_in_potential(a1 in 0.1f64..10.0, a2 in 0.1f64..10.0, m in 0.05f64..0.95,
                               f in prop::array::uniform4(-10.0f64..10.0), th in 0.0f64..1.0) {
            let mix = |u: f64, v: f64| th * u + (1.0 - th) * v;
            let hm = h(a1, a2, m, mix(f[0], f[2]), mix(f[1], f[3]));
            prop_assert!(hm <= mix(h(a1, a2, m, f[0], f[1]), h(a1, a2, m, f[2], f[3])) + 1e-9);
        }

        #[test]
        fn monotone_in_potential(a1 in 0.1f64..10.0, a2 in 0.1f64..10.0, m in 0.05f64..0.95,
                                 f1 in -10.0f64..10.0, f2 in -10.0f64..10.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
            prop_assert!(h(a1, a2, m, f1, f2) <= h(a1, a2, m, f1 + d1, f2 + d2) + 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(a1 in 0.1f64..10.0, a2 in 0.1f64..10.0, m in 0.05f64..0.95,
                                               f1 in -10.0f64..10.0, f2 in -10.0f64..10.0) {
            let s = principal_eigenvalue(a1, a2, m, PotentialPair::new(f1, f2)).unwrap();
            let e = 1e-5;
            let g1 = (h(a1, a2, m, f1 + e, f2) - h(a1, a2, m, f1 - e, f2)) / (2.0 * e);
            let g2 = (h(a1, a2, m, f1, f2 + e) - h(a1, a2, m, f1, f2 - e)) / (2.0 * e);
            prop_assert!((g1 - s.occ_grad[0]).abs() < 1e-5, "{} {}", g1, s.occ_grad[0]);
            prop_assert!((g2 - s.occ_grad[1]).abs() < 1e-5);
        }
    }
}
