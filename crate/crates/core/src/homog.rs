//! Exponent, Finsler norm and Huygens fronts for media whose coefficients do
//! not depend on position.
//!
//! `λ(t, x) = t · ℓ(x / t)`, where `ℓ` is the local Lagrangian of the regime.
//! The norm is the unique `t` with `λ(t, x) = 0`; fronts are Minkowski sums
//! of the initial support with scaled unit balls.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::front::{convex_hull, merge_intervals, FrontSet};
use crate::medium::{euclid, InitialSupport, RegimeBeta, SimplexWeights, ValidatedMedium};
use crate::numeric::{brent_root, golden_max, maximize_concave};
use crate::rates::{growth_rate, LocalRates};

/// Relative tolerance of the norm root.
pub const NORM_RTOL: f64 = 1e-12;

/// Default number of sampled directions for unit balls and fronts.
pub const DEFAULT_DIRECTIONS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentResult {
    pub value: f64,
    pub argmax_p: SimplexWeights,
    pub regime: RegimeBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// Inside the front: the solution tends to one.
    One,
    /// Outside the front: the solution tends to zero.
    Zero,
    /// Within the tolerance band around the front.
    Boundary,
}

/// A homogeneous medium bound to a regime, with cached rate tables.
#[derive(Debug)]
pub struct HomogeneousModel {
    rates: LocalRates,
    regime: RegimeBeta,
    dimension: usize,
    c_max: f64,
    a_max: f64,
}

impl HomogeneousModel {
    pub fn new(medium: &ValidatedMedium, regime: RegimeBeta) -> Result<Self> {
        if !medium.is_homogeneous() {
            return Err(Error::InvalidInput("the homogeneous engine needs position-independent coefficients".into()));
        }
        let n = medium.dimension();
        let b = medium.bounds();
        Ok(Self {
            rates: LocalRates::new(medium.local(&vec![0.0; n]))?,
            regime,
            dimension: n,
            c_max: b.c_max,
            a_max: b.a_max,
        })
    }

    pub fn regime(&self) -> RegimeBeta {
        self.regime
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `λ(t, x)` with the maximising occupation proportions.
    pub fn lambda(&self, t: f64, x: &[f64]) -> Result<ExponentResult> {
        self.check_dim(x)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
        }
        let v: Vec<f64> = x.iter().map(|xi| xi / t).collect();
        let l = self.rates.lagrangian(self.regime, &v)?;
        Ok(ExponentResult {
            value: t * l.value,
            argmax_p: l.argmax,
            regime: self.regime,
        })
    }

    fn lambda_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.lambda(t, x).map(|r| r.value)
    }

    /// `sup_{x' ∈ G₀} λ(t, x − x')`.
    pub fn lambda_sup(&self, t: f64, x: &[f64], g0: &InitialSupport) -> Result<f64> {
        self.check_dim(x)?;
        g0.validate(self.dimension)?;
        match g0 {
            InitialSupport::Points(pts) => {
                let mut best = f64::NEG_INFINITY;
                for p in pts {
                    let y: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                    best = best.max(self.lambda_value(t, &y)?);
                }
                Ok(best)
            }
            InitialSupport::Interval { lo, hi } => {
                // λ is even and concave in x, so the nearest point of G₀ wins.
                let near = x[0].clamp(*lo, *hi);
                self.lambda_value(t, &[x[0] - near])
            }
            InitialSupport::Ball { center, radius } => {
                if euclid(x, center) <= *radius {
                    return self.lambda_value(t, &vec![0.0; self.dimension]);
                }
                match self.dimension {
                    1 => {
                        let near = x[0].clamp(center[0] - radius, center[0] + radius);
                        self.lambda_value(t, &[x[0] - near])
                    }
                    2 => {
                        let mut err = None;
                        let f = |th: f64| {
                            let y = [x[0] - center[0] - radius * th.cos(), x[1] - center[1] - radius * th.sin()];
                            self.lambda_value(t, &y).unwrap_or_else(|e| {
                                err = Some(e);
                                f64::NEG_INFINITY
                            })
                        };
                        let (_, v) = circle_max(f, x, center);
                        err.map_or(Ok(v), Err)
                    }
                    _ => Err(Error::InvalidInput("ball supports are supported for n ≤ 2".into())),
                }
            }
        }
    }

    /// The Finsler norm: the unique `t` with `λ(t, x) = 0`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Ok(0.0);
        }
        if !(self.c_max > 0.0) {
            return Err(Error::BracketFailure("finsler norm (no growth)"));
        }
        let pi = self.rates.invariant();
        let local = self.rates.local();
        let mix = &local.layers[0].a * pi.p1 + &local.layers[1].a * pi.p2;
        let mix_min = SymmetricEigen::new(mix).eigenvalues.min();
        let t_pi = growth_rate(local, pi);
        let mut lo = r / (2.0 * self.c_max * self.a_max).sqrt();
        let mut hi = if t_pi > 0.0 { r / (2.0 * t_pi * mix_min).sqrt() } else { 2.0 * lo };
        let mut f_lo = self.lambda_value(lo, x)?;
        let mut f_hi = self.lambda_value(hi, x)?;
        let mut guard = 0;
        while f_lo > 0.0 {
            lo *= 0.5;
            f_lo = self.lambda_value(lo, x)?;
            guard += 1;
            if guard > 200 {
                return Err(Error::BracketFailure("finsler norm"));
            }
        }
        while f_hi < 0.0 {
            hi *= 2.0;
            f_hi = self.lambda_value(hi, x)?;
            guard += 1;
            if guard > 200 {
                return Err(Error::BracketFailure("finsler norm"));
            }
        }
        let mut err = None;
        let t = brent_root(
            |t| {
                self.lambda_value(t, x).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                })
            },
            lo,
            hi,
            f_lo,
            f_hi,
            NORM_RTOL * hi,
            "finsler norm",
        );
        match err {
            Some(e) => Err(e),
            None => t,
        }
    }

    /// Points `e / ‖e‖` for evenly spaced unit directions `e` (two points for n = 1).
    pub fn unit_ball(&self, directions: usize) -> Result<Vec<Vec<f64>>> {
        match self.dimension {
            1 => Ok(vec![vec![-1.0 / self.norm(&[-1.0])?], vec![1.0 / self.norm(&[1.0])?]]),
            2 => {
                if directions < 8 {
                    return Err(Error::InvalidInput(format!("{directions} directions (need at least 8)")));
                }
                (0..directions)
                    .into_par_iter()
                    .map(|i| {
                        let th = 2.0 * PI * i as f64 / directions as f64;
                        let e = [th.cos(), th.sin()];
                        let nrm = self.norm(&e)?;
                        Ok(vec![e[0] / nrm, e[1] / nrm])
                    })
                    .collect()
            }
            _ => Err(Error::InvalidInput("unit balls are sampled for n ≤ 2".into())),
        }
    }

    /// `G_t = G₀ ⊕ t·B`, with `B` the sampled unit ball.
    pub fn front_set(&self, g0: &InitialSupport, t: f64, directions: usize) -> Result<FrontSet> {
        g0.validate(self.dimension)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("time t = {t} must be nonnegative")));
        }
        match self.dimension {
            1 => {
                let ball = self.unit_ball(directions)?;
                let (left, right) = (t * ball[0][0], t * ball[1][0]);
                let iv = match g0 {
                    InitialSupport::Points(p) => p.iter().map(|x| (x[0] + left, x[0] + right)).collect(),
                    InitialSupport::Interval { lo, hi } => vec![(lo + left, hi + right)],
                    InitialSupport::Ball { center, radius } => vec![(center[0] - radius + left, center[0] + radius + right)],
                };
                Ok(FrontSet::Intervals(merge_intervals(iv)))
            }
            2 => {
                let ball: Vec<[f64; 2]> = if t > 0.0 {
                    self.unit_ball(directions)?.into_iter().map(|p| [t * p[0], t * p[1]]).collect()
                } else {
                    vec![[0.0, 0.0]]
                };
                let polys = match g0 {
                    InitialSupport::Points(pts) => pts
                        .iter()
                        .map(|p| convex_hull(ball.iter().map(|b| [p[0] + b[0], p[1] + b[1]]).collect()))
                        .collect(),
                    InitialSupport::Ball { center, radius } => {
                        let mut pts = Vec::with_capacity(directions * ball.len());
                        for i in 0..directions.max(8) {
                            let th = 2.0 * PI * i as f64 / directions.max(8) as f64;
                            let d = [center[0] + radius * th.cos(), center[1] + radius * th.sin()];
                            pts.extend(ball.iter().map(|b| [d[0] + b[0], d[1] + b[1]]));
                        }
                        vec![convex_hull(pts)]
                    }
                    InitialSupport::Interval { .. } => unreachable!("validated as one-dimensional"),
                };
                Ok(FrontSet::Polygons(polys))
            }
            _ => Err(Error::InvalidInput("front sets are built for n ≤ 2".into())),
        }
    }

    /// Finsler distance from `x` to the support.
    pub fn distance(&self, g0: &InitialSupport, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        g0.validate(self.dimension)?;
        let diff = |p: &[f64]| -> Vec<f64> { x.iter().zip(p).map(|(a, b)| a - b).collect() };
        match g0 {
            InitialSupport::Points(pts) => {
                let mut best = f64::INFINITY;
                for p in pts {
                    best = best.min(self.norm(&diff(p))?);
                }
                Ok(best)
            }
            InitialSupport::Interval { lo, hi } => self.norm(&[x[0] - x[0].clamp(*lo, *hi)]),
            InitialSupport::Ball { center, radius } => {
                if euclid(x, center) <= *radius {
                    return Ok(0.0);
                }
                match self.dimension {
                    1 => self.norm(&[x[0] - x[0].clamp(center[0] - radius, center[0] + radius)]),
                    2 => {
                        let mut err = None;
                        let f = |th: f64| {
                            let y = [x[0] - center[0] - radius * th.cos(), x[1] - center[1] - radius * th.sin()];
                            -self.norm(&y).unwrap_or_else(|e| {
                                err = Some(e);
                                f64::INFINITY
                            })
                        };
                        let (_, v) = circle_max(f, x, center);
                        err.map_or(Ok(-v), Err)
                    }
                    _ => Err(Error::InvalidInput("ball supports are supported for n ≤ 2".into())),
                }
            }
        }
    }

    /// Three-valued position of `x` relative to `G_t`.
    pub fn classify(&self, g0: &InitialSupport, t: f64, x: &[f64]) -> Result<PointClass> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("time t = {t} must be positive")));
        }
        let tol = 1e-6 * (1.0 + t);
        let d = self.distance(g0, x)?;
        Ok(if d < t - tol {
            PointClass::One
        } else if d > t + tol {
            PointClass::Zero
        } else {
            PointClass::Boundary
        })
    }
}

/// Maximises `f(θ)` over the circle, scanning around the direction from the
/// centre towards `x` first.
fn circle_max<F: FnMut(f64) -> f64>(mut f: F, x: &[f64], center: &[f64]) -> (f64, f64) {
    let base = (x[1] - center[1]).atan2(x[0] - center[0]);
    let (th, v) = maximize_concave(|s| f(base + s), -PI, PI, 64, 1e-10);
    let (th2, v2) = golden_max(|s| f(base + s), th - 0.1, th + 0.1, 1e-10);
    if v2 > v {
        (base + th2, v2)
    } else {
        (base + th, v)
    }
}

/// `λ(t, x)` for a homogeneous medium.
pub fn lambda_point(medium: &ValidatedMedium, regime: RegimeBeta, t: f64, x: &[f64]) -> Result<ExponentResult> {
    HomogeneousModel::new(medium, regime)?.lambda(t, x)
}

/// `sup_{x' ∈ G₀} λ(t, x − x')` for a homogeneous medium.
pub fn lambda_sup_over_support(
    medium: &ValidatedMedium,
    regime: RegimeBeta,
    t: f64,
    x: &[f64],
    g0: &InitialSupport,
) -> Result<f64> {
    HomogeneousModel::new(medium, regime)?.lambda_sup(t, x, g0)
}

pub fn finsler_norm(medium: &ValidatedMedium, regime: RegimeBeta, x: &[f64]) -> Result<f64> {
    HomogeneousModel::new(medium, regime)?.norm(x)
}

pub fn unit_ball(medium: &ValidatedMedium, regime: RegimeBeta, directions: usize) -> Result<Vec<Vec<f64>>> {
    HomogeneousModel::new(medium, regime)?.unit_ball(directions)
}

pub fn front_set(medium: &ValidatedMedium, regime: RegimeBeta, g0: &InitialSupport, t: f64) -> Result<FrontSet> {
    HomogeneousModel::new(medium, regime)?.front_set(g0, t, DEFAULT_DIRECTIONS)
}

pub fn finsler_distance(medium: &ValidatedMedium, regime: RegimeBeta, g0: &InitialSupport, x: &[f64]) -> Result<f64> {
    HomogeneousModel::new(medium, regime)?.distance(g0, x)
}

pub fn classify_point(
    medium: &ValidatedMedium,
    regime: RegimeBeta,
    g0: &InitialSupport,
    t: f64,
    x: &[f64],
) -> Result<PointClass> {
    HomogeneousModel::new(medium, regime)?.classify(g0, t, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::is_convex;
    use crate::medium::{validate_medium, CompositeMedium, LayerCoefficients};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn medium1(m: f64, a: (f64, f64), alpha: (f64, f64), c: (f64, f64)) -> ValidatedMedium {
        validate_medium(&CompositeMedium::homogeneous(
            m,
            LayerCoefficients::isotropic(1, a.0, alpha.0, c.0),
            LayerCoefficients::isotropic(1, a.1, alpha.1, c.1),
        ))
        .unwrap()
    }

    fn identical(n: usize) -> ValidatedMedium {
        let l = LayerCoefficients::isotropic(n, 1.0, 1.0, 1.0);
        validate_medium(&CompositeMedium::homogeneous(0.5, l.clone(), l)).unwrap()
    }

    fn layered() -> ValidatedMedium {
        medium1(0.4, (1.0, 2.5), (1.0, 3.0), (0.3, 1.2))
    }

    #[test]
    fn identical_layers_closed_form() {
        let r = lambda_point(&identical(1), RegimeBeta::Equal, 1.0, &[1.0]).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-9);
        let nrm = finsler_norm(&identical(1), RegimeBeta::Equal, &[3.0]).unwrap();
        assert_abs_diff_eq!(nrm, 3.0 / 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn fast_and_slow_examples() {
        let m = medium1(0.5, (1.0, 1.0), (1.0, 1.0), (0.0, 2.0));
        let f = lambda_point(&m, RegimeBeta::Fast, 1.0, &[1.0]).unwrap();
        assert_abs_diff_eq!(f.value, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.argmax_p.p1, 0.5, epsilon = 1e-15);
        let s = lambda_point(&m, RegimeBeta::Slow, 1.0, &[1.0]).unwrap();
        assert_abs_diff_eq!(s.value, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn exponent_result_consistent_with_rates() {
        let med = layered();
        let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
        let (t, x) = (1.7, 0.9);
        let r = model.lambda(t, &[x]).unwrap();
        let local = med.local(&[0.0]);
        let direct = t
            * (growth_rate(&local, r.argmax_p)
                - crate::rates::occupation_rate(&local, r.argmax_p).unwrap()
                - crate::rates::kinetic_rate(&local, r.argmax_p, &[x / t]).unwrap());
        assert_abs_diff_eq!(r.value, direct, epsilon = 1e-9);
    }

    #[test]
    fn support_examples() {
        let med = identical(1);
        let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
        let g0 = InitialSupport::Interval { lo: -1.0, hi: 0.0 };
        let inside = model.lambda_sup(1.0, &[-0.5], &g0).unwrap();
        assert!(inside >= model.lambda(1.0, &[0.0]).unwrap().value - 1e-12);
        let pt = InitialSupport::point(vec![0.3]);
        assert_abs_diff_eq!(
            model.lambda_sup(2.0, &[1.0], &pt).unwrap(),
            model.lambda(2.0, &[0.7]).unwrap().value,
            epsilon = 1e-15
        );
        let med2 = identical(2);
        let model2 = HomogeneousModel::new(&med2, RegimeBeta::Equal).unwrap();
        let ball = InitialSupport::Ball {
            center: vec![0.0, 0.0],
            radius: 0.5,
        };
        let x = [1.2, -0.9];
        let r = (x[0] * x[0] + x[1] * x[1]) as f64;
        let r = r.sqrt();
        let proj = [(r - 0.5) * x[0] / r, (r - 0.5) * x[1] / r];
        assert_abs_diff_eq!(
            model2.lambda_sup(1.0, &x, &ball).unwrap(),
            model2.lambda(1.0, &proj).unwrap().value,
            epsilon = 1e-8
        );
    }

    #[test]
    fn anisotropic_unit_ball_is_ellipse() {
        let l = LayerCoefficients::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]), 1.0, 1.0);
        let med = validate_medium(&CompositeMedium::homogeneous(0.5, l.clone(), l)).unwrap();
        let ball = unit_ball(&med, RegimeBeta::Equal, 16).unwrap();
        assert_abs_diff_eq!(ball[0][0], 2f64.sqrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(ball[4][1], 2.0 * 2f64.sqrt(), epsilon = 1e-8);
        let poly: Vec<[f64; 2]> = ball.iter().map(|p| [p[0], p[1]]).collect();
        assert!(is_convex(&poly, 1e-6));
    }

    #[test]
    fn isotropic_unit_ball_is_circle() {
        let ball = unit_ball(&identical(2), RegimeBeta::Slow, 32).unwrap();
        for p in ball {
            assert_abs_diff_eq!((p[0] * p[0] + p[1] * p[1]).sqrt(), 2f64.sqrt(), epsilon = 1e-8);
        }
    }

    #[test]
    fn one_dimensional_front() {
        let med = identical(1);
        let g0 = InitialSupport::Interval { lo: -1.0, hi: 0.0 };
        let s2 = 2f64.sqrt();
        match front_set(&med, RegimeBeta::Equal, &g0, 0.7).unwrap() {
            FrontSet::Intervals(iv) => {
                assert_eq!(iv.len(), 1);
                assert_abs_diff_eq!(iv[0].0, -1.0 - 0.7 * s2, epsilon = 1e-9);
                assert_abs_diff_eq!(iv[0].1, 0.7 * s2, epsilon = 1e-9);
            }
            f => panic!("{f:?}"),
        }
        assert_eq!(front_set(&med, RegimeBeta::Equal, &g0, 0.0).unwrap(), FrontSet::Intervals(vec![(-1.0, 0.0)]));
        let pts = InitialSupport::Points(vec![vec![0.0], vec![1.0]]);
        match front_set(&med, RegimeBeta::Equal, &pts, 0.1).unwrap() {
            FrontSet::Intervals(iv) => assert_eq!(iv.len(), 2),
            f => panic!("{f:?}"),
        }
        match front_set(&med, RegimeBeta::Equal, &pts, 1.0).unwrap() {
            FrontSet::Intervals(iv) => assert_eq!(iv.len(), 1),
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn fronts_nest_in_time() {
        let med = layered();
        let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
        let g0 = InitialSupport::Interval { lo: -0.2, hi: 0.3 };
        let a = model.front_set(&g0, 0.5, 8).unwrap();
        let b = model.front_set(&g0, 1.0, 8).unwrap();
        if let (FrontSet::Intervals(a), FrontSet::Intervals(b)) = (a, b) {
            assert!(b[0].0 <= a[0].0 && a[0].1 <= b[0].1);
        } else {
            panic!();
        }
    }

    #[test]
    fn two_dimensional_front_contains_support() {
        let med = identical(2);
        let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
        let g0 = InitialSupport::Ball {
            center: vec![1.0, 0.0],
            radius: 0.5,
        };
        let f = model.front_set(&g0, 0.5, 64).unwrap();
        assert!(f.contains(&[1.4, 0.2], 0.0));
        let edge = 0.5 + 0.5 * 2f64.sqrt();
        assert!(f.contains(&[1.0 + edge - 1e-3, 0.0], 0.0));
        assert!(!f.contains(&[1.0 + edge + 1e-3, 0.0], 0.0));
    }

    #[test]
    fn classification() {
        let med = identical(1);
        let model = HomogeneousModel::new(&med, RegimeBeta::Equal).unwrap();
        let g0 = InitialSupport::Interval { lo: -1.0, hi: 0.0 };
        assert_eq!(model.classify(&g0, 1.0, &[-0.5]).unwrap(), PointClass::One);
        assert_eq!(model.classify(&g0, 1.0, &[2.0 * 2f64.sqrt()]).unwrap(), PointClass::Zero);
        assert_eq!(model.classify(&g0, 1.0, &[2f64.sqrt()]).unwrap(), PointClass::Boundary);
    }

    #[test]
    fn rejects_field_media() {
        let med = identical(1).as_field(crate::medium::BoundingBox::new(vec![-1.0], vec![1.0])).unwrap();
        assert!(HomogeneousModel::new(&med, RegimeBeta::Equal).is_err());
    }

    #[test]
    fn layer_relabelling_symmetry() {
        let med = layered();
        let sw = med.swapped();
        for regime in RegimeBeta::ALL {
            let a = HomogeneousModel::new(&med, regime).unwrap();
            let b = HomogeneousModel::new(&sw, regime).unwrap();
            for &(t, x) in &[(1.0, 0.3), (0.5, -1.2), (2.0, 2.5)] {
                let la = a.lambda(t, &[x]).unwrap().value;
                let lb = b.lambda(t, &[x]).unwrap().value;
                assert!((la - lb).abs() < 1e-8, "{regime:?} {la} {lb}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn superadditive(t1 in 0.1f64..3.0, t2 in 0.1f64..3.0, x1 in -4.0f64..4.0, x2 in -4.0f64..4.0) {
            let model = HomogeneousModel::new(&layered(), RegimeBeta::Equal).unwrap();
            let lhs = model.lambda(t1 + t2, &[x1 + x2]).unwrap().value;
            let rhs = model.lambda(t1, &[x1]).unwrap().value + model.lambda(t2, &[x2]).unwrap().value;
            prop_assert!(lhs >= rhs - 1e-8);
        }

        #[test]
        fn triangle_inequality(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let model = HomogeneousModel::new(&layered(), RegimeBeta::Equal).unwrap();
            prop_assert!(model.norm(&[x + y]).unwrap() <= model.norm(&[x]).unwrap() + model.norm(&[y]).unwrap() + 1e-8);
        }

        #[test]
        fn norm_regime_ordering(x in 0.1f64..3.0) {
            let med = layered();
            let n = |r| HomogeneousModel::new(&med, r).unwrap().norm(&[x]).unwrap();
            prop_assert!(n(RegimeBeta::Slow) <= n(RegimeBeta::Equal) + 1e-9);
            prop_assert!(n(RegimeBeta::Equal) <= n(RegimeBeta::Fast) + 1e-9);
        }
    }
}
