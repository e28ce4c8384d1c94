//! Two-layer composite media: per-layer coefficients, validation, and the
//! small value types (regimes, simplex weights, initial supports) shared by
//! every engine in the crate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance used when checking that simplex weights sum to one.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Number of grid divisions per axis used to check field coefficients.
pub const FIELD_CHECK_DIVISIONS: usize = 64;

/// Coefficients of one layer at a fixed position.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCoefficients {
    /// Slow diffusion matrix (symmetric positive definite, n×n).
    pub a: DMatrix<f64>,
    /// Fast diffusion coefficient across the layers.
    pub alpha: f64,
    /// Growth rate at `u = 0`.
    pub c: f64,
}

impl LayerCoefficients {
    pub fn new(a: DMatrix<f64>, alpha: f64, c: f64) -> Self {
        Self { a, alpha, c }
    }

    /// Layer with `a = a_scalar · I_n`.
    pub fn isotropic(n: usize, a_scalar: f64, alpha: f64, c: f64) -> Self {
        Self {
            a: DMatrix::identity(n, n) * a_scalar,
            alpha,
            c,
        }
    }
}

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Position-dependent coefficients of one layer.
#[derive(Clone)]
pub struct LayerField {
    pub a: MatrixField,
    pub alpha: ScalarField,
    pub c: ScalarField,
}

impl LayerField {
    /// Field that returns the same coefficients everywhere.
    pub fn constant(layer: LayerCoefficients) -> Self {
        let a = layer.a.clone();
        let (alpha, c) = (layer.alpha, layer.c);
        Self {
            a: Arc::new(move |_| a.clone()),
            alpha: Arc::new(move |_| alpha),
            c: Arc::new(move |_| c),
        }
    }

    pub fn at(&self, x: &[f64]) -> LayerCoefficients {
        LayerCoefficients {
            a: (self.a)(x),
            alpha: (self.alpha)(x),
            c: (self.c)(x),
        }
    }
}

impl fmt::Debug for LayerField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LayerField { .. }")
    }
}

impl PartialEq for LayerField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.a, &other.a) && Arc::ptr_eq(&self.alpha, &other.alpha) && Arc::ptr_eq(&self.c, &other.c)
    }
}

/// Axis-aligned box over which field coefficients are declared valid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }

    /// Clamp `x` into the box.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xi, (&lo, &hi))| xi.clamp(lo, hi))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Homogeneous([LayerCoefficients; 2]),
    Field {
        layers: [LayerField; 2],
        bounds: BoundingBox,
    },
}

/// Description of a two-layer medium, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeMedium {
    /// Interface position in `(0, 1)`.
    pub m: f64,
    pub dimension: usize,
    pub coefficients: Coefficients,
}

impl CompositeMedium {
    pub fn homogeneous(m: f64, layer1: LayerCoefficients, layer2: LayerCoefficients) -> Self {
        let dimension = layer1.a.nrows();
        Self {
            m,
            dimension,
            coefficients: Coefficients::Homogeneous([layer1, layer2]),
        }
    }

    pub fn field(m: f64, layer1: LayerField, layer2: LayerField, bounds: BoundingBox) -> Self {
        Self {
            m,
            dimension: bounds.dimension(),
            coefficients: Coefficients::Field {
                layers: [layer1, layer2],
                bounds,
            },
        }
    }
}

/// Coefficients of both layers at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMedium {
    pub m: f64,
    pub layers: [LayerCoefficients; 2],
}

impl LocalMedium {
    pub fn new(m: f64, layer1: LayerCoefficients, layer2: LayerCoefficients) -> Self {
        Self {
            m,
            layers: [layer1, layer2],
        }
    }

    pub fn dimension(&self) -> usize {
        self.layers[0].a.nrows()
    }

    pub fn alphas(&self) -> (f64, f64) {
        (self.layers[0].alpha, self.layers[1].alpha)
    }

    /// Bit pattern identifying the coefficients, for memoisation.
    pub(crate) fn key_bits(&self, out: &mut Vec<u64>) {
        out.push(self.m.to_bits());
        for l in &self.layers {
            out.push(l.alpha.to_bits());
            out.push(l.c.to_bits());
            let n = l.a.nrows();
            for i in 0..n {
                for j in i..n {
                    out.push(l.a[(i, j)].to_bits());
                }
            }
        }
    }
}

/// Uniform bounds on the coefficients over the declared region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl CoefficientBounds {
    fn empty() -> Self {
        Self {
            a_min: f64::INFINITY,
            a_max: 0.0,
            alpha_min: f64::INFINITY,
            alpha_max: 0.0,
            c_min: f64::INFINITY,
            c_max: f64::NEG_INFINITY,
        }
    }

    fn absorb(&mut self, layer: &LayerCoefficients, eig_min: f64, eig_max: f64) {
        self.a_min = self.a_min.min(eig_min);
        self.a_max = self.a_max.max(eig_max);
        self.alpha_min = self.alpha_min.min(layer.alpha);
        self.alpha_max = self.alpha_max.max(layer.alpha);
        self.c_min = self.c_min.min(layer.c);
        self.c_max = self.c_max.max(layer.c);
    }
}

/// A medium that passed validation, with cached bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedMedium {
    medium: CompositeMedium,
    bounds: CoefficientBounds,
}

impl ValidatedMedium {
    pub fn medium(&self) -> &CompositeMedium {
        &self.medium
    }

    pub fn m(&self) -> f64 {
        self.medium.m
    }

    pub fn dimension(&self) -> usize {
        self.medium.dimension
    }

    pub fn bounds(&self) -> CoefficientBounds {
        self.bounds
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.medium.coefficients, Coefficients::Homogeneous(_))
    }

    /// Declared box for field media, `None` for homogeneous ones.
    pub fn bounding_box(&self) -> Option<&BoundingBox> {
        match &self.medium.coefficients {
            Coefficients::Homogeneous(_) => None,
            Coefficients::Field { bounds, .. } => Some(bounds),
        }
    }

    /// Coefficients at position `x` (ignored for homogeneous media).
    pub fn local(&self, x: &[f64]) -> LocalMedium {
        match &self.medium.coefficients {
            Coefficients::Homogeneous(l) => LocalMedium::new(self.medium.m, l[0].clone(), l[1].clone()),
            Coefficients::Field { layers, .. } => LocalMedium::new(self.medium.m, layers[0].at(x), layers[1].at(x)),
        }
    }

    /// Same medium with the layers relabelled and `m` replaced by `1 − m`.
    pub fn swapped(&self) -> ValidatedMedium {
        let coefficients = match &self.medium.coefficients {
            Coefficients::Homogeneous([l1, l2]) => Coefficients::Homogeneous([l2.clone(), l1.clone()]),
            Coefficients::Field { layers: [l1, l2], bounds } => Coefficients::Field {
                layers: [l2.clone(), l1.clone()],
                bounds: bounds.clone(),
            },
        };
        ValidatedMedium {
            medium: CompositeMedium {
                m: 1.0 - self.medium.m,
                dimension: self.medium.dimension,
                coefficients,
            },
            bounds: self.bounds,
        }
    }

    /// Same layer functions viewed as x-dependent fields on `bounds`.
    pub fn as_field(&self, bounds: BoundingBox) -> Result<ValidatedMedium> {
        match &self.medium.coefficients {
            Coefficients::Homogeneous([l1, l2]) => validate_medium(&CompositeMedium::field(
                self.medium.m,
                LayerField::constant(l1.clone()),
                LayerField::constant(l2.clone()),
                bounds,
            )),
            Coefficients::Field { .. } => Ok(self.clone()),
        }
    }
}

fn check_layer(layer: &LayerCoefficients, index: usize, n: usize) -> Result<(f64, f64)> {
    if layer.a.nrows() != n || layer.a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if layer.a.nrows() != n { layer.a.nrows() } else { layer.a.ncols() },
        });
    }
    if layer.a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("layer {index}: non-finite diffusion matrix")));
    }
    let scale = layer.a.amax().max(1.0);
    if (&layer.a - layer.a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!("layer {index}: diffusion matrix is not symmetric")));
    }
    let eig = SymmetricEigen::new(layer.a.clone()).eigenvalues;
    let eig_min = eig.min();
    let eig_max = eig.max();
    if eig_min <= 0.0 {
        return Err(Error::NonPositiveDefinite {
            layer: index,
            min_eigenvalue: eig_min,
        });
    }
    if !(layer.alpha > 0.0) || !layer.alpha.is_finite() {
        return Err(Error::NonPositive {
            layer: index,
            name: "alpha",
            value: layer.alpha,
        });
    }
    if !(layer.c >= 0.0) || !layer.c.is_finite() {
        return Err(Error::NegativeGrowth {
            layer: index,
            value: layer.c,
        });
    }
    Ok((eig_min, eig_max))
}

/// Checks the medium and caches coefficient bounds.
///
/// Field media are sampled on a grid with `FIELD_CHECK_DIVISIONS` cells per
/// axis of their bounding box.
pub fn validate_medium(medium: &CompositeMedium) -> Result<ValidatedMedium> {
    if !(medium.m > 0.0 && medium.m < 1.0) {
        return Err(Error::InterfaceOutOfRange(medium.m));
    }
    let n = medium.dimension;
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let mut bounds = CoefficientBounds::empty();
    match &medium.coefficients {
        Coefficients::Homogeneous(layers) => {
            for (k, layer) in layers.iter().enumerate() {
                let (lo, hi) = check_layer(layer, k + 1, n)?;
                bounds.absorb(layer, lo, hi);
            }
        }
        Coefficients::Field { layers, bounds: bx } => {
            if bx.lower.len() != n || bx.upper.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: bx.lower.len().min(bx.upper.len()),
                });
            }
            if bx.lower.iter().zip(&bx.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
                return Err(Error::InvalidInput("bounding box must have lower < upper on every axis".into()));
            }
            let d = FIELD_CHECK_DIVISIONS;
            let total = (d + 1).pow(n as u32);
            let mut x = vec![0.0; n];
            for idx in 0..total {
                let mut rem = idx;
                for ax in 0..n {
                    let i = rem % (d + 1);
                    rem /= d + 1;
                    x[ax] = bx.lower[ax] + (bx.upper[ax] - bx.lower[ax]) * i as f64 / d as f64;
                }
                for (k, field) in layers.iter().enumerate() {
                    let layer = field.at(&x);
                    let (lo, hi) = check_layer(&layer, k + 1, n)?;
                    bounds.absorb(&layer, lo, hi);
                }
            }
        }
    }
    Ok(ValidatedMedium {
        medium: medium.clone(),
        bounds,
    })
}

/// Time-scale regime of the cross-layer diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeBeta {
    /// β = 1.
    Equal,
    /// β > 1.
    Fast,
    /// −1 < β < 1.
    Slow,
}

impl RegimeBeta {
    /// Maps a numeric exponent to its regime. β ≤ −1 is rejected.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= -1.0 {
            return Err(Error::InvalidInput(format!("beta = {beta} must be finite and greater than -1")));
        }
        Ok(if beta == 1.0 {
            RegimeBeta::Equal
        } else if beta > 1.0 {
            RegimeBeta::Fast
        } else {
            RegimeBeta::Slow
        })
    }

    /// Representative numeric exponent for the pre-limit oracles.
    pub fn default_beta(self) -> f64 {
        match self {
            RegimeBeta::Equal => 1.0,
            RegimeBeta::Fast => 2.0,
            RegimeBeta::Slow => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeBeta::Equal => "equal",
            RegimeBeta::Fast => "fast",
            RegimeBeta::Slow => "slow",
        }
    }

    pub const ALL: [RegimeBeta; 3] = [RegimeBeta::Equal, RegimeBeta::Fast, RegimeBeta::Slow];
}

/// Occupation proportions of the two layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexWeights {
    pub p1: f64,
    pub p2: f64,
}

impl SimplexWeights {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1 >= 0.0 && p2 >= 0.0 && p1 <= 1.0) || (p1 + p2 - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex { p1, p2 });
        }
        Ok(Self { p1, p2 })
    }

    /// `(p1, 1 − p1)` with `p1` clamped into `[0, 1]`.
    pub fn from_p1(p1: f64) -> Self {
        let p1 = p1.clamp(0.0, 1.0);
        Self { p1, p2: 1.0 - p1 }
    }
}

/// The initial support G₀.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSupport {
    /// Finite set of points.
    Points(Vec<Vec<f64>>),
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Closed interval in one dimension; either end may be infinite.
    Interval { lo: f64, hi: f64 },
}

impl InitialSupport {
    pub fn point(x: Vec<f64>) -> Self {
        InitialSupport::Points(vec![x])
    }

    pub fn dimension(&self) -> usize {
        match self {
            InitialSupport::Points(p) => p.first().map_or(0, |x| x.len()),
            InitialSupport::Ball { center, .. } => center.len(),
            InitialSupport::Interval { .. } => 1,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            InitialSupport::Points(pts) => {
                if pts.is_empty() {
                    return Err(Error::InvalidInput("empty point set".into()));
                }
                for p in pts {
                    if p.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: p.len(),
                        });
                    }
                    if p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidInput("non-finite support point".into()));
                    }
                }
            }
            InitialSupport::Ball { center, radius } => {
                if center.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: center.len(),
                    });
                }
                if !(*radius > 0.0) || !radius.is_finite() || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("ball radius {radius} must be positive and finite")));
                }
            }
            InitialSupport::Interval { lo, hi } => {
                if n != 1 {
                    return Err(Error::DimensionMismatch { expected: n, found: 1 });
                }
                if !(lo < hi) || lo.is_nan() || hi.is_nan() {
                    return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] must satisfy lo < hi")));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            InitialSupport::Points(pts) => pts.iter().any(|p| p.as_slice() == x),
            InitialSupport::Ball { center, radius } => euclid(x, center) <= *radius,
            InitialSupport::Interval { lo, hi } => x[0] >= *lo && x[0] <= *hi,
        }
    }

    /// Euclidean distance from `x` to the support.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            InitialSupport::Points(pts) => pts.iter().map(|p| euclid(x, p)).fold(f64::INFINITY, f64::min),
            InitialSupport::Ball { center, radius } => (euclid(x, center) - radius).max(0.0),
            InitialSupport::Interval { lo, hi } => (lo - x[0]).max(x[0] - hi).max(0.0),
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
