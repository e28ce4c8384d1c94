//! Run configuration: JSON on disk, validated into library types.

use std::path::Path;
use std::sync::Arc;

use layered_fronts::medium::{
    BoundingBox, CompositeMedium, InitialSupport, LayerCoefficients, LayerField, RegimeBeta, ValidatedMedium,
    validate_medium,
};
use layered_fronts::xdep::{DpConfig, jump_bounds, jump_medium};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumSpec,
    /// `equal`, `fast` or `slow`; must agree with `beta` when both are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<SupportSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// End points `x'` for position-dependent media.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    Equal,
    Fast,
    Slow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumSpec {
    Homogeneous {
        m: f64,
        layers: [LayerSpec; 2],
    },
    /// Nodal values on a tensor grid, interpolated multilinearly and held
    /// constant outside it.
    Tabulated {
        m: f64,
        axes: Vec<Vec<f64>>,
        layers: [TabulatedLayer; 2],
    },
    JumpExample {
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub a: DiffusionSpec,
    pub alpha: f64,
    pub c: f64,
}

/// A scalar means `a·I` in dimension `solver.dimension` (default 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// Row-major nodal values (last axis fastest); `a` is isotropic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedLayer {
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportSpec {
    /// `null` ends are infinite.
    Interval { lo: Option<f64>, hi: Option<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Directions sampled on the unit ball in two dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_scale: Option<usize>,
    /// Query points per axis for reachable-set masks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde_domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slabs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach_tol: Option<f64>,
}

/// What every command writes next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
}

pub const DEFAULT_DIRECTIONS: usize = 256;
pub const DEFAULT_QUERY_POINTS: usize = 41;
pub const DEFAULT_EPSILONS: [f64; 3] = [0.2, 0.1, 0.05];
pub const DEFAULT_PDE_DOMAIN: [f64; 2] = [-3.0, 3.0];
pub const DEFAULT_PROBE_Y: f64 = 0.25;
pub const DEFAULT_MC_PATHS: usize = 4000;
pub const DEFAULT_MC_EPSILON: f64 = 0.1;

/// Reads either a bare config or a manifest written by an earlier run.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let is_manifest = value.get("command").is_some() && value.get("config").is_some();
    if is_manifest {
        let m: Manifest = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(m.config)
    } else {
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }
}

impl RunConfig {
    pub fn regime(&self) -> Result<RegimeBeta, CliError> {
        match (self.beta, self.regime) {
            (Some(b), named) => {
                let r = RegimeBeta::from_beta(b).map_err(|e| CliError::Config(e.to_string()))?;
                if let Some(n) = named {
                    if n.to_regime() != r {
                        return Err(CliError::Config(format!(
                            "regime `{}` contradicts beta = {b}",
                            n.to_regime().name()
                        )));
                    }
                }
                Ok(r)
            }
            (None, Some(n)) => Ok(n.to_regime()),
            (None, None) => Ok(RegimeBeta::Equal),
        }
    }

    /// Numeric β for the pre-limit solvers.
    pub fn beta(&self) -> Result<f64, CliError> {
        Ok(self.beta.unwrap_or(self.regime()?.default_beta()))
    }

    pub fn medium(&self) -> Result<ValidatedMedium, CliError> {
        let med = match &self.medium {
            MediumSpec::Homogeneous { m, layers } => {
                let n = self.solver.dimension.unwrap_or_else(|| match &layers[0].a {
                    DiffusionSpec::Matrix(rows) => rows.len(),
                    DiffusionSpec::Scalar(_) => 1,
                });
                let l1 = layers[0].build(n, 1)?;
                let l2 = layers[1].build(n, 2)?;
                validate_medium(&CompositeMedium::homogeneous(*m, l1, l2))
            }
            MediumSpec::Tabulated { m, axes, layers } => {
                let table = Table::new(axes)?;
                let bounds = BoundingBox::new(
                    axes.iter().map(|a| a[0]).collect(),
                    axes.iter().map(|a| a[a.len() - 1]).collect(),
                );
                let l1 = table.layer(&layers[0], 1)?;
                let l2 = table.layer(&layers[1], 2)?;
                validate_medium(&CompositeMedium::field(*m, l1, l2, bounds))
            }
            MediumSpec::JumpExample { delta } => {
                if !(*delta > 0.0 && *delta <= 0.01) {
                    return Err(CliError::Config(format!("medium.delta = {delta} must lie in (0, 0.01]")));
                }
                jump_medium(*delta, jump_bounds())
            }
        };
        med.map_err(|e| CliError::Config(format!("medium: {e}")))
    }

    pub fn support(&self, n: usize) -> Result<InitialSupport, CliError> {
        let spec = self.g0.as_ref().ok_or_else(|| CliError::Config("missing key `g0`".into()))?;
        let g0 = match spec {
            SupportSpec::Interval { lo, hi } => InitialSupport::Interval {
                lo: lo.unwrap_or(f64::NEG_INFINITY),
                hi: hi.unwrap_or(f64::INFINITY),
            },
            SupportSpec::Ball { center, radius } => InitialSupport::Ball {
                center: center.clone(),
                radius: *radius,
            },
            SupportSpec::Points { points } => InitialSupport::Points(points.clone()),
        };
        g0.validate(n).map_err(|e| CliError::Config(format!("g0: {e}")))?;
        Ok(g0)
    }

    pub fn dp(&self, n: usize) -> Result<DpConfig, CliError> {
        let mut cfg = DpConfig::default_for(n);
        if let Some(d) = &self.solver.dp {
            cfg.cells = d.cells.unwrap_or(cfg.cells);
            cfg.slabs = d.slabs.unwrap_or(cfg.slabs);
            cfg.cone = d.cone.unwrap_or(cfg.cone);
            cfg.max_lag = d.max_lag.unwrap_or(cfg.max_lag);
            cfg.lattice = d.lattice.unwrap_or(cfg.lattice);
            cfg.refine = d.refine.unwrap_or(cfg.refine);
            cfg.sweeps = d.sweeps.unwrap_or(cfg.sweeps);
            cfg.reach_tol = d.reach_tol.unwrap_or(cfg.reach_tol);
        }
        if cfg.cells < 3 || cfg.slabs < 1 || cfg.cone < 1 || cfg.max_lag < 1 || cfg.lattice < 1 {
            return Err(CliError::Config("solver.dp: cells ≥ 3 and slabs, cone, max_lag, lattice ≥ 1".into()));
        }
        match self.solver.grid_scale {
            Some(0) => Err(CliError::Config("solver.grid_scale must be at least 1".into())),
            Some(f) => Ok(cfg.scaled(f)),
            None => Ok(cfg),
        }
    }

    pub fn seed(&self) -> u64 {
        self.solver.seed.unwrap_or(0)
    }

    pub fn times(&self) -> Result<&[f64], CliError> {
        if self.times.is_empty() {
            return Err(CliError::Config("missing key `times`".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(CliError::Config(format!("times: {t} is not a nonnegative number")));
        }
        Ok(&self.times)
    }

    pub fn points(&self, n: usize) -> Result<&[Vec<f64>], CliError> {
        check_points("points", &self.points, n)?;
        Ok(&self.points)
    }

    pub fn targets(&self, n: usize) -> Result<&[Vec<f64>], CliError> {
        check_points("targets", &self.targets, n)?;
        Ok(&self.targets)
    }
}

fn check_points(key: &str, pts: &[Vec<f64>], n: usize) -> Result<(), CliError> {
    if pts.is_empty() {
        return Err(CliError::Config(format!("missing key `{key}`")));
    }
    if let Some(p) = pts.iter().find(|p| p.len() != n) {
        return Err(CliError::Config(format!("{key}: {p:?} has {} coordinates, expected {n}", p.len())));
    }
    Ok(())
}

impl RegimeName {
    pub fn to_regime(self) -> RegimeBeta {
        match self {
            RegimeName::Equal => RegimeBeta::Equal,
            RegimeName::Fast => RegimeBeta::Fast,
            RegimeName::Slow => RegimeBeta::Slow,
        }
    }
}

impl LayerSpec {
    fn build(&self, n: usize, layer: usize) -> Result<LayerCoefficients, CliError> {
        let a = match &self.a {
            DiffusionSpec::Scalar(s) => DMatrix::from_diagonal_element(n, n, *s),
            DiffusionSpec::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::Config(format!("medium.layers[{}].a must be {n}×{n}", layer - 1)));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        Ok(LayerCoefficients::new(a, self.alpha, self.c))
    }
}

/// Tensor grid with multilinear interpolation.
#[derive(Clone)]
struct Table {
    axes: Arc<Vec<Vec<f64>>>,
    len: usize,
}

impl Table {
    fn new(axes: &[Vec<f64>]) -> Result<Self, CliError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(CliError::Config("medium.axes: one or two axes".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) || a.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("medium.axes[{k}] must be increasing with at least 2 nodes")));
            }
        }
        Ok(Self {
            len: axes.iter().map(Vec::len).product(),
            axes: Arc::new(axes.to_vec()),
        })
    }

    fn field(&self, values: &[f64], key: &str) -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, CliError> {
        if values.len() != self.len {
            return Err(CliError::Config(format!("{key}: {} values for {} grid nodes", values.len(), self.len)));
        }
        let axes = self.axes.clone();
        let values = Arc::new(values.to_vec());
        Ok(Arc::new(move |x: &[f64]| interpolate(&axes, &values, x)))
    }

    fn layer(&self, spec: &TabulatedLayer, layer: usize) -> Result<LayerField, CliError> {
        let n = self.axes.len();
        let key = |name: &str| format!("medium.layers[{}].{name}", layer - 1);
        let a = self.field(&spec.a, &key("a"))?;
        Ok(LayerField {
            a: Arc::new(move |x: &[f64]| DMatrix::from_diagonal_element(n, n, a(x))),
            alpha: self.field(&spec.alpha, &key("alpha"))?,
            c: self.field(&spec.c, &key("c"))?,
        })
    }
}

fn interpolate(axes: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    let mut base = Vec::with_capacity(axes.len());
    let mut frac = Vec::with_capacity(axes.len());
    for (a, &xi) in axes.iter().zip(x) {
        let xi = xi.clamp(a[0], a[a.len() - 1]);
        let i = a.partition_point(|&v| v <= xi).clamp(1, a.len() - 1) - 1;
        base.push(i);
        frac.push((xi - a[i]) / (a[i + 1] - a[i]));
    }
    let mut total = 0.0;
    for corner in 0..(1usize << axes.len()) {
        let mut w = 1.0;
        let mut idx = 0;
        for k in 0..axes.len() {
            let up = (corner >> k) & 1;
            w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
            idx = idx * axes[k].len() + base[k] + up;
        }
        if w != 0.0 {
            total += w * values[idx];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_nodes_and_bilinear_functions() {
        let axes = vec![vec![0.0, 1.0, 3.0], vec![-1.0, 1.0]];
        let f = |x: f64, y: f64| 2.0 + x - 3.0 * y + 0.5 * x * y;
        let vals: Vec<f64> = axes[0].iter().flat_map(|&x| axes[1].iter().map(move |&y| f(x, y))).collect();
        for &(x, y) in &[(0.0, -1.0), (3.0, 1.0), (0.4, 0.2), (2.2, -0.7)] {
            assert!((interpolate(&axes, &vals, &[x, y]) - f(x, y)).abs() < 1e-12);
        }
        assert!((interpolate(&axes, &vals, &[9.0, 0.0]) - f(3.0, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn manifest_and_bare_config_parse_alike() {
        let bare = r#"{"medium":{"kind":"jump_example","delta":0.001},"times":[1.5]}"#;
        let cfg = parse(bare).unwrap();
        let man = serde_json::to_string(&Manifest {
            command: "front".into(),
            version: "0".into(),
            config: cfg.clone(),
        })
        .unwrap();
        assert_eq!(parse(&man).unwrap(), cfg);
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
          "medium": {"kind": "tabulated", "m": 0.3, "axes": [[-1.0, 1.0], [0.0, 0.5, 2.0]],
            "layers": [
              {"a": [1, 1, 1, 1, 1, 1], "alpha": [1, 2, 3, 4, 5, 6], "c": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]},
              {"a": [2, 2, 2, 2, 2, 2], "alpha": [1, 1, 1, 1, 1, 1], "c": [1, 1, 1, 1, 1, 0.3333333333333333]}]},
          "regime": "slow", "beta": 0.25,
          "g0": {"shape": "interval", "lo": null, "hi": 0.1},
          "times": [0.1, 1e-7], "points": [[0.1, 0.2]], "targets": [[0.0, 0.0]],
          "solver": {"directions": 12, "dp": {"cells": 9, "refine": false, "reach_tol": 1e-9},
                     "grid_scale": 2, "query_points": 5, "epsilons": [0.3, 0.1], "pde_domain": [-1, 1],
                     "probe_y": 0.7, "mc_paths": 1000, "mc_epsilon": 0.05, "seed": 18446744073709551615},
          "output": "runs/a"
        }"#;
        let cfg = parse(text).unwrap();
        let again = parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.solver.seed, Some(u64::MAX));
        let homog = parse(r#"{"medium": {"kind": "homogeneous", "m": 0.5, "layers": [
            {"a": [[1.0, 0.1], [0.1, 2.0]], "alpha": 1.0, "c": 0.1}, {"a": 3.0, "alpha": 2.0, "c": 0.2}]}}"#)
        .unwrap();
        assert_eq!(parse(&serde_json::to_string(&homog).unwrap()).unwrap(), homog);
        assert_eq!(homog.medium().unwrap().dimension(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"medium":{"kind":"jump_example","delta":0.001},"colour":1}"#;
        assert!(matches!(parse(bad), Err(CliError::Config(_))));
        let nested = r#"{"medium":{"kind":"jump_example","delta":0.001,"x":1}}"#;
        assert!(matches!(parse(nested), Err(CliError::Config(_))));
    }

    #[test]
    fn regime_and_beta_must_agree() {
        let mut cfg = parse(r#"{"medium":{"kind":"jump_example","delta":0.001}}"#).unwrap();
        cfg.beta = Some(2.0);
        assert_eq!(cfg.regime().unwrap(), RegimeBeta::Fast);
        cfg.regime = Some(RegimeName::Slow);
        assert!(cfg.regime().is_err());
    }
}
