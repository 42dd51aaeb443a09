//! TOML run configuration. Every field has a default; command-line flags
//! override whatever the file says.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSystem, LinearModel, DEFAULT_DT};
use crate::entropy::bounds::SweepOptions;
use crate::entropy::spanning::CandidateClass;
use crate::error::{Error, Result};
use crate::recurrence::EstimateOptions;
use crate::setgeom::{CompactSet, Hyperrect};

/// A box given either as `{ center, radius }` or as `{ lower, upper }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BoxConfig {
    Ball { center: Vec<f64>, radius: Vec<f64> },
    Bounds { lower: Vec<f64>, upper: Vec<f64> },
}

impl BoxConfig {
    fn to_box(&self) -> Result<Hyperrect> {
        match self {
            BoxConfig::Ball { center, radius } => Hyperrect::new(center.clone(), radius.clone()),
            BoxConfig::Bounds { lower, upper } => Hyperrect::from_bounds(lower, upper),
        }
    }
}

/// `name` is one of `double_integrator`, `scalar_linear` (with `a`) or
/// `linear` (with `a_matrix` and `b_matrix`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_matrix: Option<Vec<Vec<f64>>>,
    /// Input box; defaults to `[-1, 1]^m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<BoxConfig>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            name: "double_integrator".into(),
            a: None,
            a_matrix: None,
            b_matrix: None,
            u: None,
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<ControlSystem> {
        let input = |m: usize| -> Result<Hyperrect> {
            match &self.u {
                Some(b) => b.to_box(),
                None => Hyperrect::cube(m, -1.0, 1.0),
            }
        };
        match self.name.as_str() {
            "double_integrator" => {
                if self.u.is_some() {
                    let model = ControlSystem::double_integrator().linear_model().cloned().expect("linear");
                    ControlSystem::linear("double_integrator", model, input(1)?)
                } else {
                    Ok(ControlSystem::double_integrator())
                }
            }
            "scalar_linear" => {
                let a = self.a.ok_or_else(|| Error::Config("system.a is required for scalar_linear".into()))?;
                ControlSystem::scalar_linear(a, input(1)?)
            }
            "linear" => {
                let a = self.a_matrix.clone().ok_or_else(|| Error::Config("system.a_matrix is required".into()))?;
                let b = self.b_matrix.clone().ok_or_else(|| Error::Config("system.b_matrix is required".into()))?;
                let m = b.first().map_or(0, Vec::len);
                ControlSystem::linear("linear", LinearModel { a, b }, input(m)?)
            }
            other => Err(Error::Config(format!("unknown system {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub samples_per_axis: usize,
    pub lipschitz_samples: usize,
    pub max_iters: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let d = EstimateOptions::default();
        Self {
            samples_per_axis: d.samples_per_axis,
            lipschitz_samples: d.lipschitz_samples,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub samples: usize,
    pub max_segments: usize,
    pub values_per_axis: usize,
    pub horizon: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let d = SweepOptions::default();
        Self {
            samples: 2000,
            max_segments: d.max_segments,
            values_per_axis: d.values_per_axis,
            horizon: d.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpanningConfig {
    pub horizons: Vec<f64>,
    pub eps: Vec<f64>,
    pub tau: Vec<f64>,
    pub init_delta: f64,
    pub values_per_axis: usize,
    pub segment_duration: f64,
    pub period_segments: Option<usize>,
    /// Also cover each (T, ε) under the invariance predicate.
    pub invariance: bool,
    pub dt: Option<f64>,
}

impl Default for SpanningConfig {
    fn default() -> Self {
        Self {
            horizons: vec![4.0, 6.0, 8.0],
            eps: vec![0.1],
            tau: vec![2.0, 3.0, 4.0],
            init_delta: 0.5,
            values_per_axis: 3,
            segment_duration: 1.0,
            period_segments: Some(2),
            invariance: true,
            dt: Some(0.01),
        }
    }
}

impl SpanningConfig {
    pub fn class(&self) -> CandidateClass {
        CandidateClass {
            values_per_axis: self.values_per_axis,
            segment_duration: self.segment_duration,
            period_segments: self.period_segments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    /// Boxes of `Q`; defaults to `[-1, 1]^n`.
    pub q: Option<Vec<BoxConfig>>,
    pub tau: f64,
    pub eps: f64,
    pub alpha: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    /// Initial state for episodes; drawn from `Q` with `seed` when absent.
    pub x0: Option<Vec<f64>>,
    /// Overrides the estimated Lipschitz constant for episodes.
    pub l_tau: Option<f64>,
    /// Make return-time failures of the reference controller fatal.
    pub strict: bool,
    pub estimate: EstimateConfig,
    pub sweep: Option<SweepConfig>,
    pub spanning: SpanningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            q: None,
            tau: 2.0,
            eps: 0.1,
            alpha: 0.0,
            dt: DEFAULT_DT,
            steps: 200,
            seed: 0,
            x0: None,
            l_tau: None,
            strict: false,
            estimate: EstimateConfig::default(),
            sweep: Some(SweepConfig::default()),
            spanning: SpanningConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("tau", self.tau), ("eps", self.eps), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<ControlSystem> {
        self.system.build()
    }

    pub fn build_q(&self, n: usize) -> Result<CompactSet> {
        match &self.q {
            None => Ok(Hyperrect::cube(n, -1.0, 1.0)?.into()),
            Some(boxes) => {
                let set = CompactSet::new(boxes.iter().map(BoxConfig::to_box).collect::<Result<_>>()?)?;
                if set.dim() != n {
                    return Err(Error::Config(format!("Q has dimension {}, system has {n}", set.dim())));
                }
                Ok(set)
            }
        }
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            samples_per_axis: self.estimate.samples_per_axis,
            lipschitz_samples: self.estimate.lipschitz_samples,
            seed: self.seed,
            max_iters: self.estimate.max_iters,
        }
    }

    pub fn sweep_options(&self) -> Option<SweepOptions> {
        self.sweep.as_ref().filter(|s| s.samples > 0).map(|s| SweepOptions {
            samples: s.samples,
            max_segments: s.max_segments,
            values_per_axis: s.values_per_axis,
            horizon: s.horizon,
            dt: self.dt,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_double_integrator() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.state_dim(), 2);
        assert_eq!(cfg.build_q(2).unwrap().bounding_box(), Hyperrect::cube(2, -1.0, 1.0).unwrap());
    }

    #[test]
    fn scalar_system_from_toml() {
        let text = r#"
            tau = 1.0
            [system]
            name = "scalar_linear"
            a = 1.0
            u = { lower = [-2.0], upper = [2.0] }
            [[q]]
            lower = [-1.0]
            upper = [1.0]
        "#;
        let cfg = RunConfig::parse(text).unwrap();
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.input_box().upper(), vec![2.0]);
        assert_eq!(cfg.build_q(1).unwrap().dim(), 1);
    }

    #[test]
    fn boxes_accept_center_radius() {
        let text = r#"
            [[q]]
            center = [0.0, 0.5]
            radius = [1.0, 0.5]
            [[q]]
            lower = [2.0, 0.0]
            upper = [3.0, 1.0]
        "#;
        let q = RunConfig::parse(text).unwrap().build_q(2).unwrap();
        assert_eq!(q.boxes()[0], Hyperrect::from_bounds(&[-1.0, 0.0], &[1.0, 1.0]).unwrap());
        assert_eq!(q.boxes()[1].center, vec![2.5, 0.5]);
        assert!(RunConfig::parse("[[q]]\ncenter = [0.0]\nupper = [1.0]").is_err());
    }

    #[test]
    fn errors_carry_location() {
        let err = RunConfig::parse("tau = \"two\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tau") && msg.contains("line 1"), "{msg}");
        assert!(RunConfig::parse("bogus = 1").is_err());
        let missing = RunConfig::parse("[system]\nname = \"scalar_linear\"").unwrap();
        assert!(matches!(missing.build_system(), Err(Error::Config(_))));
        let neg = RunConfig { eps: -1.0, ..Default::default() };
        assert!(neg.validate().is_err());
    }
}
