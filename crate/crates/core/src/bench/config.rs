//! Declarative experiment files.

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmName, AlgorithmSpec};
use crate::error::{Error, Result};
use crate::fixed_point::{NormKind, SpectralConfig, StepScope, Tolerances};
use crate::model_api::InnerSolver;

use super::ModelKind;

/// One experiment: a model, a list of solvers and the sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelKind,
    /// Parameter overrides on top of the model's benchmark calibration.
    #[serde(default)]
    pub params: toml::Table,
    /// Grid overrides.
    #[serde(default)]
    pub grid: toml::Table,
    #[serde(default)]
    pub solver: SolverSettings,
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

/// Overrides of [`SpectralConfig`] fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub lambda: Option<f64>,
    pub alpha0: Option<f64>,
    pub tol: Option<f64>,
    pub tol_value: Option<f64>,
    pub tol_action: Option<f64>,
    pub norm: Option<NormKind>,
    pub step_scope: Option<StepScope>,
    pub max_iter: Option<usize>,
    pub divergence_threshold: Option<f64>,
}

impl SolverSettings {
    pub fn apply(&self, cfg: &mut SpectralConfig) {
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.alpha0 {
            cfg.alpha0 = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = Tolerances::uniform(v);
        }
        if let Some(v) = self.tol_value {
            cfg.tol.value = v;
        }
        if let Some(v) = self.tol_action {
            cfg.tol.action = v;
        }
        if let Some(v) = self.norm {
            cfg.norm = v;
        }
        if let Some(v) = self.step_scope {
            cfg.step_scope = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.divergence_threshold {
            cfg.divergence_threshold = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub name: AlgorithmName,
    #[serde(default = "yes")]
    pub spectral: bool,
    #[serde(default)]
    pub inner_solver: Option<InnerSolver>,
    #[serde(default)]
    pub star_updated_actions: bool,
    /// A run that fails to converge makes the experiment fail.
    #[serde(default = "yes")]
    pub required: bool,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn yes() -> bool {
    true
}

impl AlgorithmEntry {
    pub fn new(name: AlgorithmName, spectral: bool) -> Self {
        Self {
            name,
            spectral,
            inner_solver: None,
            star_updated_actions: false,
            required: true,
            lambda: None,
            alpha0: None,
            max_iter: None,
        }
    }
}

/// Sweep axes; an empty axis means "use the base value only".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub lambda: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub n_firms: Vec<usize>,
    pub theta2: Vec<f64>,
    pub step_scope: Vec<StepScope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Periods simulated for accuracy checks; `None` picks the model default
    /// (10 000 for growth, 100 for the investment game).
    pub length: Option<usize>,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            length: None,
            burn_in: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    #[serde(alias = "markdown")]
    Md,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub format: OutputFormat,
    pub path: Option<String>,
}

/// One fully specified solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub spec: AlgorithmSpec,
    pub required: bool,
    pub n_firms: Option<usize>,
    pub theta2: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.algorithms.is_empty() {
            return bad("experiment lists no algorithms".into());
        }
        let games = matches!(self.model, ModelKind::InvestGame | ModelKind::PakesMcguire);
        if !games && !self.sweep.n_firms.is_empty() {
            return bad(format!("model `{}` has no n_firms axis", self.model.key()));
        }
        if self.model != ModelKind::PakesMcguire && !self.sweep.theta2.is_empty() {
            return bad(format!("model `{}` has no theta2 axis", self.model.key()));
        }
        if self.sweep.n_firms.contains(&0) {
            return bad("n_firms must be positive".into());
        }
        for a in &self.algorithms {
            if !self.model.supports(a.name) {
                return bad(format!("algorithm `{}` is not available for model `{}`", a.name, self.model.key()));
            }
            if a.inner_solver == Some(InnerSolver::Analytic) {
                let thetas = self.theta2_values();
                if self.model != ModelKind::PakesMcguire || thetas.iter().any(|&t| t != 0.0) {
                    return bad("the analytic inner solver needs pakes_mcguire with theta2 = 0".into());
                }
            }
        }
        for point in self.points() {
            point.spec.cfg.validate()?;
        }
        Ok(())
    }

    fn theta2_values(&self) -> Vec<f64> {
        if !self.sweep.theta2.is_empty() {
            return self.sweep.theta2.clone();
        }
        match self.params.get("theta2") {
            Some(v) => vec![v.as_float().or(v.as_integer().map(|i| i as f64)).unwrap_or(f64::NAN)],
            None => vec![0.0],
        }
    }

    /// Base solver settings before sweep axes.
    pub fn base_cfg(&self) -> SpectralConfig {
        let mut cfg = SpectralConfig::default();
        self.solver.apply(&mut cfg);
        cfg
    }

    /// Expands the sweep in the order `J → θ₂ → algorithm → step scope →
    /// λ → α₀`.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Clone>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().cloned().map(Some).collect()
            }
        }
        let base = self.base_cfg();
        let mut out = Vec::new();
        for n_firms in axis(&self.sweep.n_firms) {
            for theta2 in axis(&self.sweep.theta2) {
                for entry in &self.algorithms {
                    for scope in axis(&self.sweep.step_scope) {
                        for lambda in axis(&self.sweep.lambda) {
                            for alpha0 in axis(&self.sweep.alpha0) {
                                let mut cfg = base;
                                if let Some(v) = entry.lambda {
                                    cfg.lambda = v;
                                }
                                if let Some(v) = entry.alpha0 {
                                    cfg.alpha0 = v;
                                }
                                if let Some(v) = entry.max_iter {
                                    cfg.max_iter = v;
                                }
                                if let Some(v) = scope {
                                    cfg.step_scope = v;
                                }
                                if let Some(v) = lambda {
                                    cfg.lambda = v;
                                }
                                if let Some(v) = alpha0 {
                                    cfg.alpha0 = v;
                                }
                                let mut spec = AlgorithmSpec::new(entry.name, entry.spectral, cfg);
                                spec.cfg = spec.effective_cfg();
                                spec.star_updated_actions = entry.star_updated_actions;
                                if let Some(inner) = entry.inner_solver {
                                    spec.inner_solver = inner;
                                }
                                out.push(SweepPoint {
                                    spec,
                                    required: entry.required,
                                    n_firms,
                                    theta2,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
