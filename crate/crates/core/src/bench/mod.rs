//! Experiment runner: builds models by name, runs solver sweeps and scores
//! the solutions.

mod config;
mod report;
mod residuals;

pub use config::{
    AlgorithmEntry, ExperimentConfig, OutputFormat, OutputSettings, SimulationSettings, SolverSettings, Sweep,
    SweepPoint,
};
pub use report::{parse_csv, to_csv, to_markdown, Row};
pub use residuals::{
    draw_innovations, euler_residuals_growth, foc_residuals_game, pm_sup_residuals, ResidualReport,
};

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    solve_ecm_growth, solve_ee_growth, solve_egm_growth, solve_vf_pgi, solve_vf_pgi_star, solve_vfi,
    solve_vfi_star, AlgorithmName, AlgorithmSpec,
};
use crate::error::{Error, Result};
use crate::model_api::{DynamicModel, SolutionBundle};
use crate::models::growth::{GrowthGridConfig, GrowthModel, GrowthParams, Labor};
use crate::models::invest_game::{GameGridConfig, InvestGame, InvestGameParams};
use crate::models::pakes_mcguire::{PakesMcGuire, PmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GrowthElastic,
    GrowthInelastic,
    InvestGame,
    PakesMcguire,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::GrowthElastic,
        ModelKind::GrowthInelastic,
        ModelKind::InvestGame,
        ModelKind::PakesMcguire,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::GrowthElastic => "growth_elastic",
            ModelKind::GrowthInelastic => "growth_inelastic",
            ModelKind::InvestGame => "invest_game",
            ModelKind::PakesMcguire => "pakes_mcguire",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::GrowthElastic => "stochastic growth with elastic labor; actions (l, c); polynomial V, Gauss-Hermite",
            ModelKind::GrowthInelastic => "stochastic growth with inelastic labor; action c",
            ModelKind::InvestGame => "J-firm Cournot capital investment game with demand and cost shocks; Chebyshev V",
            ModelKind::PakesMcguire => "J-firm quality ladder game with logit pricing; exact tabular V",
        }
    }

    pub fn supports(self, algorithm: AlgorithmName) -> bool {
        use AlgorithmName::*;
        match self {
            ModelKind::GrowthElastic => matches!(algorithm, VfPgi | VfPgiStar | Vfi | EcmVf | Egm),
            ModelKind::GrowthInelastic => matches!(algorithm, VfPgi | Vfi | EcmVf | Egm | Ee),
            ModelKind::InvestGame | ModelKind::PakesMcguire => matches!(algorithm, VfPgi | Vfi | VfiStar),
        }
    }

    pub fn is_game(self) -> bool {
        matches!(self, ModelKind::InvestGame | ModelKind::PakesMcguire)
    }
}

/// A built model of any kind.
#[derive(Debug, Clone)]
pub enum ModelHandle {
    Growth(GrowthModel),
    InvestGame(InvestGame),
    PakesMcGuire(PakesMcGuire),
}

impl ModelHandle {
    pub fn name(&self) -> &str {
        match self {
            ModelHandle::Growth(m) => m.name(),
            ModelHandle::InvestGame(m) => m.name(),
            ModelHandle::PakesMcGuire(m) => m.name(),
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            ModelHandle::Growth(m) => m.n_states(),
            ModelHandle::InvestGame(m) => m.n_states(),
            ModelHandle::PakesMcGuire(m) => m.n_states(),
        }
    }

    pub fn n_agents(&self) -> usize {
        match self {
            ModelHandle::Growth(m) => m.n_agents(),
            ModelHandle::InvestGame(m) => m.n_agents(),
            ModelHandle::PakesMcGuire(m) => m.n_agents(),
        }
    }
}

/// Merges `overrides` into the serialized benchmark value, rejecting keys the
/// benchmark does not have.
fn merge<T: Serialize + for<'de> Deserialize<'de>>(base: &T, overrides: &toml::Table, what: &str) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for (k, v) in overrides {
        if !table.contains_key(k) {
            return Err(Error::InvalidConfig(format!("unknown {what} key `{k}`")));
        }
        table.insert(k.clone(), v.clone());
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{what}: {}", e.message())))
}

/// Builds a model from its name, parameter and grid overrides, and the
/// game axes (`n_firms`, `theta2`) where they apply.
pub fn build_model(
    kind: ModelKind,
    params: &toml::Table,
    grid: &toml::Table,
    n_firms: Option<usize>,
    theta2: Option<f64>,
) -> Result<ModelHandle> {
    match kind {
        ModelKind::GrowthElastic | ModelKind::GrowthInelastic => {
            let base = GrowthParams::benchmark();
            let mut p: GrowthParams = merge(&base, params, "growth parameter")?;
            if !params.contains_key("a") && !params.contains_key("b") {
                p = p.with_derived_scales();
            }
            let g: GrowthGridConfig = merge(&GrowthGridConfig::default(), grid, "growth grid")?;
            let labor = if kind == ModelKind::GrowthElastic {
                Labor::Elastic
            } else {
                Labor::Inelastic
            };
            Ok(ModelHandle::Growth(GrowthModel::new(p, labor, &g)?))
        }
        ModelKind::InvestGame => {
            let mut p: InvestGameParams = merge(&InvestGameParams::benchmark(1), params, "invest_game parameter")?;
            if let Some(j) = n_firms {
                p.n_firms = j;
            }
            let g: GameGridConfig = merge(&GameGridConfig::default(), grid, "invest_game grid")?;
            Ok(ModelHandle::InvestGame(InvestGame::new(p, &g)?))
        }
        ModelKind::PakesMcguire => {
            if !grid.is_empty() {
                return Err(Error::InvalidConfig("pakes_mcguire has no grid settings".into()));
            }
            let mut p: PmParams = merge(&PmParams::benchmark(1, 0.0), params, "pakes_mcguire parameter")?;
            if let Some(j) = n_firms {
                p.n_firms = j;
            }
            if let Some(t) = theta2 {
                p.theta2 = t;
            }
            Ok(ModelHandle::PakesMcGuire(PakesMcGuire::new(p)?))
        }
    }
}

fn unsupported(spec: &AlgorithmSpec, model: &str) -> Error {
    Error::Unsupported {
        algorithm: spec.name.key().into(),
        model: model.into(),
    }
}

/// Runs one solver from the model's prescribed initial guess.
pub fn solve(model: &ModelHandle, spec: &AlgorithmSpec) -> Result<SolutionBundle> {
    let cfg = spec.effective_cfg();
    let mut sol = match model {
        ModelHandle::Growth(m) => {
            let init = m.initial_guess();
            match spec.name {
                AlgorithmName::VfPgi => solve_vf_pgi(m, &cfg, init),
                AlgorithmName::VfPgiStar if m.is_elastic() => solve_vf_pgi_star(m, &cfg, init),
                AlgorithmName::Vfi => solve_vfi(m, &cfg, spec.inner_solver, init),
                AlgorithmName::EcmVf => solve_ecm_growth(m, &cfg, init),
                AlgorithmName::Egm => solve_egm_growth(m, &cfg, init),
                AlgorithmName::Ee if !m.is_elastic() => solve_ee_growth(m, &cfg, init),
                _ => Err(unsupported(spec, m.name())),
            }
        }
        ModelHandle::InvestGame(m) => solve_game(m, spec, &cfg, m.initial_guess()),
        ModelHandle::PakesMcGuire(m) => solve_game(m, spec, &cfg, m.initial_guess()),
    }?;
    sol.algorithm = spec.label();
    Ok(sol)
}

fn solve_game<M: DynamicModel>(
    m: &M,
    spec: &AlgorithmSpec,
    cfg: &crate::fixed_point::SpectralConfig,
    init: (crate::model_api::ValueTable, crate::model_api::ActionTable),
) -> Result<SolutionBundle> {
    match spec.name {
        AlgorithmName::VfPgi => solve_vf_pgi(m, cfg, init),
        AlgorithmName::Vfi => solve_vfi(m, cfg, spec.inner_solver, init),
        AlgorithmName::VfiStar => solve_vfi_star(m, cfg, spec.inner_solver, spec.star_updated_actions, init),
        _ => Err(unsupported(spec, m.name())),
    }
}

/// Scores a solution with the model's accuracy measure.
pub fn score(
    model: &ModelHandle,
    spec: &AlgorithmSpec,
    solution: &SolutionBundle,
    innovations: &[(f64, f64)],
) -> Result<ResidualReport> {
    match model {
        ModelHandle::Growth(m) => euler_residuals_growth(m, spec.name, solution, innovations),
        ModelHandle::InvestGame(m) => foc_residuals_game(m, solution, innovations),
        ModelHandle::PakesMcGuire(m) => pm_sup_residuals(m, solution),
    }
}

/// Result of one sweep point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub point: SweepPoint,
    pub row: Row,
    pub report: ResidualReport,
    /// `None` when the solver raised an error.
    pub solution: Option<SolutionBundle>,
    pub error: Option<String>,
}

impl PointOutcome {
    pub fn converged(&self) -> bool {
        self.report.converged
    }

    /// A required point that did not converge.
    pub fn failed_requirement(&self) -> bool {
        self.point.required && !self.converged()
    }
}

/// Runs every sweep point in config order.
///
/// Models are rebuilt only when the game axes change. Simulation draws are
/// made once from `seed` and shared by all points so accuracy columns are
/// comparable.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PointOutcome>> {
    cfg.validate()?;
    let length = cfg.simulation.length.unwrap_or(match cfg.model {
        ModelKind::GrowthElastic | ModelKind::GrowthInelastic => 10_000,
        _ => 100,
    });
    let innovations = draw_innovations(cfg.simulation.seed, cfg.simulation.burn_in + length);
    let innovations = &innovations[cfg.simulation.burn_in..];
    let mut cache: Option<((Option<usize>, Option<u64>), ModelHandle)> = None;
    let mut out = Vec::new();
    for point in cfg.points() {
        let key = (point.n_firms, point.theta2.map(f64::to_bits));
        let model = match &cache {
            Some((k, m)) if *k == key => m,
            _ => {
                let m = build_model(cfg.model, &cfg.params, &cfg.grid, point.n_firms, point.theta2)?;
                &cache.insert((key, m)).1
            }
        };
        let (report, solution, error) = match solve(model, &point.spec) {
            Ok(sol) => match score(model, &point.spec, &sol, innovations) {
                Ok(r) => (r, Some(sol), None),
                Err(e) => (ResidualReport::failed(&sol), Some(sol), Some(e.to_string())),
            },
            Err(e) => (ResidualReport::error(), None, Some(e.to_string())),
        };
        let n_firms = point.n_firms.or(match model {
            ModelHandle::Growth(_) => None,
            _ => Some(model.n_agents()),
        });
        let theta2 = match model {
            ModelHandle::PakesMcGuire(m) => Some(m.params().theta2),
            _ => None,
        };
        let row = Row::new(&point.spec, n_firms, theta2, &report);
        out.push(PointOutcome {
            point,
            row,
            report,
            solution,
            error,
        });
    }
    Ok(out)
}

/// Human-readable list of the built-in models.
pub fn list_models() -> Vec<(&'static str, &'static str)> {
    ModelKind::ALL.iter().map(|m| (m.key(), m.description())).collect()
}

/// Human-readable list of the algorithms and the models they apply to.
pub fn list_algorithms() -> Vec<(&'static str, &'static str, Vec<&'static str>)> {
    AlgorithmName::ALL
        .iter()
        .map(|a| {
            let models = ModelKind::ALL.iter().filter(|m| m.supports(*a)).map(|m| m.key()).collect();
            (a.key(), a.description(), models)
        })
        .collect()
}
