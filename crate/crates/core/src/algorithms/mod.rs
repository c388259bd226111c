//! Solvers: VF-PGI and the value-function-iteration baselines, plus the
//! growth-specific envelope, endogenous-grid and Euler-equation methods.

mod growth;

pub use growth::{solve_ecm_growth, solve_ee_growth, solve_egm_growth, solve_vf_pgi_star};

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{expand_bracket, newton_bisect, RootOptions};
use crate::fixed_point::{iterate_projected, BlockInfo, BlockKind, BlockLayout, BlockVector, SpectralConfig, UpdateMode};
use crate::model_api::{
    assemble_blocks, bellman_and_gradient, bellman_rhs, boxed_map, clamp_actions, disassemble, layout_for,
    ActionTable, DynamicModel, InnerSolver, SolutionBundle, ValueTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    VfPgi,
    VfPgiStar,
    Vfi,
    VfiStar,
    EcmVf,
    Egm,
    Ee,
}

impl AlgorithmName {
    pub const ALL: [AlgorithmName; 7] = [
        AlgorithmName::VfPgi,
        AlgorithmName::VfPgiStar,
        AlgorithmName::Vfi,
        AlgorithmName::VfiStar,
        AlgorithmName::EcmVf,
        AlgorithmName::Egm,
        AlgorithmName::Ee,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AlgorithmName::VfPgi => "vf_pgi",
            AlgorithmName::VfPgiStar => "vf_pgi_star",
            AlgorithmName::Vfi => "vfi",
            AlgorithmName::VfiStar => "vfi_star",
            AlgorithmName::EcmVf => "ecm_vf",
            AlgorithmName::Egm => "egm",
            AlgorithmName::Ee => "ee",
        }
    }

    /// Display label without the spectral suffix.
    pub fn label(self) -> &'static str {
        match self {
            AlgorithmName::VfPgi => "VF-PGI",
            AlgorithmName::VfPgiStar => "VF-PGI*",
            AlgorithmName::Vfi => "VFI",
            AlgorithmName::VfiStar => "VFI*",
            AlgorithmName::EcmVf => "ECM",
            AlgorithmName::Egm => "EGM",
            AlgorithmName::Ee => "EE",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            AlgorithmName::VfPgi => "joint value / policy-gradient iteration on (V, a)",
            AlgorithmName::VfPgiStar => "VF-PGI on (V, l) with consumption recovered analytically (elastic growth)",
            AlgorithmName::Vfi => "value function iteration with an exact inner solve; one best-response sweep per iteration in games",
            AlgorithmName::VfiStar => "VFI on (V, a) with per-agent best responses holding rivals fixed",
            AlgorithmName::EcmVf => "envelope condition method on V (growth models)",
            AlgorithmName::Egm => "endogenous grid method on V (growth models)",
            AlgorithmName::Ee => "Euler-equation time iteration on consumption (inelastic growth)",
        }
    }
}

impl fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One solver together with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    pub spectral: bool,
    pub inner_solver: InnerSolver,
    /// VFI*: update V with the freshly computed best responses instead of
    /// the current actions.
    pub star_updated_actions: bool,
    pub cfg: SpectralConfig,
}

impl AlgorithmSpec {
    pub fn new(name: AlgorithmName, spectral: bool, cfg: SpectralConfig) -> Self {
        Self {
            name,
            spectral,
            inner_solver: InnerSolver::default(),
            star_updated_actions: false,
            cfg,
        }
    }

    pub fn with_inner(mut self, inner: InnerSolver) -> Self {
        self.inner_solver = inner;
        self
    }

    /// Configuration with the update mode matching `spectral`.
    pub fn effective_cfg(&self) -> SpectralConfig {
        let mut cfg = self.cfg.clone();
        cfg.mode = if self.spectral {
            UpdateMode::Spectral
        } else {
            UpdateMode::Simple
        };
        cfg
    }

    /// e.g. `VF-PGI-Spectral` or `VFI`.
    pub fn label(&self) -> String {
        if self.spectral {
            format!("{}-Spectral", self.name.label())
        } else {
            self.name.label().to_string()
        }
    }
}

/// VF-PGI: iterate `x = (V, a)` with `Φ_V = r(a, s) + βW(a, s; V̄)` and
/// `Φ_a = a + λ ∂Q/∂a`, boxed where bounds are finite.
pub fn solve_vf_pgi<M: DynamicModel>(
    model: &M,
    cfg: &SpectralConfig,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let (n_agents, n_states) = (model.n_agents(), model.n_states());
    let layout = layout_for(model);
    let (v0, mut a0) = init;
    check_init(model, &v0, &a0)?;
    clamp_actions(model, &mut a0);
    let x0 = assemble_blocks(&layout, &v0, &a0)?;
    let lambda = cfg.lambda;

    let map = |x: &BlockVector| -> Result<BlockVector> {
        let (values, actions) = disassemble(x, n_agents, n_states)?;
        let cont = model.prepare(&values)?;
        let (new_values, grad) = bellman_and_gradient(model, &cont, &actions);
        let mut new_actions = actions.clone();
        for d in 0..actions.dim() {
            for j in 0..n_agents {
                for s in 0..n_states {
                    let a = actions.get(d, j, s);
                    let f = grad.get(d, j, s);
                    let phi = a + lambda * f;
                    let (l, u) = model.bounds(j, d, s);
                    let v = if l.is_finite() || u.is_finite() {
                        boxed_map(phi, f, a, l, u)?
                    } else {
                        phi
                    };
                    new_actions.set(d, j, s, v);
                }
            }
        }
        assemble_blocks(&layout, &new_values, &new_actions)
    };
    let project = |x: &mut BlockVector| project_actions(model, x);
    let (x, trace) = iterate_projected(map, project, x0, cfg)?;
    let (values, actions) = disassemble(&x, n_agents, n_states)?;
    Ok(SolutionBundle {
        algorithm: label(cfg, "VF-PGI"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}

fn label(cfg: &SpectralConfig, base: &str) -> String {
    match cfg.mode {
        UpdateMode::Spectral => format!("{base}-Spectral"),
        UpdateMode::Simple => base.to_string(),
    }
}

fn check_init<M: DynamicModel>(model: &M, v: &ValueTable, a: &ActionTable) -> Result<()> {
    let ok = v.n_agents() == model.n_agents()
        && v.n_states() == model.n_states()
        && a.n_agents() == model.n_agents()
        && a.n_states() == model.n_states()
        && a.dim() == model.action_dim();
    if ok {
        Ok(())
    } else {
        Err(Error::LayoutMismatch(format!(
            "initial guess shape does not match model `{}`",
            model.name()
        )))
    }
}

/// Clamps the action blocks of an iterate onto their boxes.
fn project_actions<M: DynamicModel>(model: &M, x: &mut BlockVector) {
    let n_states = model.n_states();
    for b in 1..x.layout().n_blocks() {
        let d = b - 1;
        for (i, v) in x.block_mut(b).iter_mut().enumerate() {
            let (l, u) = model.bounds(i / n_states, d, i % n_states);
            if *v < l || *v > u {
                *v = v.clamp(l, u);
            }
        }
    }
}

/// Best response of `agent` at `state`, holding the other entries of
/// `profile` fixed.
pub fn best_response<M: DynamicModel>(
    model: &M,
    cont: &M::Cont,
    state: usize,
    agent: usize,
    profile: &[f64],
    solver: InnerSolver,
) -> Result<Vec<f64>> {
    match model.best_response(cont, state, agent, profile, solver) {
        Some(r) => r,
        None => newton_best_response(model, cont, state, agent, profile, 1e-10, 50),
    }
}

/// Newton's method on `∂Q_j/∂a_j = 0` with a finite-difference Jacobian,
/// projected onto the action box, with backtracking on the gradient norm.
pub fn newton_best_response<M: DynamicModel>(
    model: &M,
    cont: &M::Cont,
    state: usize,
    agent: usize,
    profile: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let d = model.action_dim();
    if d == 1 {
        return scalar_best_response(model, cont, state, agent, profile);
    }
    let beta = model.beta();
    let offset = agent * d;
    let mut prof = profile.to_vec();
    let grad = |p: &[f64]| model.q_eval(cont, state, agent, p).gradient(beta);
    let bounds: Vec<(f64, f64)> = (0..d).map(|k| model.bounds(agent, k, state)).collect();
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fail = |reason: String| Error::InnerSolve { agent, state, reason };

    let mut g = grad(&prof);
    for _ in 0..max_iter {
        let mut jac = DMatrix::zeros(d, d);
        for k in 0..d {
            let x = prof[offset + k];
            let h = 1e-6 * x.abs().max(1e-3);
            let mut up = prof.clone();
            let mut dn = prof.clone();
            up[offset + k] = x + h;
            dn[offset + k] = x - h;
            let (gu, gd) = (grad(&up), grad(&dn));
            for r in 0..d {
                jac[(r, k)] = (gu[r] - gd[r]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(d, g.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| fail("singular Hessian".into()))?;
        let g_norm = inf_norm(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial = prof.clone();
            for k in 0..d {
                let (l, u) = bounds[k];
                trial[offset + k] = (prof[offset + k] + t * step[k]).clamp(l, u);
            }
            let gt = grad(&trial);
            if gt.iter().all(|v| v.is_finite()) && inf_norm(&gt) < g_norm {
                accepted = Some((trial, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, gt)) = accepted else {
            if on_boundary_optimum(&prof[offset..offset + d], &g, &bounds) {
                return Ok(prof[offset..offset + d].to_vec());
            }
            return Err(fail(format!("line search failed, gradient norm {g_norm:e}")));
        };
        let moved = (0..d).fold(0.0f64, |m, k| {
            m.max((trial[offset + k] - prof[offset + k]).abs() / prof[offset + k].abs().max(1.0))
        });
        prof = trial;
        g = gt;
        if moved <= tol || on_boundary_optimum(&prof[offset..offset + d], &g, &bounds) {
            return Ok(prof[offset..offset + d].to_vec());
        }
    }
    Err(fail(format!("no convergence after {max_iter} Newton steps")))
}

/// One-dimensional best response: a bracketed Newton root of `∂Q_j/∂a_j`,
/// or a binding bound when the gradient points out of the box there.
fn scalar_best_response<M: DynamicModel>(
    model: &M,
    cont: &M::Cont,
    state: usize,
    agent: usize,
    profile: &[f64],
) -> Result<Vec<f64>> {
    let beta = model.beta();
    let (l, u) = model.bounds(agent, 0, state);
    let grad = |a: f64| {
        let mut p = profile.to_vec();
        p[agent] = a;
        model.q_eval(cont, state, agent, &p).gradient(beta)[0]
    };
    if l.is_finite() && grad(l) <= 0.0 {
        return Ok(vec![l]);
    }
    if u.is_finite() && grad(u) >= 0.0 {
        return Ok(vec![u]);
    }
    let fail = |e: Error| Error::InnerSolve {
        agent,
        state,
        reason: e.to_string(),
    };
    let start = profile[agent];
    let anchor = if start.is_finite() { start.clamp(l, u) } else { 0.0f64.clamp(l, u) };
    let (lo, hi) = expand_bracket(grad, anchor, l, u).map_err(fail)?;
    if lo == hi {
        return Ok(vec![lo]);
    }
    let with_slope = |a: f64| {
        let h = 1e-7 * a.abs().max(1.0);
        (grad(a), (grad(a + h) - grad(a - h)) / (2.0 * h))
    };
    newton_bisect(with_slope, lo, hi, Some(anchor), RootOptions::default())
        .map(|a| vec![a])
        .map_err(fail)
}

fn on_boundary_optimum(a: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> bool {
    a.iter().zip(g).zip(bounds).all(|((&x, &gk), &(l, u))| {
        (x == l && gk <= 0.0) || (x == u && gk >= 0.0) || gk.abs() <= 1e-12
    })
}

/// All agents' best responses at every state, holding rivals at `actions`.
pub fn best_responses<M: DynamicModel>(
    model: &M,
    cont: &M::Cont,
    actions: &ActionTable,
    solver: InnerSolver,
) -> Result<ActionTable> {
    let d = model.action_dim();
    let n_agents = model.n_agents();
    let rows: Vec<Result<Vec<Vec<f64>>>> = (0..model.n_states())
        .into_par_iter()
        .map(|s| {
            let profile = actions.profile(s);
            (0..n_agents)
                .map(|j| best_response(model, cont, s, j, &profile, solver))
                .collect()
        })
        .collect();
    let mut out = actions.clone();
    for (s, row) in rows.into_iter().enumerate() {
        for (j, a) in row?.into_iter().enumerate() {
            for (k, v) in a.into_iter().enumerate().take(d) {
                out.set(k, j, s, v);
            }
        }
    }
    Ok(out)
}

fn value_layout(len: usize) -> std::sync::Arc<BlockLayout> {
    std::sync::Arc::new(BlockLayout::new(vec![BlockInfo {
        label: "V".into(),
        kind: BlockKind::Value,
        len,
    }]))
}

/// VFI: iterate on `V` alone; each evaluation solves the first-order
/// conditions exactly at every grid point (warm-started from the previous
/// solution) and applies the Bellman operator.
pub fn solve_vfi<M: DynamicModel>(
    model: &M,
    cfg: &SpectralConfig,
    inner: InnerSolver,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let (v0, a0) = init;
    check_init(model, &v0, &a0)?;
    let (n_agents, n_states) = (model.n_agents(), model.n_states());
    let layout = value_layout(n_agents * n_states);
    let x0 = BlockVector::new(layout.clone(), v0.as_slice().to_vec())?;
    let mut actions = a0;

    let map = |x: &BlockVector| -> Result<BlockVector> {
        let values = ValueTable::new(n_agents, n_states, x.as_slice().to_vec())?;
        if !x.is_finite() {
            return Ok(x.scale(f64::NAN));
        }
        let cont = model.prepare(&values)?;
        actions = best_responses(model, &cont, &actions, inner)?;
        let new_values = bellman_rhs(model, &cont, &actions);
        BlockVector::new(layout.clone(), new_values.as_slice().to_vec())
    };
    let (x, trace) = iterate_projected(map, |_| {}, x0, cfg)?;
    let values = ValueTable::new(n_agents, n_states, x.into_vec())?;
    Ok(SolutionBundle {
        algorithm: label(cfg, "VFI"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}

/// VFI*: iterate `x = (V, a)` with `Φ_a` the per-agent best responses to
/// the current rivals' actions and `Φ_V = r(a, s) + βW(a, s; V̄)`.
///
/// With `updated_actions` the Bellman update uses the new best responses
/// instead of the current actions.
pub fn solve_vfi_star<M: DynamicModel>(
    model: &M,
    cfg: &SpectralConfig,
    inner: InnerSolver,
    updated_actions: bool,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let (v0, mut a0) = init;
    check_init(model, &v0, &a0)?;
    clamp_actions(model, &mut a0);
    let (n_agents, n_states) = (model.n_agents(), model.n_states());
    let layout = layout_for(model);
    let x0 = assemble_blocks(&layout, &v0, &a0)?;

    let map = |x: &BlockVector| -> Result<BlockVector> {
        if !x.is_finite() {
            return Ok(x.scale(f64::NAN));
        }
        let (values, actions) = disassemble(x, n_agents, n_states)?;
        let cont = model.prepare(&values)?;
        let responses = best_responses(model, &cont, &actions, inner)?;
        let new_values = if updated_actions {
            bellman_rhs(model, &cont, &responses)
        } else {
            bellman_rhs(model, &cont, &actions)
        };
        assemble_blocks(&layout, &new_values, &responses)
    };
    let project = |x: &mut BlockVector| project_actions(model, x);
    let (x, trace) = iterate_projected(map, project, x0, cfg)?;
    let (values, actions) = disassemble(&x, n_agents, n_states)?;
    Ok(SolutionBundle {
        algorithm: label(cfg, "VFI*"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}
