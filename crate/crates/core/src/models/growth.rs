//! Neoclassical growth model with elastic or inelastic labor.
//!
//! ```text
//! V(k, z) = max_{l, c} u(c, l) + β E[V(k′, z′)]
//!   k′ = (1 − δ)k + z A k^α l^{1−α} − c,   ln z′ = ρ ln z + ε′
//!   u(c, l) = (c^{1−γ} − 1)/(1 − γ) + B((1 − l)^{1−μ} − 1)/(1 − μ)
//! ```
//!
//! With inelastic labor `l ≡ 1` and the leisure term is dropped.
//! Actions are `(l, c)` in the elastic case and `c` alone otherwise.

use serde::{Deserialize, Serialize};

use crate::approx::{
    gauss_hermite, tensor_grid, uniform_nodes, Ar1Law, FittedFunction, LeastSquares, PolyBasis, QuadratureRule,
};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fixed_point::{iterate, BlockInfo, BlockKind, BlockLayout, BlockVector, SpectralConfig, Tolerances};
use crate::model_api::{ActionTable, DynamicModel, InnerSolver, QEval, ValueTable};
use crate::scalar::{expand_bracket, newton_bisect, RootOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labor {
    Elastic,
    Inelastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub gamma: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub pi_k: f64,
    pub pi_c: f64,
    pub l_bar: f64,
    /// Productivity scale `A`.
    pub a: f64,
    /// Leisure weight `B`.
    pub b: f64,
}

impl GrowthParams {
    /// Benchmark calibration with `A` and `B` derived from the targets.
    pub fn benchmark() -> Self {
        Self {
            gamma: 2.0,
            mu: 2.0,
            alpha: 1.0 / 3.0,
            beta: 0.99,
            delta: 0.025,
            rho: 0.95,
            sigma: 0.01,
            pi_k: 10.0,
            pi_c: 0.75,
            l_bar: 1.0 / 3.0,
            a: 0.0,
            b: 0.0,
        }
        .with_derived_scales()
    }

    /// Recomputes `A = (1/β − (1 − δ))/α` and
    /// `B = (1 − α) π_k^{(1−γ)α/(1−α)} π_c^{−γ} (1 − l̄)^μ l̄^{−μ}`.
    pub fn with_derived_scales(mut self) -> Self {
        self.a = (1.0 / self.beta - (1.0 - self.delta)) / self.alpha;
        self.b = (1.0 - self.alpha)
            * self.pi_k.powf((1.0 - self.gamma) * self.alpha / (1.0 - self.alpha))
            * self.pi_c.powf(-self.gamma)
            * (1.0 - self.l_bar).powf(self.mu)
            * self.l_bar.powf(-self.mu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("a", self.a),
            ("b", self.b),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("growth parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.alpha < 1.0 && self.delta <= 1.0 && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig("need alpha < 1, delta ≤ 1, sigma ≥ 0".into()));
        }
        Ok(())
    }

    /// `(c^{1−γ} − 1)/(1 − γ)`, logarithmic at `γ = 1`.
    pub fn u_consumption(&self, c: f64) -> f64 {
        crra(c, self.gamma)
    }

    pub fn u_leisure(&self, l: f64) -> f64 {
        self.b * crra(1.0 - l, self.mu)
    }

    pub fn u_c(&self, c: f64) -> f64 {
        c.powf(-self.gamma)
    }

    /// `∂u/∂l = −B(1 − l)^{−μ}`.
    pub fn u_l(&self, l: f64) -> f64 {
        -self.b * (1.0 - l).powf(-self.mu)
    }

    /// `z A k^α l^{1−α}`.
    pub fn output(&self, k: f64, z: f64, l: f64) -> f64 {
        z * self.a * k.powf(self.alpha) * l.powf(1.0 - self.alpha)
    }

    /// Marginal product of labor `z A (1 − α) k^α l^{−α}`.
    pub fn mpl(&self, k: f64, z: f64, l: f64) -> f64 {
        z * self.a * (1.0 - self.alpha) * k.powf(self.alpha) * l.powf(-self.alpha)
    }

    /// Gross return `1 − δ + z A α k^{α−1} l^{1−α}`.
    pub fn gross_return(&self, k: f64, z: f64, l: f64) -> f64 {
        1.0 - self.delta + z * self.a * self.alpha * k.powf(self.alpha - 1.0) * l.powf(1.0 - self.alpha)
    }

    /// Consumption consistent with both first-order conditions:
    /// `c = (B(1 − l)^{−μ} / ((1 − α) A z k^α l^{−α}))^{−1/γ}`.
    pub fn c_of_l(&self, k: f64, z: f64, l: f64) -> f64 {
        (self.b * (1.0 - l).powf(-self.mu) / self.mpl(k, z, l)).powf(-1.0 / self.gamma)
    }
}

fn crra(x: f64, curvature: f64) -> f64 {
    if (curvature - 1.0).abs() < 1e-12 {
        x.ln()
    } else {
        (x.powf(1.0 - curvature) - 1.0) / (1.0 - curvature)
    }
}

/// Utility, next capital and both first-order residuals at one point, given
/// the expected marginal continuation value `W_k` at `k′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanParts {
    pub utility: f64,
    pub k_next: f64,
    pub foc_l: f64,
    pub foc_c: f64,
}

pub fn growth_bellman_parts(p: &GrowthParams, k: f64, z: f64, l: f64, c: f64, w_k: f64) -> Result<BellmanParts> {
    if !(c > 0.0 && l > 0.0 && l < 1.0 && k > 0.0 && z > 0.0) {
        return Err(Error::Domain(format!(
            "need c > 0, 0 < l < 1, k > 0, z > 0 (c = {c}, l = {l}, k = {k}, z = {z})"
        )));
    }
    Ok(BellmanParts {
        utility: p.u_consumption(c) + p.u_leisure(l),
        k_next: (1.0 - p.delta) * k + p.output(k, z, l) - c,
        foc_l: p.u_l(l) + p.mpl(k, z, l) * p.beta * w_k,
        foc_c: p.u_c(c) - p.beta * w_k,
    })
}

pub fn growth_c_of_l(p: &GrowthParams, k: f64, z: f64, l: f64) -> f64 {
    p.c_of_l(k, z, l)
}

/// Grid, basis and quadrature choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthGridConfig {
    pub n_k: usize,
    pub n_z: usize,
    /// Capital range as multiples of steady-state capital.
    pub k_span: (f64, f64),
    pub z_range: (f64, f64),
    pub degree: usize,
    pub quadrature_nodes: usize,
}

impl Default for GrowthGridConfig {
    fn default() -> Self {
        Self {
            n_k: 10,
            n_z: 10,
            k_span: (0.5, 1.5),
            z_range: (0.95, 1.05),
            degree: 4,
            quadrature_nodes: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrowthModel {
    params: GrowthParams,
    labor: Labor,
    name: String,
    points: Vec<[f64; 2]>,
    basis: PolyBasis,
    fit: LeastSquares,
    rule: QuadratureRule,
    law: Ar1Law,
    /// `(weight, z′)` quadrature nodes per grid state.
    next_z: Vec<Vec<(f64, f64)>>,
    k_ss: f64,
    l_ss: f64,
}

impl GrowthModel {
    pub fn new(params: GrowthParams, labor: Labor, grid: &GrowthGridConfig) -> Result<Self> {
        params.validate()?;
        if grid.n_k == 0 || grid.n_z == 0 {
            return Err(Error::InvalidConfig("growth grid needs at least one point per axis".into()));
        }
        let (k_ss, l_ss) = steady_state(&params, labor)?;
        let k_lo = grid.k_span.0 * k_ss;
        let k_hi = grid.k_span.1 * k_ss;
        let (z_lo, z_hi) = grid.z_range;
        let axes = vec![uniform_nodes(grid.n_k, k_lo, k_hi), uniform_nodes(grid.n_z, z_lo, z_hi)];
        let points: Vec<[f64; 2]> = tensor_grid(&axes).into_iter().map(|p| [p[0], p[1]]).collect();
        let basis = PolyBasis::complete(grid.degree, vec![(k_lo, k_hi), (z_lo, z_hi)])?;
        let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let fit = LeastSquares::new(&basis.matrix(&rows)?)?;
        let rule = gauss_hermite(grid.quadrature_nodes)?;
        let law = Ar1Law::Log {
            rho: params.rho,
            sigma: params.sigma,
        };
        let next_z = points.iter().map(|p| law.nodes(p[1], &rule)).collect();
        let name = match labor {
            Labor::Elastic => "growth_elastic",
            Labor::Inelastic => "growth_inelastic",
        };
        Ok(Self {
            params,
            labor,
            name: name.into(),
            points,
            basis,
            fit,
            rule,
            law,
            next_z,
            k_ss,
            l_ss,
        })
    }

    pub fn elastic() -> Result<Self> {
        Self::new(GrowthParams::benchmark(), Labor::Elastic, &GrowthGridConfig::default())
    }

    pub fn inelastic() -> Result<Self> {
        Self::new(GrowthParams::benchmark(), Labor::Inelastic, &GrowthGridConfig::default())
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    pub fn labor(&self) -> Labor {
        self.labor
    }

    pub fn is_elastic(&self) -> bool {
        self.labor == Labor::Elastic
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn law(&self) -> &Ar1Law {
        &self.law
    }

    /// Deterministic steady state `(k, l)`.
    pub fn steady_state(&self) -> (f64, f64) {
        (self.k_ss, self.l_ss)
    }

    /// Fits `V̄` (or any function) to grid values.
    pub fn fit_grid(&self, values: &[f64]) -> Result<FittedFunction> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: values.len(),
            });
        }
        FittedFunction::new(self.basis.clone(), self.fit.solve(values))
    }

    /// Labor input: the action itself when elastic, one otherwise.
    fn labor_of(&self, actions: &[f64]) -> f64 {
        match self.labor {
            Labor::Elastic => actions[0],
            Labor::Inelastic => 1.0,
        }
    }

    fn consumption_of(&self, actions: &[f64]) -> f64 {
        match self.labor {
            Labor::Elastic => actions[1],
            Labor::Inelastic => actions[0],
        }
    }

    /// Period utility; NaN outside `c > 0`, `0 < l < 1`.
    pub fn utility(&self, c: f64, l: f64) -> f64 {
        if !(c > 0.0) {
            return f64::NAN;
        }
        match self.labor {
            Labor::Elastic if l > 0.0 && l < 1.0 => self.params.u_consumption(c) + self.params.u_leisure(l),
            Labor::Elastic => f64::NAN,
            Labor::Inelastic => self.params.u_consumption(c),
        }
    }

    pub fn k_next(&self, k: f64, z: f64, l: f64, c: f64) -> f64 {
        (1.0 - self.params.delta) * k + self.params.output(k, z, l) - c
    }

    /// `(W, W_k)` at `k′` for grid state `state`.
    pub fn expected(&self, v: &FittedFunction, state: usize, k_next: f64) -> (f64, f64) {
        expected_over(v, &self.next_z[state], k_next)
    }

    /// `(W, W_k)` at `k′` for an arbitrary current productivity.
    pub fn expected_at(&self, v: &FittedFunction, z: f64, k_next: f64) -> (f64, f64) {
        expected_over(v, &self.law.nodes(z, &self.rule), k_next)
    }

    /// Policy maximizing `Q` for a given `V̄` at `(k, z)`, from the
    /// first-order conditions. Returns `(l, c)`; `l = 1` when inelastic.
    pub fn policy_from_value(&self, v: &FittedFunction, k: f64, z: f64, guess: Option<f64>) -> Result<(f64, f64)> {
        let nodes = self.law.nodes(z, &self.rule);
        self.policy_with_nodes(v, &nodes, k, z, guess)
    }

    fn policy_with_nodes(
        &self,
        v: &FittedFunction,
        nodes: &[(f64, f64)],
        k: f64,
        z: f64,
        guess: Option<f64>,
    ) -> Result<(f64, f64)> {
        let p = &self.params;
        let opts = RootOptions {
            xtol: 1e-13,
            ftol: 1e-12,
            max_iter: 200,
        };
        match self.labor {
            Labor::Elastic => {
                // u_c(c(l)) − βW_k(k′(l)) is increasing in l.
                let g = |l: f64| {
                    let c = p.c_of_l(k, z, l);
                    let kn = self.k_next(k, z, l, c);
                    let (_, wk) = expected_over(v, nodes, kn);
                    (p.u_c(c) - p.beta * wk) / p.u_c(c)
                };
                let anchor = guess.unwrap_or(self.l_ss).clamp(1e-6, 1.0 - 1e-6);
                let (lo, hi) = expand_bracket(g, anchor, 0.0, 1.0)?;
                let l = newton_bisect(|l| (g(l), fd(&g, l, 1e-7 * l.min(1.0 - l))), lo, hi, Some(anchor), opts)?;
                Ok((l, p.c_of_l(k, z, l)))
            }
            Labor::Inelastic => {
                let resources = (1.0 - p.delta) * k + p.output(k, z, 1.0);
                // u_c(c) − βW_k(k′(c)) is decreasing in c.
                let g = |c: f64| {
                    let (_, wk) = expected_over(v, nodes, resources - c);
                    (p.u_c(c) - p.beta * wk) / p.u_c(c)
                };
                let anchor = guess.unwrap_or(resources - k).max(1e-8);
                let (lo, hi) = expand_bracket(g, anchor, 0.0, f64::INFINITY)?;
                let c = newton_bisect(|c| (g(c), fd(&g, c, 1e-7 * c)), lo, hi, Some(anchor), opts)?;
                Ok((1.0, c))
            }
        }
    }

    /// Initial policies and values: labor `z(1 − l̄)`, consumption a share
    /// `π_c` of output, and the values of following those policies forever.
    pub fn initial_guess(&self) -> (ValueTable, ActionTable) {
        let (flat, actions) = self.initial_policy();
        let values = self.evaluate_policy(&actions).unwrap_or(flat);
        (values, actions)
    }

    /// Initial policies with the cruder value guess `V = u/(1 − β)`.
    pub fn initial_policy(&self) -> (ValueTable, ActionTable) {
        let p = &self.params;
        let n = self.points.len();
        let d = self.action_dim();
        let mut actions = ActionTable::filled(d, 1, n, 0.0);
        let mut values = ValueTable::filled(1, n, 0.0);
        for (s, &[k, z]) in self.points.iter().enumerate() {
            let l = match self.labor {
                Labor::Elastic => z * (1.0 - p.l_bar),
                Labor::Inelastic => 1.0,
            };
            let c = p.pi_c * p.output(k, z, l);
            match self.labor {
                Labor::Elastic => {
                    actions.set(0, 0, s, l);
                    actions.set(1, 0, s, c);
                }
                Labor::Inelastic => actions.set(0, 0, s, c),
            }
            values.set(0, s, self.utility(c, l) / (1.0 - p.beta));
        }
        (values, actions)
    }

    /// Values of following fixed grid policies forever:
    /// the fixed point of `V = u(a) + βE[V̄(k′(a), z′)]`.
    pub fn evaluate_policy(&self, actions: &ActionTable) -> Result<ValueTable> {
        let n = self.n_states();
        let layout = Arc::new(BlockLayout::new(vec![BlockInfo {
            label: "V".into(),
            kind: BlockKind::Value,
            len: n,
        }]));
        let v0 = self.myopic_values(actions);
        let x0 = BlockVector::new(layout.clone(), v0)?;
        let map = |x: &BlockVector| -> Result<BlockVector> {
            let cont = self.fit_grid(x.as_slice())?;
            let v = (0..n)
                .map(|s| {
                    let a = actions.profile(s);
                    self.reward(s, 0, &a) + self.params.beta * self.continuation(&cont, s, 0, &a)
                })
                .collect();
            BlockVector::new(layout.clone(), v)
        };
        let cfg = SpectralConfig {
            tol: Tolerances::uniform(1e-12),
            max_iter: 20_000,
            ..SpectralConfig::default()
        };
        let (x, trace) = iterate(map, x0, &cfg)?;
        if !trace.converged() {
            return Err(Error::NoConvergence(trace.n_iter));
        }
        ValueTable::new(1, n, x.into_vec())
    }

    fn myopic_values(&self, actions: &ActionTable) -> Vec<f64> {
        (0..self.n_states())
            .map(|s| self.reward(s, 0, &actions.profile(s)) / (1.0 - self.params.beta))
            .collect()
    }

    /// Euler-equation residual
    /// `βE[u_c(c′)(1 − δ + z′Aαk′^{α−1}l′^{1−α})]/u_c(c) − 1`, given a policy.
    pub fn euler_residual(
        &self,
        k: f64,
        z: f64,
        policy: &dyn Fn(f64, f64) -> Result<(f64, f64)>,
    ) -> Result<f64> {
        let p = &self.params;
        let (l, c) = policy(k, z)?;
        let kn = self.k_next(k, z, l, c);
        let mut expectation = 0.0;
        for (w, zn) in self.law.nodes(z, &self.rule) {
            let (ln, cn) = policy(kn, zn)?;
            expectation += w * p.u_c(cn) * p.gross_return(kn, zn, ln);
        }
        Ok(p.beta * expectation / p.u_c(c) - 1.0)
    }
}

fn fd(g: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let h = h.max(1e-12);
    (g(x + h) - g(x - h)) / (2.0 * h)
}

fn expected_over(v: &FittedFunction, nodes: &[(f64, f64)], k_next: f64) -> (f64, f64) {
    let mut w = 0.0;
    let mut wk = 0.0;
    for &(weight, zn) in nodes {
        let point = [k_next, zn];
        w += weight * v.eval(&point);
        wk += weight * v.partial(&point, 0);
    }
    (w, wk)
}

/// Deterministic steady state `(k, l)` at `z = 1`.
pub fn steady_state(p: &GrowthParams, labor: Labor) -> Result<(f64, f64)> {
    // Euler: αA(l/k)^{1−α} = 1/β − (1 − δ).
    let ratio = ((1.0 / p.beta - (1.0 - p.delta)) / (p.alpha * p.a)).powf(1.0 / (1.0 - p.alpha));
    match labor {
        Labor::Inelastic => Ok((1.0 / ratio, 1.0)),
        Labor::Elastic => {
            // With k = l/ratio, consumption is linear in l and the
            // intratemporal condition pins down l.
            let c_per_l = p.a * ratio.powf(-p.alpha) - p.delta / ratio;
            if !(c_per_l > 0.0) {
                return Err(Error::InvalidConfig("steady-state consumption is not positive".into()));
            }
            let mpl = (1.0 - p.alpha) * p.a * ratio.powf(-p.alpha);
            let g = |l: f64| (c_per_l * l).powf(-p.gamma) * mpl - p.b * (1.0 - l).powf(-p.mu);
            let l = newton_bisect(
                |l| (g(l), fd(&g, l, 1e-8)),
                1e-9,
                1.0 - 1e-9,
                None,
                RootOptions::default(),
            )?;
            Ok((l / ratio, l))
        }
    }
}

impl DynamicModel for GrowthModel {
    type Cont = FittedFunction;

    fn name(&self) -> &str {
        &self.name
    }

    fn n_agents(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        match self.labor {
            Labor::Elastic => 2,
            Labor::Inelastic => 1,
        }
    }

    fn n_states(&self) -> usize {
        self.points.len()
    }

    fn beta(&self) -> f64 {
        self.params.beta
    }

    fn prepare(&self, values: &ValueTable) -> Result<FittedFunction> {
        self.fit_grid(values.agent(0))
    }

    fn reward(&self, _state: usize, _agent: usize, actions: &[f64]) -> f64 {
        self.utility(self.consumption_of(actions), self.labor_of(actions))
    }

    fn reward_grad(&self, _state: usize, _agent: usize, actions: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let c = self.consumption_of(actions);
        match self.labor {
            Labor::Elastic => vec![p.u_l(actions[0]), p.u_c(c)],
            Labor::Inelastic => vec![p.u_c(c)],
        }
    }

    fn continuation(&self, cont: &FittedFunction, state: usize, _agent: usize, actions: &[f64]) -> f64 {
        let [k, z] = self.points[state];
        let kn = self.k_next(k, z, self.labor_of(actions), self.consumption_of(actions));
        self.expected(cont, state, kn).0
    }

    fn continuation_grad(&self, cont: &FittedFunction, state: usize, agent: usize, actions: &[f64]) -> Vec<f64> {
        self.q_eval(cont, state, agent, actions).continuation_grad
    }

    fn q_eval(&self, cont: &FittedFunction, state: usize, _agent: usize, actions: &[f64]) -> QEval {
        let p = &self.params;
        let [k, z] = self.points[state];
        let l = self.labor_of(actions);
        let c = self.consumption_of(actions);
        let kn = self.k_next(k, z, l, c);
        let (w, wk) = self.expected(cont, state, kn);
        let (reward_grad, continuation_grad) = match self.labor {
            Labor::Elastic => (vec![p.u_l(l), p.u_c(c)], vec![wk * p.mpl(k, z, l), -wk]),
            Labor::Inelastic => (vec![p.u_c(c)], vec![-wk]),
        };
        QEval {
            reward: self.utility(c, l),
            continuation: w,
            reward_grad,
            continuation_grad,
        }
    }

    fn best_response(
        &self,
        cont: &FittedFunction,
        state: usize,
        _agent: usize,
        actions: &[f64],
        _solver: InnerSolver,
    ) -> Option<Result<Vec<f64>>> {
        let [k, z] = self.points[state];
        let guess = Some(actions[0]).filter(|g| g.is_finite());
        Some(
            self.policy_with_nodes(cont, &self.next_z[state], k, z, guess)
                .map(|(l, c)| match self.labor {
                    Labor::Elastic => vec![l, c],
                    Labor::Inelastic => vec![c],
                })
                .map_err(|e| Error::InnerSolve {
                    agent: 0,
                    state,
                    reason: e.to_string(),
                }),
        )
    }
}
