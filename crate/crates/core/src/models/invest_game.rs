//! Dynamic investment competition with continuous states.
//!
//! `J` firms compete à la Cournot in a homogeneous-good market with demand
//! `Q(P) = P^{−η} e^{ξ}`. Marginal cost is `mc_j = k_j^{−γ} e^{μ}`, so
//! capital lowers cost; it evolves as `k′_j = (1 − δ)k_j + i_j` at cost
//! `θ_k i + θ_a i²/k`. Demand and cost shocks follow level AR(1) processes
//! around `ξ̄` and `μ̄`.
//!
//! The state is `(k_1, …, k_J, ξ, μ)`. Each firm's value function is a
//! Chebyshev tensor polynomial fitted on a Chebyshev-node grid, and
//! expectations over the two shocks use Gauss–Hermite quadrature factored
//! through the tensor structure.

use serde::{Deserialize, Serialize};

use crate::approx::{
    chebyshev_nodes, gauss_hermite, tensor_grid, Ar1Law, FittedFunction, LeastSquares, PolyBasis, QuadratureRule,
};
use crate::error::{Error, Result};
use crate::model_api::{ActionTable, DynamicModel, QEval, ValueTable};
use crate::scalar::{bisect, expand_bracket, RootOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvestGameParams {
    pub n_firms: usize,
    /// Price elasticity of demand.
    pub eta: f64,
    /// Capital elasticity of marginal cost.
    pub gamma_mc: f64,
    pub beta: f64,
    pub delta: f64,
    pub rho_xi: f64,
    pub rho_mu: f64,
    pub sigma_xi: f64,
    pub sigma_mu: f64,
    pub xi_bar: f64,
    pub mu_bar: f64,
    pub theta_k: f64,
    pub theta_a: f64,
}

impl Default for InvestGameParams {
    fn default() -> Self {
        Self::benchmark(1)
    }
}

impl InvestGameParams {
    pub fn benchmark(n_firms: usize) -> Self {
        Self {
            n_firms,
            eta: 1.5,
            gamma_mc: 0.1,
            beta: 0.9,
            delta: 0.08,
            rho_xi: 0.9,
            rho_mu: 0.9,
            sigma_xi: 0.01,
            sigma_mu: 0.01,
            xi_bar: 4.0,
            mu_bar: 2.0,
            theta_k: 0.12,
            theta_a: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("invest_game: {m}")));
        if self.n_firms == 0 {
            return bad("n_firms must be positive");
        }
        if !(self.eta * self.n_firms as f64 > 1.0) || !(self.eta > 0.0) {
            return bad("need eta > 1/J");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if !(self.theta_a > 0.0) {
            return bad("theta_a must be positive");
        }
        if !(self.sigma_xi >= 0.0 && self.sigma_mu >= 0.0) {
            return bad("shock volatilities must be nonnegative");
        }
        Ok(())
    }

    pub fn marginal_cost(&self, k: f64, mu: f64) -> f64 {
        k.powf(-self.gamma_mc) * mu.exp()
    }

    pub fn investment_cost(&self, k: f64, i: f64) -> f64 {
        self.theta_k * i + self.theta_a * i * i / k
    }

    /// `∂c(k, i)/∂i`.
    pub fn investment_cost_grad(&self, k: f64, i: f64) -> f64 {
        self.theta_k + 2.0 * self.theta_a * i / k
    }

    pub fn xi_law(&self) -> Ar1Law {
        Ar1Law::Level {
            rho: self.rho_xi,
            sigma: self.sigma_xi,
            mean: self.xi_bar,
        }
    }

    pub fn mu_law(&self) -> Ar1Law {
        Ar1Law::Level {
            rho: self.rho_mu,
            sigma: self.sigma_mu,
            mean: self.mu_bar,
        }
    }
}

/// Static Cournot outcome at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Cournot {
    pub price: f64,
    pub quantities: Vec<f64>,
    pub profits: Vec<f64>,
}

/// Cournot equilibrium given capital stocks and shocks.
pub fn cournot_equilibrium(p: &InvestGameParams, k: &[f64], xi: f64, mu: f64) -> Result<Cournot> {
    if k.iter().any(|&kj| !(kj > 0.0)) {
        return Err(Error::Domain(format!("capital must be positive, got {k:?}")));
    }
    let mc: Vec<f64> = k.iter().map(|&kj| p.marginal_cost(kj, mu)).collect();
    cournot_with_costs(p.eta, &mc, xi)
}

/// Cournot equilibrium for given marginal costs.
///
/// Active firms satisfy `P(1 − s_j/η) = mc_j`; summing shares gives
/// `P = η Σ mc_j / (η n − 1)` over the `n` active firms. Firms are
/// admitted in order of increasing cost while their cost is below the
/// resulting price.
pub fn cournot_with_costs(eta: f64, mc: &[f64], xi: f64) -> Result<Cournot> {
    let mut order: Vec<usize> = (0..mc.len()).collect();
    order.sort_by(|&a, &b| mc[a].total_cmp(&mc[b]));
    let price_with = |n: usize| {
        let sum: f64 = order[..n].iter().map(|&j| mc[j]).sum();
        let denom = eta * n as f64 - 1.0;
        (denom > 0.0).then(|| eta * sum / denom)
    };
    let mut active = 0;
    let mut price = f64::NAN;
    for n in 1..=mc.len() {
        match price_with(n) {
            Some(pn) if mc[order[n - 1]] < pn => {
                active = n;
                price = pn;
            }
            // A market too small for a monopolist can still admit a duopoly.
            None => continue,
            _ => break,
        }
    }
    if active == 0 {
        return Err(Error::NoActiveFirm);
    }
    let total = price.powf(-eta) * xi.exp();
    let mut quantities = vec![0.0; mc.len()];
    let mut profits = vec![0.0; mc.len()];
    for &j in &order[..active] {
        let share = eta * (1.0 - mc[j] / price);
        quantities[j] = share * total;
        profits[j] = (price - mc[j]) * quantities[j];
    }
    Ok(Cournot {
        price,
        quantities,
        profits,
    })
}

/// Symmetric deterministic steady-state capital.
///
/// With `i = δk` forever, the envelope condition gives
/// `V_k = (π_k + θ_a δ²)/(1 − β(1 − δ))`, and the investment first-order
/// condition `θ_k + 2θ_a δ = βV_k` pins down `k`.
pub fn steady_state_capital(p: &InvestGameParams) -> Result<f64> {
    p.validate()?;
    let target = (p.theta_k + 2.0 * p.theta_a * p.delta) * (1.0 - p.beta * (1.0 - p.delta)) / p.beta
        - p.theta_a * p.delta * p.delta;
    let j = p.n_firms;
    let own_profit = |k0: f64, k: f64| -> f64 {
        let mut ks = vec![k; j];
        ks[0] = k0;
        cournot_equilibrium(p, &ks, p.xi_bar, p.mu_bar)
            .map(|c| c.profits[0])
            .unwrap_or(f64::NAN)
    };
    let marginal = |k: f64| {
        let h = 1e-6 * k;
        (own_profit(k + h, k) - own_profit(k - h, k)) / (2.0 * h) - target
    };
    let (lo, hi) = expand_bracket(marginal, 1.0, 0.0, f64::INFINITY)?;
    bisect(marginal, lo, hi, RootOptions::default())
}

/// Grid and approximation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameGridConfig {
    pub capital_degree: usize,
    pub shock_degree: usize,
    pub capital_nodes: usize,
    pub shock_nodes: usize,
    /// Capital box `[k*/span, k*·span]` around the steady state.
    pub capital_span: f64,
    /// Shock boxes `[x̄/span, x̄·span]`.
    pub shock_span: f64,
    pub quadrature_nodes: usize,
}

impl Default for GameGridConfig {
    fn default() -> Self {
        Self {
            capital_degree: 4,
            shock_degree: 2,
            capital_nodes: 5,
            shock_nodes: 3,
            capital_span: 1.5,
            shock_span: 1.03,
            quadrature_nodes: 10,
        }
    }
}

impl GameGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capital_nodes <= self.capital_degree || self.shock_nodes <= self.shock_degree {
            return Err(Error::InvalidConfig(
                "invest_game grid needs more nodes than the polynomial degree on every axis".into(),
            ));
        }
        if !(self.capital_span > 1.0 && self.shock_span > 1.0) {
            return Err(Error::InvalidConfig("invest_game box spans must exceed 1".into()));
        }
        Ok(())
    }
}

/// Expected Chebyshev factors of next-period `(ξ′, μ′)` given `(ξ, μ)`.
#[derive(Debug, Clone, PartialEq)]
struct ShockFactors {
    xi: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InvestGame {
    params: InvestGameParams,
    name: String,
    k_ss: f64,
    basis: PolyBasis,
    fit: LeastSquares,
    /// `(k_1, …, k_J, ξ, μ)`, last coordinate varying fastest.
    points: Vec<Vec<f64>>,
    /// Cournot profits, `[state][firm]`.
    profits: Vec<Vec<f64>>,
    shocks: Vec<ShockFactors>,
    rule: QuadratureRule,
}

impl InvestGame {
    pub fn new(params: InvestGameParams, grid: &GameGridConfig) -> Result<Self> {
        params.validate()?;
        grid.validate()?;
        let j = params.n_firms;
        let k_ss = steady_state_capital(&params)?;
        let k_box = (k_ss / grid.capital_span, k_ss * grid.capital_span);
        let xi_box = (params.xi_bar / grid.shock_span, params.xi_bar * grid.shock_span);
        let mu_box = (params.mu_bar / grid.shock_span, params.mu_bar * grid.shock_span);

        let mut domain = vec![k_box; j];
        domain.push(xi_box);
        domain.push(mu_box);
        let mut degrees = vec![grid.capital_degree; j];
        degrees.extend([grid.shock_degree, grid.shock_degree]);
        let basis = PolyBasis::chebyshev_with_degrees(degrees, domain)?;

        let mut axes = vec![chebyshev_nodes(grid.capital_nodes, k_box.0, k_box.1); j];
        axes.push(chebyshev_nodes(grid.shock_nodes, xi_box.0, xi_box.1));
        axes.push(chebyshev_nodes(grid.shock_nodes, mu_box.0, mu_box.1));
        let points = tensor_grid(&axes);
        let fit = LeastSquares::new(&basis.matrix(&points)?)?;

        let profits = points
            .iter()
            .map(|pt| cournot_equilibrium(&params, &pt[..j], pt[j], pt[j + 1]).map(|c| c.profits))
            .collect::<Result<Vec<_>>>()?;
        let rule = gauss_hermite(grid.quadrature_nodes)?;
        let mut model = Self {
            name: format!("invest_game_j{j}"),
            params,
            k_ss,
            basis,
            fit,
            points,
            profits,
            shocks: Vec::new(),
            rule,
        };
        model.shocks = model
            .points
            .iter()
            .map(|pt| model.shock_factors(pt[j], pt[j + 1]))
            .collect();
        Ok(model)
    }

    pub fn params(&self) -> &InvestGameParams {
        &self.params
    }

    pub fn steady_state_capital(&self) -> f64 {
        self.k_ss
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn profits(&self, state: usize) -> &[f64] {
        &self.profits[state]
    }

    pub fn fit_values(&self, values: &[f64]) -> Result<FittedFunction> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: values.len(),
            });
        }
        FittedFunction::new(self.basis.clone(), self.fit.solve(values))
    }

    /// Zero investment, and values of keeping capital constant (`i = δk`)
    /// with shocks frozen at their current levels.
    pub fn initial_guess(&self) -> (ValueTable, ActionTable) {
        let p = &self.params;
        let j = p.n_firms;
        let n = self.points.len();
        let values = ValueTable::from_fn(j, n, |a, s| {
            let k = self.points[s][a];
            (self.profits[s][a] - p.investment_cost(k, p.delta * k)) / (1.0 - p.beta)
        });
        (values, ActionTable::filled(1, j, n, 0.0))
    }

    fn shock_factors(&self, xi: f64, mu: f64) -> ShockFactors {
        let j = self.params.n_firms;
        let expect = |axis: usize, law: Ar1Law, x: f64| {
            let size = self.basis.axis_values(axis, x).len();
            let mut acc = vec![0.0; size];
            for (w, xn) in law.nodes(x, &self.rule) {
                for (a, v) in acc.iter_mut().zip(self.basis.axis_values(axis, xn)) {
                    *a += w * v;
                }
            }
            acc
        };
        ShockFactors {
            xi: expect(j, self.params.xi_law(), xi),
            mu: expect(j + 1, self.params.mu_law(), mu),
        }
    }

    /// Chebyshev values and slopes along capital axis `d`, continued
    /// linearly beyond the box so that value and slope stay continuous.
    fn capital_factor(&self, d: usize, k: f64) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.basis.domain()[d];
        let edge = k.clamp(lo, hi);
        let slope = self.basis.axis_derivatives(d, edge);
        let mut value = self.basis.axis_values(d, edge);
        if edge != k {
            for (v, s) in value.iter_mut().zip(&slope) {
                *v += s * (k - edge);
            }
        }
        (value, slope)
    }

    /// `E[V̄(k′, ξ′, μ′)]` and `∂/∂k′_agent` for fixed next-period capital.
    fn expected(&self, f: &FittedFunction, kn: &[f64], shocks: &ShockFactors, agent: usize) -> (f64, f64) {
        let mut slope = Vec::new();
        let mut factors: Vec<Vec<f64>> = Vec::with_capacity(kn.len() + 2);
        for (d, &k) in kn.iter().enumerate() {
            let (v, s) = self.capital_factor(d, k);
            if d == agent {
                slope = s;
            }
            factors.push(v);
        }
        factors.push(shocks.xi.clone());
        factors.push(shocks.mu.clone());
        let w = f.eval_factors(&factors);
        factors[agent] = slope;
        (w, f.eval_factors(&factors))
    }

    fn k_next(&self, k: &[f64], investment: &[f64]) -> Vec<f64> {
        let d = self.params.delta;
        k.iter().zip(investment).map(|(&kj, &ij)| (1.0 - d) * kj + ij).collect()
    }

    /// `∂Q_j/∂i_j` at an arbitrary state, for accuracy checks off the grid.
    pub fn foc_gradient(
        &self,
        values: &[FittedFunction],
        k: &[f64],
        xi: f64,
        mu: f64,
        investment: &[f64],
        agent: usize,
    ) -> f64 {
        let p = &self.params;
        let shocks = self.shock_factors(xi, mu);
        let kn = self.k_next(k, investment);
        let (_, dw) = self.expected(&values[agent], &kn, &shocks, agent);
        -p.investment_cost_grad(k[agent], investment[agent]) + p.beta * dw
    }

    /// Per-period `log10 max_j |∂Q_j/∂i_j|` along a simulated path that
    /// starts at the steady state with shocks at their means.
    ///
    /// `innovations` holds standard-normal `(ε_ξ, ε_μ)` draws; policies off
    /// the grid are evaluated from their fitted polynomials.
    pub fn foc_residual_path(
        &self,
        values: &ValueTable,
        actions: &ActionTable,
        innovations: &[(f64, f64)],
    ) -> Result<Vec<f64>> {
        let p = &self.params;
        let j = p.n_firms;
        let v_fit = (0..j).map(|a| self.fit_values(values.agent(a))).collect::<Result<Vec<_>>>()?;
        let i_fit = (0..j)
            .map(|a| self.fit_values(&actions.dimension(0)[a * self.points.len()..(a + 1) * self.points.len()]))
            .collect::<Result<Vec<_>>>()?;
        let (xi_law, mu_law) = (p.xi_law(), p.mu_law());
        let mut k = vec![self.k_ss; j];
        let (mut xi, mut mu) = (p.xi_bar, p.mu_bar);
        let mut out = Vec::with_capacity(innovations.len());
        for &(e_xi, e_mu) in innovations {
            let mut state = k.clone();
            state.extend([xi, mu]);
            let inv: Vec<f64> = i_fit.iter().map(|f| f.eval(&state)).collect();
            let worst = (0..j)
                .map(|a| self.foc_gradient(&v_fit, &k, xi, mu, &inv, a).abs())
                .fold(0.0f64, f64::max);
            out.push(worst.max(1e-16).log10());
            k = self.k_next(&k, &inv);
            xi = xi_law.next(xi, p.sigma_xi * e_xi);
            mu = mu_law.next(mu, p.sigma_mu * e_mu);
        }
        Ok(out)
    }
}

impl DynamicModel for InvestGame {
    type Cont = Vec<FittedFunction>;

    fn name(&self) -> &str {
        &self.name
    }

    fn n_agents(&self) -> usize {
        self.params.n_firms
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn n_states(&self) -> usize {
        self.points.len()
    }

    fn beta(&self) -> f64 {
        self.params.beta
    }

    fn prepare(&self, values: &ValueTable) -> Result<Vec<FittedFunction>> {
        (0..self.params.n_firms).map(|a| self.fit_values(values.agent(a))).collect()
    }

    fn reward(&self, state: usize, agent: usize, actions: &[f64]) -> f64 {
        let k = self.points[state][agent];
        self.profits[state][agent] - self.params.investment_cost(k, actions[agent])
    }

    fn reward_grad(&self, state: usize, agent: usize, actions: &[f64]) -> Vec<f64> {
        let k = self.points[state][agent];
        vec![-self.params.investment_cost_grad(k, actions[agent])]
    }

    fn continuation(&self, cont: &Vec<FittedFunction>, state: usize, agent: usize, actions: &[f64]) -> f64 {
        self.q_eval(cont, state, agent, actions).continuation
    }

    fn continuation_grad(&self, cont: &Vec<FittedFunction>, state: usize, agent: usize, actions: &[f64]) -> Vec<f64> {
        self.q_eval(cont, state, agent, actions).continuation_grad
    }

    fn q_eval(&self, cont: &Vec<FittedFunction>, state: usize, agent: usize, actions: &[f64]) -> QEval {
        let j = self.params.n_firms;
        let k = &self.points[state][..j];
        let kn = self.k_next(k, actions);
        let (w, dw) = self.expected(&cont[agent], &kn, &self.shocks[state], agent);
        QEval {
            reward: self.reward(state, agent, actions),
            continuation: w,
            reward_grad: self.reward_grad(state, agent, actions),
            continuation_grad: vec![dw],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss–Seidel best-response iteration on quantities.
    fn cournot_oracle(eta: f64, mc: &[f64], xi: f64) -> f64 {
        let inverse_demand = |q: f64| (q * (-xi).exp()).powf(-1.0 / eta);
        let mut q = vec![1.0; mc.len()];
        for _ in 0..500 {
            for j in 0..mc.len() {
                let others: f64 = q.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| v).sum();
                let foc = |x: f64| {
                    let total = others + x;
                    inverse_demand(total) * (1.0 - x / (eta * total)) - mc[j]
                };
                q[j] = if foc(1e-12) <= 0.0 {
                    0.0
                } else {
                    bisect(foc, 1e-12, 1e6, RootOptions::default()).unwrap()
                };
            }
        }
        inverse_demand(q.iter().sum())
    }

    #[test]
    fn monopoly_and_symmetric_duopoly() {
        let mc = 2.0;
        let c = cournot_with_costs(1.5, &[mc], 4.0).unwrap();
        assert!((c.price - 3.0 * mc).abs() < 1e-12);
        assert!((c.price - cournot_oracle(1.5, &[mc], 4.0)).abs() < 1e-8);

        let c = cournot_with_costs(1.5, &[mc, mc], 4.0).unwrap();
        assert!((c.price - 1.5 * mc).abs() < 1e-12);
        assert!((c.quantities[0] - c.quantities[1]).abs() < 1e-12);
        assert!((c.price - cournot_oracle(1.5, &[mc, mc], 4.0)).abs() < 1e-8);
    }

    #[test]
    fn market_clearing_and_focs() {
        let eta = 1.5;
        let xi = 4.1;
        for mc in [vec![1.0, 1.3, 0.8], vec![2.0, 2.5], vec![1.0, 9.0]] {
            let c = cournot_with_costs(eta, &mc, xi).unwrap();
            let total: f64 = c.quantities.iter().sum();
            assert!((total - c.price.powf(-eta) * xi.exp()).abs() < 1e-8);
            for (j, &q) in c.quantities.iter().enumerate() {
                if q > 0.0 {
                    let foc = c.price * (1.0 - q / (eta * total)) - mc[j];
                    assert!(foc.abs() < 1e-8);
                } else {
                    assert!(mc[j] >= c.price);
                }
            }
            assert!((c.price - cournot_oracle(eta, &mc, xi)).abs() < 1e-6 * c.price);
        }
    }

    #[test]
    fn high_cost_firm_is_inactive() {
        let c = cournot_with_costs(1.5, &[1.0, 9.0], 4.0).unwrap();
        assert_eq!(c.quantities[1], 0.0);
        assert!((c.price - 3.0).abs() < 1e-12);
    }

    #[test]
    fn profits_fall_with_own_cost() {
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let c = cournot_with_costs(1.5, &[1.0 + 0.1 * i as f64, 1.5], 4.0).unwrap();
            assert!(c.profits[0] <= prev);
            prev = c.profits[0];
        }
    }

    #[test]
    fn cost_gradient_examples() {
        let p = InvestGameParams::benchmark(1);
        assert_eq!(p.investment_cost(2.0, 0.0), 0.0);
        assert_eq!(p.investment_cost_grad(2.0, 0.0), p.theta_k);
        let mut q = p.clone();
        q.theta_a = 0.0;
        assert_eq!(q.investment_cost_grad(2.0, 5.0), q.theta_k);
    }

    #[test]
    fn grid_shape() {
        let m = InvestGame::new(InvestGameParams::benchmark(1), &GameGridConfig::default()).unwrap();
        assert_eq!(m.points()[0].len(), 3);
        assert_eq!(m.n_states(), 5 * 3 * 3);
        let m = InvestGame::new(InvestGameParams::benchmark(2), &GameGridConfig::default()).unwrap();
        assert_eq!(m.n_states(), 5 * 5 * 3 * 3);
    }

    #[test]
    fn steady_state_satisfies_euler_condition() {
        for j in [1, 2] {
            let p = InvestGameParams::benchmark(j);
            let k = steady_state_capital(&p).unwrap();
            let h = 1e-5 * k;
            let profit = |k0: f64| {
                let mut ks = vec![k; j];
                ks[0] = k0;
                cournot_equilibrium(&p, &ks, p.xi_bar, p.mu_bar).unwrap().profits[0]
            };
            let pi_k = (profit(k + h) - profit(k - h)) / (2.0 * h);
            let v_k = (pi_k + p.theta_a * p.delta * p.delta) / (1.0 - p.beta * (1.0 - p.delta));
            let lhs = p.investment_cost_grad(k, p.delta * k);
            assert!((lhs - p.beta * v_k).abs() < 1e-6, "J={j}: {lhs} vs {}", p.beta * v_k);
        }
    }

    #[test]
    fn q_gradient_matches_finite_differences() {
        let m = InvestGame::new(InvestGameParams::benchmark(2), &GameGridConfig::default()).unwrap();
        let (v0, _) = m.initial_guess();
        let cont = m.prepare(&v0).unwrap();
        let beta = m.beta();
        for s in [0, 37, 120, 224] {
            for agent in 0..2 {
                let k = m.points()[s][agent];
                let a = vec![0.05 * k, 0.02 * k];
                let g = m.q_eval(&cont, s, agent, &a).gradient(beta)[0];
                let h = 1e-6 * k;
                let mut up = a.clone();
                let mut dn = a.clone();
                up[agent] += h;
                dn[agent] -= h;
                let fd = (m.q_eval(&cont, s, agent, &up).value(beta) - m.q_eval(&cont, s, agent, &dn).value(beta))
                    / (2.0 * h);
                assert!((g - fd).abs() <= 1e-6 * g.abs().max(1.0), "s={s} j={agent}: {g} vs {fd}");
            }
        }
    }
}
