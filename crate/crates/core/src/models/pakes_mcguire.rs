//! Discrete-state quality ladder game with logit demand.
//!
//! Firm qualities `w_j ∈ {1, …, K̄}` move as `w′_j = w_j + τ_j − ν`, where
//! `τ_j` succeeds with probability `γi/(1 + γi)` and the industry-wide
//! depreciation shock `ν` hits with probability `δ`. Moves that would leave
//! the ladder stay on the boundary rung. Prices solve the static logit
//! Bertrand game; investment costs `i + θ₂i²`.
//!
//! Values are exact tables over all `K̄^J` states and expectations are exact
//! sums over the `2^{J+1}` transition outcomes.

use serde::{Deserialize, Serialize};

use crate::algorithms::best_responses;
use crate::error::{Error, Result};
use crate::model_api::{bellman_rhs, ActionTable, DynamicModel, InnerSolver, QEval, ValueTable};
use crate::scalar::{newton_bisect, RootOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmParams {
    pub n_firms: usize,
    pub k_bar: usize,
    pub w_star: f64,
    /// Probability of the industry-wide depreciation shock.
    pub delta: f64,
    pub mc: f64,
    pub market_size: f64,
    pub beta: f64,
    /// Quadratic investment cost coefficient.
    pub theta2: f64,
    /// Investment effectiveness in `Pr(τ = 1) = γi/(1 + γi)`.
    pub gamma_inv: f64,
}

impl Default for PmParams {
    fn default() -> Self {
        Self::benchmark(1, 0.0)
    }
}

impl PmParams {
    pub fn benchmark(n_firms: usize, theta2: f64) -> Self {
        Self {
            n_firms,
            k_bar: 19,
            w_star: 12.0,
            delta: 0.7,
            mc: 5.0,
            market_size: 5.0,
            beta: 0.925,
            theta2,
            gamma_inv: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("pakes_mcguire: {m}")));
        if self.n_firms == 0 || self.n_firms > 4 {
            return bad("n_firms must be between 1 and 4");
        }
        if self.k_bar < 2 {
            return bad("k_bar must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad("delta must lie in [0, 1]");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.theta2 >= 0.0 && self.gamma_inv > 0.0 && self.market_size > 0.0) {
            return bad("theta2 must be nonnegative, gamma_inv and market_size positive");
        }
        if !(self.mc.is_finite() && self.w_star.is_finite()) {
            return bad("mc and w_star must be finite");
        }
        Ok(())
    }

    /// Product quality `g(w)`: linear up to `w*`, concave beyond.
    pub fn quality(&self, w: f64) -> f64 {
        if w <= self.w_star {
            w
        } else {
            w + (2.0 - (self.w_star - w).exp()).ln()
        }
    }

    pub fn investment_cost(&self, i: f64) -> f64 {
        i + self.theta2 * i * i
    }

    /// `Pr(τ = 1)` and its derivative in `i`.
    pub fn success_probability(&self, i: f64) -> Result<(f64, f64)> {
        if !(i >= 0.0) {
            return Err(Error::Domain(format!("investment must be nonnegative, got {i}")));
        }
        let g = self.gamma_inv;
        Ok((g * i / (1.0 + g * i), g / ((1.0 + g * i) * (1.0 + g * i))))
    }
}

/// Static logit Bertrand equilibrium at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PmPrices {
    pub prices: Vec<f64>,
    pub shares: Vec<f64>,
    pub profits: Vec<f64>,
}

fn logit_shares(quality: &[f64], prices: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = quality.iter().zip(prices).map(|(g, p)| (g - p).exp()).collect();
    let denom = 1.0 + e.iter().sum::<f64>();
    e.iter().map(|v| v / denom).collect()
}

/// Principal branch of Lambert W for `x > 0`, from `u + ln u = ln x`.
fn lambert_w(x: f64) -> f64 {
    let lo = 0.5 * x / (1.0 + x);
    let hi = (1.0 + x).ln() + 1.0;
    let target = x.ln();
    newton_bisect(|u| (u + u.ln() - target, 1.0 + 1.0 / u), lo, hi, None, RootOptions::default())
        .expect("u + ln u is increasing and the bracket spans W(x)")
}

/// Equilibrium prices solving `p_j = mc + 1/(1 − s_j)` for every firm.
///
/// Each firm's best response to rivals' prices is `mc + 1 + W(e^{g_j − mc − 1}/A_j)`
/// with `A_j = 1 + Σ_{k≠j} e^{g_k − p_k}`; best responses are iterated
/// Gauss–Seidel style to `10⁻¹²`.
pub fn pm_price_equilibrium(p: &PmParams, w: &[usize]) -> Result<PmPrices> {
    if w.iter().any(|&x| x == 0 || x > p.k_bar) {
        return Err(Error::Domain(format!("state {w:?} outside 1..={}", p.k_bar)));
    }
    let quality: Vec<f64> = w.iter().map(|&x| p.quality(x as f64)).collect();
    let mut prices = vec![p.mc + 1.0; w.len()];
    let mut converged = false;
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for j in 0..w.len() {
            let rivals: f64 = (0..w.len())
                .filter(|&k| k != j)
                .map(|k| (quality[k] - prices[k]).exp())
                .sum();
            let x = (quality[j] - p.mc - 1.0).exp() / (1.0 + rivals);
            let next = p.mc + 1.0 + lambert_w(x);
            change = change.max((next - prices[j]).abs());
            prices[j] = next;
        }
        if change <= 1e-12 * prices.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(10_000));
    }
    let shares = logit_shares(&quality, &prices);
    let profits = prices
        .iter()
        .zip(&shares)
        .map(|(pr, s)| (pr - p.mc) * p.market_size * s)
        .collect();
    Ok(PmPrices { prices, shares, profits })
}

/// Closed-form best response without quadratic costs:
/// `max{(−1 + √(βγ(v₁ − v₂)))/γ, 0}`.
pub fn pm_analytic_investment(p: &PmParams, v1: f64, v2: f64) -> f64 {
    let radicand = p.beta * p.gamma_inv * (v1 - v2);
    if radicand <= 1.0 {
        return 0.0;
    }
    (radicand.sqrt() - 1.0) / p.gamma_inv
}

#[derive(Debug, Clone)]
pub struct PakesMcGuire {
    params: PmParams,
    name: String,
    /// Quality ladders, firm 0 varying slowest.
    states: Vec<Vec<usize>>,
    profits: Vec<Vec<f64>>,
    /// Next-state index for outcome `ν·2^J + Σ_k τ_k 2^k`, `[state][outcome]`.
    next: Vec<Vec<usize>>,
}

impl PakesMcGuire {
    pub fn new(params: PmParams) -> Result<Self> {
        params.validate()?;
        let j = params.n_firms;
        let kb = params.k_bar;
        let n = kb.pow(j as u32);
        let states: Vec<Vec<usize>> = (0..n)
            .map(|mut idx| {
                let mut w = vec![0; j];
                for slot in w.iter_mut().rev() {
                    *slot = idx % kb + 1;
                    idx /= kb;
                }
                w
            })
            .collect();
        let profits = states
            .iter()
            .map(|w| pm_price_equilibrium(&params, w).map(|e| e.profits))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self {
            name: format!("pakes_mcguire_j{j}"),
            params,
            states,
            profits,
            next: Vec::new(),
        };
        model.next = (0..n)
            .map(|s| {
                (0..2usize << j)
                    .map(|outcome| {
                        let nu = outcome >> j;
                        let w: Vec<usize> = model.states[s]
                            .iter()
                            .enumerate()
                            .map(|(k, &wk)| {
                                let up = (outcome >> k) & 1;
                                (wk + up).saturating_sub(nu).clamp(1, kb)
                            })
                            .collect();
                        model.index(&w)
                    })
                    .collect()
            })
            .collect();
        Ok(model)
    }

    pub fn params(&self) -> &PmParams {
        &self.params
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn profits(&self, state: usize) -> &[f64] {
        &self.profits[state]
    }

    /// Position of a quality vector in the state list.
    pub fn index(&self, w: &[usize]) -> usize {
        w.iter().fold(0, |acc, &x| acc * self.params.k_bar + (x - 1))
    }

    /// `V = 0`, `i = 0`.
    pub fn initial_guess(&self) -> (ValueTable, ActionTable) {
        let (j, n) = (self.params.n_firms, self.states.len());
        (ValueTable::filled(j, n, 0.0), ActionTable::filled(1, j, n, 0.0))
    }

    /// `(v₁, v₂)`: expected next value of `agent` when its own investment
    /// succeeds or fails, integrating over the rivals' outcomes and `ν`.
    pub fn split_expectation(&self, values: &[f64], state: usize, agent: usize, actions: &[f64]) -> (f64, f64) {
        let j = self.params.n_firms;
        let probs: Vec<f64> = actions
            .iter()
            .map(|&i| {
                let g = self.params.gamma_inv * i.max(0.0);
                g / (1.0 + g)
            })
            .collect();
        let d = self.params.delta;
        let (mut v1, mut v2) = (0.0, 0.0);
        for outcome in 0..2usize << j {
            let nu = outcome >> j;
            let mut weight = if nu == 1 { d } else { 1.0 - d };
            for (k, &pk) in probs.iter().enumerate() {
                if k != agent {
                    weight *= if (outcome >> k) & 1 == 1 { pk } else { 1.0 - pk };
                }
            }
            let v = weight * values[self.next[state][outcome]];
            if (outcome >> agent) & 1 == 1 {
                v1 += v;
            } else {
                v2 += v;
            }
        }
        (v1, v2)
    }

    /// Inner solver for VFI-type methods: closed form when `θ₂ = 0`.
    pub fn default_inner_solver(&self) -> InnerSolver {
        if self.params.theta2 == 0.0 {
            InnerSolver::Analytic
        } else {
            InnerSolver::Newton
        }
    }

    /// `log10` sup-norm gaps `(‖Φ_V(V, i) − V‖∞, ‖i* − i‖∞)` after one
    /// application of the Bellman map and the best-response map, floored at
    /// `−16`.
    pub fn sup_residuals(&self, values: &ValueTable, actions: &ActionTable) -> Result<(f64, f64)> {
        let cont = self.prepare(values)?;
        let v_gap = bellman_rhs(self, &cont, actions)
            .as_slice()
            .iter()
            .zip(values.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let i_gap = best_responses(self, &cont, actions, self.default_inner_solver())?.sup_gap(actions);
        let floor = |x: f64| x.log10().max(-16.0);
        Ok((floor(v_gap), floor(i_gap)))
    }
}

impl DynamicModel for PakesMcGuire {
    type Cont = ValueTable;

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
        self.states.len()
    }

    fn beta(&self) -> f64 {
        self.params.beta
    }

    fn bounds(&self, _agent: usize, _dim: usize, _state: usize) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn prepare(&self, values: &ValueTable) -> Result<ValueTable> {
        Ok(values.clone())
    }

    fn reward(&self, state: usize, agent: usize, actions: &[f64]) -> f64 {
        self.profits[state][agent] - self.params.investment_cost(actions[agent])
    }

    fn reward_grad(&self, _state: usize, agent: usize, actions: &[f64]) -> Vec<f64> {
        vec![-1.0 - 2.0 * self.params.theta2 * actions[agent]]
    }

    fn continuation(&self, cont: &ValueTable, state: usize, agent: usize, actions: &[f64]) -> f64 {
        self.q_eval(cont, state, agent, actions).continuation
    }

    fn continuation_grad(&self, cont: &ValueTable, state: usize, agent: usize, actions: &[f64]) -> Vec<f64> {
        self.q_eval(cont, state, agent, actions).continuation_grad
    }

    fn q_eval(&self, cont: &ValueTable, state: usize, agent: usize, actions: &[f64]) -> QEval {
        let (v1, v2) = self.split_expectation(cont.agent(agent), state, agent, actions);
        let i = actions[agent].max(0.0);
        let g = self.params.gamma_inv;
        let p = g * i / (1.0 + g * i);
        let dp = g / ((1.0 + g * i) * (1.0 + g * i));
        QEval {
            reward: self.reward(state, agent, actions),
            continuation: p * v1 + (1.0 - p) * v2,
            reward_grad: self.reward_grad(state, agent, actions),
            continuation_grad: vec![dp * (v1 - v2)],
        }
    }

    fn best_response(
        &self,
        cont: &ValueTable,
        state: usize,
        agent: usize,
        actions: &[f64],
        solver: InnerSolver,
    ) -> Option<Result<Vec<f64>>> {
        if solver != InnerSolver::Analytic {
            return None;
        }
        if self.params.theta2 != 0.0 {
            return Some(Err(Error::Unsupported {
                algorithm: "analytic best response with theta2 > 0".into(),
                model: self.name.clone(),
            }));
        }
        let (v1, v2) = self.split_expectation(cont.agent(agent), state, agent, actions);
        Some(Ok(vec![pm_analytic_investment(&self.params, v1, v2)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::bisect;

    #[test]
    fn lambert_w_inverts_u_exp_u() {
        for x in [1e-8, 0.1, 1.0, std::f64::consts::E, 50.0, 1e8] {
            let u = lambert_w(x);
            assert!((u * u.exp() - x).abs() <= 1e-12 * x.max(1.0), "x = {x}");
        }
        assert!((lambert_w(std::f64::consts::E) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn monopoly_price_matches_grid_search() {
        let p = PmParams::benchmark(1, 0.0);
        let eq = pm_price_equilibrium(&p, &[p.k_bar]).unwrap();
        let g = p.quality(p.k_bar as f64);
        let profit = |pr: f64| (pr - p.mc) * logit_shares(&[g], &[pr])[0];
        let best = (0..=200_000)
            .map(|n| p.mc + n as f64 * 1e-4)
            .max_by(|a, b| profit(*a).total_cmp(&profit(*b)))
            .unwrap();
        assert!((eq.prices[0] - best).abs() <= 1e-4, "{} vs {best}", eq.prices[0]);
    }

    #[test]
    fn low_quality_price_approaches_markup_of_one() {
        let mut p = PmParams::benchmark(1, 0.0);
        p.mc = 40.0;
        let eq = pm_price_equilibrium(&p, &[1]).unwrap();
        assert!((eq.prices[0] - (p.mc + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_states_give_equal_prices() {
        let p = PmParams::benchmark(3, 0.0);
        let eq = pm_price_equilibrium(&p, &[7, 7, 7]).unwrap();
        assert!((eq.prices[0] - eq.prices[2]).abs() < 1e-12);
        assert!((eq.shares[1] - eq.shares[2]).abs() < 1e-12);
        for (pr, s) in eq.prices.iter().zip(&eq.shares) {
            assert!((pr - p.mc - 1.0 / (1.0 - s)).abs() < 1e-10);
        }
    }

    #[test]
    fn duopoly_best_responses_agree_with_root_finder() {
        let p = PmParams::benchmark(2, 0.0);
        let eq = pm_price_equilibrium(&p, &[14, 5]).unwrap();
        let g = [p.quality(14.0), p.quality(5.0)];
        let foc = |pr: f64| pr - p.mc - 1.0 / (1.0 - logit_shares(&g, &[pr, eq.prices[1]])[0]);
        let own = bisect(foc, p.mc, p.mc + 50.0, RootOptions::default()).unwrap();
        assert!((own - eq.prices[0]).abs() < 1e-9);
    }

    #[test]
    fn quality_is_continuous_at_the_kink() {
        let p = PmParams::benchmark(1, 0.0);
        assert_eq!(p.quality(p.w_star), p.w_star);
        let right = p.quality(p.w_star + 1e-9);
        assert!((right - p.w_star).abs() < 1e-8);
        assert!(p.quality(19.0) < 19.0 + 2f64.ln());
    }

    #[test]
    fn transition_examples() {
        let p = PmParams::benchmark(1, 0.0);
        assert_eq!(p.success_probability(0.0).unwrap().0, 0.0);
        let (pr, _) = p.success_probability(1.0).unwrap();
        assert!((pr - 0.75).abs() < 1e-15);
        assert!((pr * (1.0 - p.delta) - 0.225).abs() < 1e-15);
        assert!(p.success_probability(-0.1).is_err());
    }

    #[test]
    fn ladder_boundaries_absorb_moves() {
        let m = PakesMcGuire::new(PmParams::benchmark(2, 0.0)).unwrap();
        assert_eq!(m.n_states(), 361);
        let top = m.index(&[19, 19]);
        // τ = (1, 1), ν = 0 stays at the top rung.
        assert_eq!(m.next[top][0b011], top);
        let bottom = m.index(&[1, 1]);
        // τ = (0, 0), ν = 1 stays at the bottom rung.
        assert_eq!(m.next[bottom][0b100], bottom);
        let mid = m.index(&[5, 9]);
        assert_eq!(m.states[m.next[mid][0b101]], vec![5, 8]);
        assert_eq!(m.states[m.next[mid][0b010]], vec![5, 10]);
    }

    #[test]
    fn expectation_weights_sum_to_one() {
        let m = PakesMcGuire::new(PmParams::benchmark(2, 0.0)).unwrap();
        let ones = ValueTable::filled(2, m.n_states(), 1.0);
        let s = m.index(&[4, 11]);
        let a = [0.4, 1.3];
        let (v1, v2) = m.split_expectation(ones.agent(0), s, 0, &a);
        assert!((v1 - 1.0).abs() < 1e-15 && (v2 - 1.0).abs() < 1e-15);
        let q = m.q_eval(&ones, s, 0, &a);
        assert!((q.continuation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_investment_examples() {
        let p = PmParams::benchmark(1, 0.0);
        let scale = p.beta * p.gamma_inv;
        assert_eq!(pm_analytic_investment(&p, 3.0, 3.0), 0.0);
        assert_eq!(pm_analytic_investment(&p, 1.0 / scale, 0.0), 0.0);
        let i = pm_analytic_investment(&p, 4.0 / scale, 0.0);
        assert!((i - 1.0 / p.gamma_inv).abs() < 1e-12);
    }
}
