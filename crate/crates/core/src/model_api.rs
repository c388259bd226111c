//! The contract between dynamic models and solvers.
//!
//! A model exposes, for every agent `j` and grid state `ŝ`, the pieces of the
//! action value `Q_j(a, ŝ; V) = r_j(a, ŝ) + β W_j(a, ŝ; V̄)` and its gradient in
//! the agent's own actions. Solvers only ever talk to this trait.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixed_point::{BlockInfo, BlockKind, BlockLayout, BlockVector, IterationTrace};

/// Value of `Q_j` and its pieces at one (state, agent) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QEval {
    pub reward: f64,
    pub continuation: f64,
    pub reward_grad: Vec<f64>,
    pub continuation_grad: Vec<f64>,
}

impl QEval {
    pub fn value(&self, beta: f64) -> f64 {
        self.reward + beta * self.continuation
    }

    pub fn gradient(&self, beta: f64) -> Vec<f64> {
        self.reward_grad
            .iter()
            .zip(&self.continuation_grad)
            .map(|(r, w)| r + beta * w)
            .collect()
    }
}

/// How a best response is computed inside VFI-type iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Newton's method on the first-order condition.
    #[default]
    Newton,
    /// Bounded one-dimensional maximization.
    BoundedScalar,
    /// Closed-form best response.
    Analytic,
}

/// A discrete-time infinite-horizon model with continuous actions.
///
/// Action profiles at a state are flat slices laid out `[agent * D + d]`.
/// All callbacks must be pure so solvers can evaluate states in parallel.
pub trait DynamicModel: Sync {
    /// Continuation-value representation built from grid values, e.g. a
    /// fitted polynomial or the table itself.
    type Cont: Sync;

    fn name(&self) -> &str;
    fn n_agents(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn n_states(&self) -> usize;
    fn beta(&self) -> f64;

    /// Box `[l, u]` for one action coordinate; infinite ends are allowed.
    fn bounds(&self, _agent: usize, _dim: usize, _state: usize) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Builds `V̄` from grid values.
    fn prepare(&self, values: &ValueTable) -> Result<Self::Cont>;

    fn reward(&self, state: usize, agent: usize, actions: &[f64]) -> f64;

    /// `∂r_j/∂a_j`, length `D`.
    fn reward_grad(&self, state: usize, agent: usize, actions: &[f64]) -> Vec<f64>;

    /// `W_j(a, ŝ; V̄) = E[V̄_j(s′) | ŝ, a]`.
    fn continuation(&self, cont: &Self::Cont, state: usize, agent: usize, actions: &[f64]) -> f64;

    /// `∂W_j/∂a_j`, length `D`.
    fn continuation_grad(
        &self,
        cont: &Self::Cont,
        state: usize,
        agent: usize,
        actions: &[f64],
    ) -> Vec<f64>;

    /// All four pieces at once; models override this to share work.
    fn q_eval(&self, cont: &Self::Cont, state: usize, agent: usize, actions: &[f64]) -> QEval {
        QEval {
            reward: self.reward(state, agent, actions),
            continuation: self.continuation(cont, state, agent, actions),
            reward_grad: self.reward_grad(state, agent, actions),
            continuation_grad: self.continuation_grad(cont, state, agent, actions),
        }
    }

    /// Maximizer of `Q_j` over the agent's own actions holding rivals fixed,
    /// when the model has a specialised routine. `None` means "use the
    /// generic Newton inner solver".
    fn best_response(
        &self,
        _cont: &Self::Cont,
        _state: usize,
        _agent: usize,
        _actions: &[f64],
        _solver: InnerSolver,
    ) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// Grid values `V_j(ŝ)`, stored `[agent][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    n_agents: usize,
    n_states: usize,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn new(n_agents: usize, n_states: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_agents * n_states {
            return Err(Error::DimensionMismatch {
                expected: n_agents * n_states,
                got: data.len(),
            });
        }
        Ok(Self {
            n_agents,
            n_states,
            data,
        })
    }

    pub fn filled(n_agents: usize, n_states: usize, value: f64) -> Self {
        Self {
            n_agents,
            n_states,
            data: vec![value; n_agents * n_states],
        }
    }

    pub fn from_fn(n_agents: usize, n_states: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_agents * n_states);
        for j in 0..n_agents {
            for s in 0..n_states {
                data.push(f(j, s));
            }
        }
        Self {
            n_agents,
            n_states,
            data,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn get(&self, agent: usize, state: usize) -> f64 {
        self.data[agent * self.n_states + state]
    }

    pub fn set(&mut self, agent: usize, state: usize, value: f64) {
        self.data[agent * self.n_states + state] = value;
    }

    /// Values of one agent over the grid.
    pub fn agent(&self, agent: usize) -> &[f64] {
        &self.data[agent * self.n_states..(agent + 1) * self.n_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Grid actions `a_j^d(ŝ)`, stored `[d][agent][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    dim: usize,
    n_agents: usize,
    n_states: usize,
    data: Vec<f64>,
}

impl ActionTable {
    pub fn new(dim: usize, n_agents: usize, n_states: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * n_agents * n_states {
            return Err(Error::DimensionMismatch {
                expected: dim * n_agents * n_states,
                got: data.len(),
            });
        }
        Ok(Self {
            dim,
            n_agents,
            n_states,
            data,
        })
    }

    pub fn filled(dim: usize, n_agents: usize, n_states: usize, value: f64) -> Self {
        Self {
            dim,
            n_agents,
            n_states,
            data: vec![value; dim * n_agents * n_states],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    fn index(&self, dim: usize, agent: usize, state: usize) -> usize {
        (dim * self.n_agents + agent) * self.n_states + state
    }

    pub fn get(&self, dim: usize, agent: usize, state: usize) -> f64 {
        self.data[self.index(dim, agent, state)]
    }

    pub fn set(&mut self, dim: usize, agent: usize, state: usize, value: f64) {
        let i = self.index(dim, agent, state);
        self.data[i] = value;
    }

    /// Flat action profile `[agent * D + d]` at one state.
    pub fn profile(&self, state: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_agents * self.dim);
        for j in 0..self.n_agents {
            for d in 0..self.dim {
                p.push(self.get(d, j, state));
            }
        }
        p
    }

    /// All values of one action dimension, stacked over agents then states.
    pub fn dimension(&self, dim: usize) -> &[f64] {
        let len = self.n_agents * self.n_states;
        &self.data[dim * len..(dim + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute difference to another table of the same shape.
    pub fn sup_gap(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative difference `|a − b| / max(|b|, 1e-12)`.
    pub fn relative_gap(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-12))
            .fold(0.0, f64::max)
    }
}

/// Converged (or last) iterate of a solve.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub algorithm: String,
    pub values: ValueTable,
    pub actions: ActionTable,
    pub trace: IterationTrace,
    pub cpu_sec: f64,
}

impl SolutionBundle {
    pub fn converged(&self) -> bool {
        self.trace.converged()
    }
}

fn q_evals<M: DynamicModel>(model: &M, cont: &M::Cont, actions: &ActionTable) -> Vec<Vec<QEval>> {
    (0..model.n_states())
        .into_par_iter()
        .map(|s| {
            let profile = actions.profile(s);
            (0..model.n_agents())
                .map(|j| model.q_eval(cont, s, j, &profile))
                .collect()
        })
        .collect()
}

/// `Φ_V(V, a)(ŝ) = r(a(ŝ), ŝ) + β W(a(ŝ), ŝ; V̄)` using the given actions.
pub fn bellman_rhs<M: DynamicModel>(model: &M, cont: &M::Cont, actions: &ActionTable) -> ValueTable {
    let beta = model.beta();
    let evals = q_evals(model, cont, actions);
    ValueTable::from_fn(model.n_agents(), model.n_states(), |j, s| evals[s][j].value(beta))
}

/// `∂Q_j/∂a_j` at every (agent, state, dimension).
pub fn q_gradient<M: DynamicModel>(model: &M, cont: &M::Cont, actions: &ActionTable) -> ActionTable {
    let beta = model.beta();
    let evals = q_evals(model, cont, actions);
    gradient_table(model, &evals, beta)
}

fn gradient_table<M: DynamicModel>(model: &M, evals: &[Vec<QEval>], beta: f64) -> ActionTable {
    let (d_n, j_n, s_n) = (model.action_dim(), model.n_agents(), model.n_states());
    let mut out = ActionTable::filled(d_n, j_n, s_n, 0.0);
    for (s, row) in evals.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            for (d, g) in e.gradient(beta).into_iter().enumerate() {
                out.set(d, j, s, g);
            }
        }
    }
    out
}

/// Bellman values and action gradients from a single pass over the grid.
pub fn bellman_and_gradient<M: DynamicModel>(
    model: &M,
    cont: &M::Cont,
    actions: &ActionTable,
) -> (ValueTable, ActionTable) {
    let beta = model.beta();
    let evals = q_evals(model, cont, actions);
    let values = ValueTable::from_fn(model.n_agents(), model.n_states(), |j, s| evals[s][j].value(beta));
    (values, gradient_table(model, &evals, beta))
}

/// One coordinate of the box-constrained map `Φ̂`.
///
/// Returns `l` when `x = l` and `f ≤ 0`, `u` when `x = u` and `f ≥ 0`, and
/// otherwise `Φ` projected onto `[l, u]`.
pub fn boxed_map(phi: f64, f: f64, x: f64, l: f64, u: f64) -> Result<f64> {
    if !(l < u) {
        return Err(Error::InvalidConfig(format!("degenerate box [{l}, {u}]")));
    }
    if x < l || x > u {
        return Err(Error::OutOfBox {
            index: 0,
            value: x,
            lower: l,
            upper: u,
        });
    }
    if x == l && f <= 0.0 {
        return Ok(l);
    }
    if x == u && f >= 0.0 {
        return Ok(u);
    }
    Ok(phi.clamp(l, u))
}

/// Block layout `(V, a¹, …, a^D)` for a model.
pub fn layout_for<M: DynamicModel>(model: &M) -> Arc<BlockLayout> {
    let n = model.n_agents() * model.n_states();
    let mut blocks = vec![BlockInfo {
        label: "V".into(),
        kind: BlockKind::Value,
        len: n,
    }];
    for d in 0..model.action_dim() {
        blocks.push(BlockInfo {
            label: format!("a{}", d + 1),
            kind: BlockKind::Action { dim: d },
            len: n,
        });
    }
    Arc::new(BlockLayout::new(blocks))
}

/// Stacks `(V, a)` into one iterate: the V block over agents and grid, then
/// one block per action dimension.
pub fn assemble_blocks(layout: &Arc<BlockLayout>, values: &ValueTable, actions: &ActionTable) -> Result<BlockVector> {
    let mut blocks: Vec<&[f64]> = vec![values.as_slice()];
    for d in 0..actions.dim() {
        blocks.push(actions.dimension(d));
    }
    BlockVector::from_blocks(Arc::clone(layout), &blocks)
}

/// Inverse of [`assemble_blocks`].
pub fn disassemble(x: &BlockVector, n_agents: usize, n_states: usize) -> Result<(ValueTable, ActionTable)> {
    let n_blocks = x.layout().n_blocks();
    if n_blocks == 0 {
        return Err(Error::LayoutMismatch("iterate has no blocks".into()));
    }
    let values = ValueTable::new(n_agents, n_states, x.block(0).to_vec())?;
    let dim = n_blocks - 1;
    let mut data = Vec::with_capacity(dim * n_agents * n_states);
    for b in 1..n_blocks {
        data.extend_from_slice(x.block(b));
    }
    let actions = ActionTable::new(dim, n_agents, n_states, data)?;
    Ok((values, actions))
}

/// Projects every action onto its box.
pub fn clamp_actions<M: DynamicModel>(model: &M, actions: &mut ActionTable) {
    for d in 0..actions.dim() {
        for j in 0..actions.n_agents() {
            for s in 0..actions.n_states() {
                let (l, u) = model.bounds(j, d, s);
                let v = actions.get(d, j, s);
                if v < l || v > u {
                    actions.set(d, j, s, v.clamp(l, u));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Static problem with reward `−(a − s)²/2` at state `s ∈ {0, 1, 2}`.
    struct Quadratic;

    impl DynamicModel for Quadratic {
        type Cont = ();
        fn name(&self) -> &str {
            "quadratic"
        }
        fn n_agents(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn n_states(&self) -> usize {
            3
        }
        fn beta(&self) -> f64 {
            0.5
        }
        fn prepare(&self, _values: &ValueTable) -> Result<()> {
            Ok(())
        }
        fn reward(&self, state: usize, _agent: usize, actions: &[f64]) -> f64 {
            -0.5 * (actions[0] - state as f64).powi(2)
        }
        fn reward_grad(&self, state: usize, _agent: usize, actions: &[f64]) -> Vec<f64> {
            vec![state as f64 - actions[0]]
        }
        fn continuation(&self, _cont: &(), _state: usize, _agent: usize, _actions: &[f64]) -> f64 {
            0.0
        }
        fn continuation_grad(&self, _cont: &(), _state: usize, _agent: usize, _actions: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
    }

    #[test]
    fn boxed_map_examples() {
        assert_eq!(boxed_map(-0.5, -2.0, 0.0, 0.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(boxed_map(0.7, 0.2, 0.5, 0.0, 1.0).unwrap(), 0.7);
        assert_eq!(boxed_map(1.4, 0.9, 0.5, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(boxed_map(1.2, 0.5, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(matches!(boxed_map(0.0, 0.0, 2.0, 0.0, 1.0), Err(Error::OutOfBox { .. })));
        assert!(boxed_map(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn myopic_bellman_and_static_gradient() {
        let m = Quadratic;
        let a = ActionTable::new(1, 1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        let v = bellman_rhs(&m, &(), &a);
        assert_eq!(v.as_slice(), &[-0.5, 0.0, -0.5]);
        let g = q_gradient(&m, &(), &a);
        assert_eq!(g.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn block_round_trip_and_sizes() {
        let m = Quadratic;
        let layout = layout_for(&m);
        assert_eq!(layout.n_blocks(), 2);
        assert_eq!(layout.range(1).len(), 3);
        let v = ValueTable::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let a = ActionTable::new(1, 1, 3, vec![4.0, 5.0, 6.0]).unwrap();
        let x = assemble_blocks(&layout, &v, &a).unwrap();
        let (v2, a2) = disassemble(&x, 1, 3).unwrap();
        assert_eq!(v, v2);
        assert_eq!(a, a2);
    }

    #[test]
    fn multi_agent_profile_layout() {
        let mut a = ActionTable::filled(2, 3, 4, 0.0);
        a.set(1, 2, 3, 7.0);
        a.set(0, 1, 3, 5.0);
        let p = a.profile(3);
        assert_eq!(p, vec![0.0, 0.0, 5.0, 0.0, 0.0, 7.0]);
        assert_eq!(a.dimension(1).len(), 12);
    }
}
