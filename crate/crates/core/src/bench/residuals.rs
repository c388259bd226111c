//! Accuracy measures on converged solutions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::algorithms::AlgorithmName;
use crate::error::Result;
use crate::model_api::SolutionBundle;
use crate::models::growth::GrowthModel;
use crate::models::invest_game::InvestGame;
use crate::models::pakes_mcguire::PakesMcGuire;

/// Accuracy and cost of one solve. Accuracy is in `log10` units and is NaN
/// for runs that did not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub l1: f64,
    pub linf: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub cpu_sec: f64,
    pub sec_per_iter: f64,
    /// Simulated periods spent outside the approximation box.
    pub out_of_box: usize,
    /// Quality ladder only: `(L∞(V), L∞(i))`.
    pub sup_gaps: Option<(f64, f64)>,
}

impl ResidualReport {
    fn from_solution(sol: &SolutionBundle, l1: f64, linf: f64) -> Self {
        let n_iter = sol.trace.n_iter;
        Self {
            l1,
            linf,
            n_iter,
            converged: sol.converged(),
            cpu_sec: sol.cpu_sec,
            sec_per_iter: sol.cpu_sec / n_iter.max(1) as f64,
            out_of_box: 0,
            sup_gaps: None,
        }
    }

    /// Report for a solve that ran but did not converge or could not be scored.
    pub fn failed(sol: &SolutionBundle) -> Self {
        let mut r = Self::from_solution(sol, f64::NAN, f64::NAN);
        r.converged = false;
        r
    }

    /// Report for a solver that raised an error.
    pub fn error() -> Self {
        Self {
            l1: f64::NAN,
            linf: f64::NAN,
            n_iter: 0,
            converged: false,
            cpu_sec: 0.0,
            sec_per_iter: 0.0,
            out_of_box: 0,
            sup_gaps: None,
        }
    }
}

/// Pre-drawn standard-normal pairs from `seed`, shared by every solve in an
/// experiment. Growth uses the first component only.
pub fn draw_innovations(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (a, b)
        })
        .collect()
}

fn log_floor(x: f64) -> f64 {
    x.abs().max(1e-16).log10()
}

fn summarize(logs: &[f64]) -> (f64, f64) {
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, max)
}

/// Euler residuals along a simulated path that starts at the deterministic
/// steady state.
///
/// Value-based methods act through the policy that maximizes `Q` given the
/// fitted `V̄`; Euler-equation iteration acts through its fitted consumption
/// rule. The path is not clamped: periods outside the grid box are counted
/// in `out_of_box` and evaluated by extrapolating the polynomials.
pub fn euler_residuals_growth(
    model: &GrowthModel,
    algorithm: AlgorithmName,
    sol: &SolutionBundle,
    innovations: &[(f64, f64)],
) -> Result<ResidualReport> {
    if !sol.converged() {
        return Ok(ResidualReport::failed(sol));
    }
    let p = model.params();
    let policy: Box<dyn Fn(f64, f64) -> Result<(f64, f64)> + Sync> = if algorithm == AlgorithmName::Ee {
        let c_bar = model.fit_grid(sol.actions.dimension(0))?;
        Box::new(move |k, z| Ok((1.0, c_bar.eval(&[k, z]))))
    } else {
        let v = model.fit_grid(sol.values.agent(0))?;
        Box::new(move |k, z| model.policy_from_value(&v, k, z, None))
    };
    let domain = model.basis().domain().to_vec();
    let (mut k, _) = model.steady_state();
    let mut z = 1.0;
    let mut path = Vec::with_capacity(innovations.len());
    let mut out_of_box = 0;
    for &(eps, _) in innovations {
        path.push((k, z));
        if !(domain[0].0..=domain[0].1).contains(&k) || !(domain[1].0..=domain[1].1).contains(&z) {
            out_of_box += 1;
        }
        let (l, c) = policy(k, z)?;
        k = model.k_next(k, z, l, c);
        z = model.law().next(z, p.sigma * eps);
    }
    let logs = path
        .par_iter()
        .map(|&(k, z)| model.euler_residual(k, z, &*policy).map(log_floor))
        .collect::<Result<Vec<_>>>()?;
    let (l1, linf) = summarize(&logs);
    let mut r = ResidualReport::from_solution(sol, l1, linf);
    r.out_of_box = out_of_box;
    Ok(r)
}

/// Mean and max of `log10 max_j |∂Q_j/∂i_j|` along a simulated path from the
/// steady state.
pub fn foc_residuals_game(model: &InvestGame, sol: &SolutionBundle, innovations: &[(f64, f64)]) -> Result<ResidualReport> {
    if !sol.converged() {
        return Ok(ResidualReport::failed(sol));
    }
    let logs = model.foc_residual_path(&sol.values, &sol.actions, innovations)?;
    let (l1, linf) = summarize(&logs);
    Ok(ResidualReport::from_solution(sol, l1, linf))
}

/// Sup-norm gaps after one more Bellman and best-response step. The `l1`
/// column carries `L∞(V)` and `linf` the larger of the two gaps.
pub fn pm_sup_residuals(model: &PakesMcGuire, sol: &SolutionBundle) -> Result<ResidualReport> {
    if !sol.converged() {
        return Ok(ResidualReport::failed(sol));
    }
    let (v, i) = model.sup_residuals(&sol.values, &sol.actions)?;
    let mut r = ResidualReport::from_solution(sol, v, v.max(i));
    r.sup_gaps = Some((v, i));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible() {
        assert_eq!(draw_innovations(7, 50), draw_innovations(7, 50));
        assert_ne!(draw_innovations(7, 50), draw_innovations(8, 50));
        let d = draw_innovations(3, 20_000);
        let mean = d.iter().map(|x| x.0).sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| x.0 * x.0).sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }

    #[test]
    fn summary_orders_mean_below_max() {
        let (l1, linf) = summarize(&[-6.0, -4.0, -5.0]);
        assert_eq!((l1, linf), (-5.0, -4.0));
        assert_eq!(log_floor(0.0), -16.0);
    }
}
