//! Property checks shared by the proptest suites and the acceptance run.
//! Each returns `Err` with a description of the first violation.
#![allow(dead_code)]

use vfpgi::algorithms::best_responses;
use vfpgi::approx::gauss_hermite;
use vfpgi::fixed_point::{shared_step_size, spectral_step_size};
use vfpgi::model_api::{boxed_map, ActionTable, DynamicModel, InnerSolver, ValueTable};
use vfpgi::models::growth::GrowthModel;
use vfpgi::models::invest_game::{cournot_with_costs, GameGridConfig, InvestGame, InvestGameParams};
use vfpgi::models::pakes_mcguire::{pm_analytic_investment, pm_price_equilibrium, PakesMcGuire, PmParams};

pub type Check = Result<(), String>;

/// On the grid `{0, 0.001, …, 1}` with `f(x) = c − x`, a point is a fixed
/// point of the boxed map exactly when it satisfies the box KKT conditions.
pub fn boxed_fixed_points_match_kkt(c: f64, lambda: f64) -> Check {
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let f = c - x;
        let fixed = boxed_map(x + lambda * f, f, x, 0.0, 1.0).map_err(|e| e.to_string())? == x;
        let kkt = (x == 0.0 && f <= 0.0) || (x > 0.0 && x < 1.0 && f == 0.0) || (x == 1.0 && f >= 0.0);
        if fixed != kkt {
            return Err(format!("c={c}, lambda={lambda}, x={x}: fixed={fixed}, kkt={kkt}"));
        }
    }
    Ok(())
}

/// Largest relative gap between `∂Q/∂a` and a central difference over the
/// given states, agents and action dimensions.
pub fn q_gradient_fd_gap<M: DynamicModel>(
    model: &M,
    values: &ValueTable,
    actions: &ActionTable,
    states: &[usize],
) -> Result<f64, String> {
    let cont = model.prepare(values).map_err(|e| e.to_string())?;
    let beta = model.beta();
    let d = model.action_dim();
    let mut worst = 0.0f64;
    for &s in states {
        let profile = actions.profile(s);
        for j in 0..model.n_agents() {
            let grad = model.q_eval(&cont, s, j, &profile).gradient(beta);
            for dim in 0..d {
                let idx = j * d + dim;
                let h = 1e-5 * profile[idx].abs().max(1e-2);
                let q_at = |a: f64| {
                    let mut p = profile.clone();
                    p[idx] = a;
                    model.q_eval(&cont, s, j, &p).value(beta)
                };
                let fd = (q_at(profile[idx] + h) - q_at(profile[idx] - h)) / (2.0 * h);
                let gap = (fd - grad[dim]).abs() / grad[dim].abs().max(1.0);
                if !gap.is_finite() {
                    return Err(format!("non-finite gradient at state {s}, agent {j}, dim {dim}"));
                }
                worst = worst.max(gap);
            }
        }
    }
    Ok(worst)
}

/// Gradient check on a growth model around its initial policy, shifted by
/// `shift` (relative).
pub fn growth_gradient_gap(model: &GrowthModel, shift: f64, states: &[usize]) -> Result<f64, String> {
    let (v, mut a) = model.initial_guess();
    for s in 0..model.n_states() {
        for dim in 0..a.dim() {
            let x = a.get(dim, 0, s);
            a.set(dim, 0, s, x * (1.0 + shift));
        }
    }
    q_gradient_fd_gap(model, &v, &a, states)
}

/// Gradient check on the investment game at investment `i_share · δ k*`;
/// state indices wrap around the grid.
pub fn invest_game_gradient_gap(n_firms: usize, i_share: f64, states: &[usize]) -> Result<f64, String> {
    let m = InvestGame::new(InvestGameParams::benchmark(n_firms), &GameGridConfig::default()).map_err(|e| e.to_string())?;
    let (v, _) = m.initial_guess();
    let i = i_share * m.params().delta * m.steady_state_capital();
    let a = ActionTable::filled(1, n_firms, m.n_states(), i);
    let states: Vec<usize> = states.iter().map(|s| s % m.n_states()).collect();
    q_gradient_fd_gap(&m, &v, &a, &states)
}

/// Gradient check on the quality ladder game with values `V(w) = scale·Σw`
/// and investment `i`.
pub fn pm_gradient_gap(n_firms: usize, theta2: f64, scale: f64, i: f64) -> Result<f64, String> {
    let m = PakesMcGuire::new(PmParams::benchmark(n_firms, theta2)).map_err(|e| e.to_string())?;
    let n = m.n_states();
    let v = ValueTable::from_fn(n_firms, n, |j, s| scale * (m.states()[s][j] as f64 + 0.1 * s as f64));
    let a = ActionTable::filled(1, n_firms, n, i);
    let states: Vec<usize> = (0..n).step_by(7).collect();
    q_gradient_fd_gap(&m, &v, &a, &states)
}

/// `∫ x^p e^{-x²} dx` is reproduced exactly for every `p ≤ 2n − 1`.
pub fn quadrature_moments_exact(order: usize) -> Check {
    let rule = gauss_hermite(order).map_err(|e| e.to_string())?;
    // Γ((p + 1)/2): the even moments, and a scale for the odd ones.
    let gamma_half = |p: usize| {
        let (mut g, mut x) = if p % 2 == 0 { (std::f64::consts::PI.sqrt(), 0.5) } else { (1.0, 1.0) };
        while x < (p as f64 + 1.0) / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    };
    for p in 0..2 * order {
        let exact = if p % 2 == 1 { 0.0 } else { gamma_half(p) };
        let got = rule.integrate(|x| x.powi(p as i32));
        if (got - exact).abs() > 1e-10 * gamma_half(p).max(1.0) {
            return Err(format!("order {order}, power {p}: got {got}, exact {exact}"));
        }
    }
    Ok(())
}

/// Cournot outcome: each active firm's first-order condition
/// `P(1 − q_j/(ηQ)) = mc_j` holds to `1e-8` and no grid deviation in
/// `q_j` pays more than the equilibrium quantity.
pub fn cournot_checks(eta: f64, mc: &[f64], xi: f64) -> Check {
    let eq = cournot_with_costs(eta, mc, xi).map_err(|e| e.to_string())?;
    let total: f64 = eq.quantities.iter().sum();
    let inverse = |q: f64| (q * (-xi).exp()).powf(-1.0 / eta);
    if (inverse(total) / eq.price - 1.0).abs() > 1e-10 {
        return Err(format!("price {} off the demand curve", eq.price));
    }
    for (j, &q) in eq.quantities.iter().enumerate() {
        if q == 0.0 {
            // Inactive firms cannot profit from entering at the margin.
            if mc[j] < eq.price * (1.0 - 1e-10) {
                return Err(format!("inactive firm {j} has cost {} below price {}", mc[j], eq.price));
            }
            continue;
        }
        let foc = (eq.price * (1.0 - q / (eta * total)) - mc[j]) / mc[j];
        if foc.abs() > 1e-8 {
            return Err(format!("firm {j}: FOC residual {foc:e}"));
        }
        let others = total - q;
        let profit = |qj: f64| (inverse(others + qj) - mc[j]) * qj;
        let best = (0..=4000)
            .map(|k| q * (0.8 + 0.4 * k as f64 / 4000.0))
            .max_by(|a, b| profit(*a).total_cmp(&profit(*b)))
            .unwrap();
        if (best / q - 1.0).abs() > 2e-4 {
            return Err(format!("firm {j}: grid best response {best} vs equilibrium {q}"));
        }
    }
    Ok(())
}

/// Logit Bertrand outcome: `p_j − mc − 1/(1 − s_j) = 0` to `1e-8` and no
/// grid deviation in `p_j` beats the equilibrium price.
pub fn logit_checks(params: &PmParams, w: &[usize]) -> Check {
    let eq = pm_price_equilibrium(params, w).map_err(|e| e.to_string())?;
    let quality: Vec<f64> = w.iter().map(|&x| params.quality(x as f64)).collect();
    for j in 0..w.len() {
        let foc = eq.prices[j] - params.mc - 1.0 / (1.0 - eq.shares[j]);
        if foc.abs() > 1e-8 {
            return Err(format!("state {w:?}, firm {j}: FOC residual {foc:e}"));
        }
        let rivals: f64 = (0..w.len()).filter(|&k| k != j).map(|k| (quality[k] - eq.prices[k]).exp()).sum();
        let profit = |p: f64| {
            let e = (quality[j] - p).exp();
            (p - params.mc) * e / (1.0 + rivals + e)
        };
        let p0 = eq.prices[j];
        let best = (0..=4000)
            .map(|k| p0 - 0.5 + k as f64 / 4000.0)
            .max_by(|a, b| profit(*a).total_cmp(&profit(*b)))
            .unwrap();
        if (best - p0).abs() > 2e-4 {
            return Err(format!("state {w:?}, firm {j}: grid best price {best} vs {p0}"));
        }
    }
    Ok(())
}

/// Closed-form investment against a brute-force search over `[0, 10]` in
/// steps of `1e-5`.
pub fn pm_analytic_vs_grid(params: &PmParams, v1: f64, v2: f64) -> Check {
    let analytic = pm_analytic_investment(params, v1, v2);
    let objective = |i: f64| {
        let p = params.gamma_inv * i / (1.0 + params.gamma_inv * i);
        -i + params.beta * (p * v1 + (1.0 - p) * v2)
    };
    let mut best = (0.0, objective(0.0));
    for k in 1..=1_000_000 {
        let i = k as f64 * 1e-5;
        let q = objective(i);
        if q > best.1 {
            best = (i, q);
        }
    }
    if (best.0 - analytic).abs() > 1e-4 {
        return Err(format!("v1={v1}, v2={v2}: analytic {analytic}, grid {}", best.0));
    }
    Ok(())
}

/// The best response used by VFI* on the quality ladder agrees with the
/// closed form when `θ₂ = 0`.
pub fn pm_inner_solvers_agree(n_firms: usize, scale: f64) -> Result<f64, String> {
    let m = PakesMcGuire::new(PmParams::benchmark(n_firms, 0.0)).map_err(|e| e.to_string())?;
    let n = m.n_states();
    let v = ValueTable::from_fn(n_firms, n, |j, s| scale * m.states()[s][j] as f64);
    let a = ActionTable::filled(1, n_firms, n, 0.3);
    let closed = best_responses(&m, &v, &a, InnerSolver::Analytic).map_err(|e| e.to_string())?;
    let newton = best_responses(&m, &v, &a, InnerSolver::Newton).map_err(|e| e.to_string())?;
    Ok(closed.sup_gap(&newton))
}

/// Step sizes are invariant to a common rescaling of `s` and `y`, scale
/// with `s` alone, and the shared step aggregates block norms.
pub fn alpha_identities(s: &[f64], y: &[f64], c: f64) -> Check {
    let base = spectral_step_size(s, y);
    let cs: Vec<f64> = s.iter().map(|v| c * v).collect();
    let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
    match (base, spectral_step_size(&cs, &cy), spectral_step_size(&cs, y)) {
        (Some(a), Some(b), Some(d)) => {
            if (a / b - 1.0).abs() > 1e-12 {
                return Err(format!("not homogeneous of degree 0: {a} vs {b}"));
            }
            if (d / (c.abs() * a) - 1.0).abs() > 1e-12 {
                return Err(format!("scaling s by {c} gave {d}, expected {}", c.abs() * a));
            }
        }
        (None, None, None) => {}
        other => return Err(format!("inconsistent stalls: {other:?}")),
    }
    let half = s.len() / 2;
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s_norms = [l2(&s[..half]), l2(&s[half..])];
    let y_norms = [l2(&y[..half]), l2(&y[half..])];
    let shared = shared_step_size(&s_norms, &y_norms);
    match (shared, base) {
        (Some(a), Some(b)) if (a / b - 1.0).abs() > 1e-12 => Err(format!("shared {a} vs pooled {b}")),
        (Some(_), None) | (None, Some(_)) => Err("shared and pooled steps disagree on stalls".into()),
        _ => Ok(()),
    }
}
