//! Solvers that exploit the analytic structure of the growth models.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::label;
use crate::approx::{fit_least_squares, FittedFunction};
use crate::error::{Error, Result};
use crate::fixed_point::{
    iterate, iterate_projected, BlockInfo, BlockKind, BlockLayout, BlockVector, SpectralConfig,
};
use crate::model_api::{ActionTable, DynamicModel, SolutionBundle, ValueTable};
use crate::models::growth::{GrowthModel, Labor};
use crate::scalar::{expand_bracket, newton_bisect, RootOptions};

const L_MIN: f64 = 1e-6;
const L_MAX: f64 = 1.0 - 1e-6;

fn single_block(label: &str, kind: BlockKind, len: usize) -> Arc<BlockLayout> {
    Arc::new(BlockLayout::new(vec![BlockInfo {
        label: label.into(),
        kind,
        len,
    }]))
}

fn root_opts() -> RootOptions {
    RootOptions {
        xtol: 1e-14,
        ftol: 1e-13,
        max_iter: 300,
    }
}

fn fd(g: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (g(x + h) - g(x - h)) / (2.0 * h)
}

/// Policies `(l, c)` recovered from grid values by the first-order
/// conditions at every grid point.
pub(crate) fn policies_from_values(model: &GrowthModel, values: &ValueTable) -> Result<ActionTable> {
    let v = model.prepare(values)?;
    let l_ss = model.steady_state().1;
    let rows: Vec<Result<(f64, f64)>> = model
        .points()
        .par_iter()
        .map(|&[k, z]| model.policy_from_value(&v, k, z, Some(l_ss)))
        .collect();
    let n = model.n_states();
    let mut a = ActionTable::filled(model.action_dim(), 1, n, 0.0);
    for (s, r) in rows.into_iter().enumerate() {
        let (l, c) = r?;
        match model.labor() {
            Labor::Elastic => {
                a.set(0, 0, s, l);
                a.set(1, 0, s, c);
            }
            Labor::Inelastic => a.set(0, 0, s, c),
        }
    }
    Ok(a)
}

/// VF-PGI on `(V, l)` for the elastic growth model; consumption is
/// recovered from `l` by the closed form each evaluation, and `l` is kept in
/// `[1e-6, 1 − 1e-6]`.
pub fn solve_vf_pgi_star(
    model: &GrowthModel,
    cfg: &SpectralConfig,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    if !model.is_elastic() {
        return Err(Error::Unsupported {
            algorithm: "vf_pgi_star".into(),
            model: model.name().into(),
        });
    }
    let n = model.n_states();
    let (v0, a0) = init;
    let layout = Arc::new(BlockLayout::new(vec![
        BlockInfo {
            label: "V".into(),
            kind: BlockKind::Value,
            len: n,
        },
        BlockInfo {
            label: "l".into(),
            kind: BlockKind::Action { dim: 0 },
            len: n,
        },
    ]));
    let l0: Vec<f64> = (0..n).map(|s| a0.get(0, 0, s).clamp(L_MIN, L_MAX)).collect();
    let x0 = BlockVector::from_blocks(layout.clone(), &[v0.agent(0), &l0])?;
    let p = model.params().clone();
    let beta = p.beta;
    let lambda = cfg.lambda;

    let map = |x: &BlockVector| -> Result<BlockVector> {
        let values = ValueTable::new(1, n, x.block(0).to_vec())?;
        let cont = model.prepare(&values)?;
        let out: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|s| {
                let [k, z] = model.points()[s];
                let l = x.block(1)[s];
                let c = p.c_of_l(k, z, l);
                let q = model.q_eval(&cont, s, 0, &[l, c]);
                let g = q.gradient(beta);
                let dc_dl = -c * (p.alpha / l + p.mu / (1.0 - l)) / p.gamma;
                let total = g[0] + g[1] * dc_dl;
                (q.value(beta), (l + lambda * total).clamp(L_MIN, L_MAX))
            })
            .collect();
        let v: Vec<f64> = out.iter().map(|o| o.0).collect();
        let l: Vec<f64> = out.iter().map(|o| o.1).collect();
        BlockVector::from_blocks(layout.clone(), &[&v, &l])
    };
    let project = |x: &mut BlockVector| {
        for l in x.block_mut(1) {
            *l = l.clamp(L_MIN, L_MAX);
        }
    };
    let (x, trace) = iterate_projected(map, project, x0, cfg)?;
    let values = ValueTable::new(1, n, x.block(0).to_vec())?;
    let mut actions = ActionTable::filled(2, 1, n, 0.0);
    for s in 0..n {
        let [k, z] = model.points()[s];
        let l = x.block(1)[s];
        actions.set(0, 0, s, l);
        actions.set(1, 0, s, p.c_of_l(k, z, l));
    }
    Ok(SolutionBundle {
        algorithm: label(cfg, "VF-PGI*"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}

/// Runs a fixed-point iteration on the value block alone.
fn iterate_values(
    model: &GrowthModel,
    cfg: &SpectralConfig,
    v0: &ValueTable,
    step: impl Fn(&FittedFunction) -> Result<Vec<f64>>,
) -> Result<(ValueTable, crate::fixed_point::IterationTrace)> {
    let n = model.n_states();
    let layout = single_block("V", BlockKind::Value, n);
    let x0 = BlockVector::new(layout.clone(), v0.agent(0).to_vec())?;
    let map = |x: &BlockVector| -> Result<BlockVector> {
        if !x.is_finite() {
            return Ok(x.scale(f64::NAN));
        }
        let cont = model.prepare(&ValueTable::new(1, n, x.as_slice().to_vec())?)?;
        BlockVector::new(layout.clone(), step(&cont)?)
    };
    let (x, trace) = iterate(map, x0, cfg)?;
    Ok((ValueTable::new(1, n, x.into_vec())?, trace))
}

/// Envelope condition method: recover the policy from `V_k` at each grid
/// point, then apply the Bellman update.
pub fn solve_ecm_growth(
    model: &GrowthModel,
    cfg: &SpectralConfig,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let p = model.params().clone();
    let step = |v: &FittedFunction| -> Result<Vec<f64>> {
        model
            .points()
            .par_iter()
            .enumerate()
            .map(|(s, &[k, z])| {
                let vk = v.partial(&[k, z], 0);
                if !(vk > 0.0) {
                    return Ok(f64::NAN);
                }
                let (l, c) = match model.labor() {
                    Labor::Elastic => {
                        let l = ecm_labor(model, k, z, vk)?;
                        (l, p.c_of_l(k, z, l))
                    }
                    Labor::Inelastic => (1.0, (vk / p.gross_return(k, z, 1.0)).powf(-1.0 / p.gamma)),
                };
                let kn = model.k_next(k, z, l, c);
                let (w, _) = model.expected(v, s, kn);
                Ok(model.utility(c, l) + p.beta * w)
            })
            .collect()
    };
    let (values, trace) = iterate_values(model, cfg, &init.0, step)?;
    let actions = finish_actions(model, &values, init.1);
    Ok(SolutionBundle {
        algorithm: label(cfg, "ECM"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}

fn finish_actions(model: &GrowthModel, values: &ValueTable, fallback: ActionTable) -> ActionTable {
    if values.as_slice().iter().all(|v| v.is_finite()) {
        policies_from_values(model, values).unwrap_or(fallback)
    } else {
        fallback
    }
}

/// Labor solving the envelope condition
/// `V_k = B(1 − l)^{−μ}/(zA(1 − α)k^α l^{−α}) · [1 − δ + zAαk^{α−1}l^{1−α}]`.
fn ecm_labor(model: &GrowthModel, k: f64, z: f64, vk: f64) -> Result<f64> {
    let p = model.params();
    // Right-hand side is increasing in l from 0 to ∞.
    let g = |l: f64| {
        let rhs = p.b * (1.0 - l).powf(-p.mu) / p.mpl(k, z, l) * p.gross_return(k, z, l);
        (rhs / vk).ln()
    };
    newton_bisect(|l| (g(l), fd(&g, l, 1e-8 * l.min(1.0 - l))), 1e-12, 1.0 - 1e-12, None, root_opts())
}

/// Endogenous grid method. The grid's capital nodes play the role of
/// next-period capital; current capital is recovered from the first-order
/// conditions, and the updated values at those endogenous points are refit
/// and evaluated back on the fixed grid.
pub fn solve_egm_growth(
    model: &GrowthModel,
    cfg: &SpectralConfig,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    let p = model.params().clone();
    let step = |v: &FittedFunction| -> Result<Vec<f64>> {
        let endog: Vec<Result<Option<([f64; 2], f64)>>> = model
            .points()
            .par_iter()
            .enumerate()
            .map(|(s, &[kn, z])| {
                let (w, wk) = model.expected(v, s, kn);
                if !(wk > 0.0) {
                    return Ok(None);
                }
                let c = (p.beta * wk).powf(-1.0 / p.gamma);
                let (k, l) = match model.labor() {
                    Labor::Elastic => egm_elastic_point(model, kn, z, wk, c)?,
                    Labor::Inelastic => (egm_inelastic_capital(model, kn, z, c)?, 1.0),
                };
                Ok(Some(([k, z], model.utility(c, l) + p.beta * w)))
            })
            .collect();
        let mut grid = Vec::with_capacity(endog.len());
        let mut vals = Vec::with_capacity(endog.len());
        for e in endog {
            match e? {
                Some((pt, val)) if pt[0].is_finite() && val.is_finite() => {
                    grid.push(pt.to_vec());
                    vals.push(val);
                }
                _ => return Ok(vec![f64::NAN; model.n_states()]),
            }
        }
        let basis = model.basis().clone();
        let coef = match fit_least_squares(&basis.matrix(&grid)?, &vals) {
            Ok(c) => c,
            Err(Error::RankDeficient(_)) => return Ok(vec![f64::NAN; model.n_states()]),
            Err(e) => return Err(e),
        };
        let fitted = FittedFunction::new(basis, coef)?;
        Ok(model.points().iter().map(|pt| fitted.eval(pt)).collect())
    };
    let (values, trace) = iterate_values(model, cfg, &init.0, step)?;
    let actions = finish_actions(model, &values, init.1);
    Ok(SolutionBundle {
        algorithm: label(cfg, "EGM"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}

/// Current `(k, l)` consistent with next-period capital `k′`, given
/// `W_k(k′, z)` and `c = (βW_k)^{−1/γ}`.
///
/// Solves `k′ = (1 − δ)k(l) + B(1 − l)^{−μ}l/(βW_k(1 − α)) − c` with
/// `k(l) = (B(1 − l)^{−μ}/(βW_k z(1 − α)A))^{1/α} l`.
fn egm_elastic_point(model: &GrowthModel, kn: f64, z: f64, wk: f64, c: f64) -> Result<(f64, f64)> {
    let p = model.params();
    let bw = p.beta * wk;
    let k_of_l = |l: f64| (p.b * (1.0 - l).powf(-p.mu) / (bw * z * (1.0 - p.alpha) * p.a)).powf(1.0 / p.alpha) * l;
    let g = |l: f64| {
        let income = p.b * (1.0 - l).powf(-p.mu) * l / (bw * (1.0 - p.alpha));
        (1.0 - p.delta) * k_of_l(l) + income - c - kn
    };
    let l = newton_bisect(|l| (g(l), fd(&g, l, 1e-9 * l.min(1.0 - l))), 1e-12, 1.0 - 1e-9, None, root_opts())?;
    Ok((k_of_l(l), l))
}

/// Current capital `k` with `(1 − δ)k + zAk^α = k′ + c`.
fn egm_inelastic_capital(model: &GrowthModel, kn: f64, z: f64, c: f64) -> Result<f64> {
    let p = model.params();
    let target = kn + c;
    let g = |k: f64| (1.0 - p.delta) * k + p.output(k, z, 1.0) - target;
    let (lo, hi) = expand_bracket(g, kn.max(1e-8), 0.0, f64::INFINITY)?;
    newton_bisect(|k| (g(k), fd(&g, k, 1e-8 * k)), lo, hi, Some(kn), root_opts())
}

/// Euler-equation time iteration on consumption for the inelastic model:
/// `c ← (βE[u_c(c̄(k′, z′))(1 − δ + αAz′k′^{α−1})])^{−1/γ}`.
pub fn solve_ee_growth(
    model: &GrowthModel,
    cfg: &SpectralConfig,
    init: (ValueTable, ActionTable),
) -> Result<SolutionBundle> {
    let start = Instant::now();
    cfg.validate()?;
    if model.is_elastic() {
        return Err(Error::Unsupported {
            algorithm: "ee".into(),
            model: model.name().into(),
        });
    }
    let n = model.n_states();
    let p = model.params().clone();
    let layout = single_block("c", BlockKind::Action { dim: 0 }, n);
    let x0 = BlockVector::new(layout.clone(), init.1.dimension(0).to_vec())?;
    let map = |x: &BlockVector| -> Result<BlockVector> {
        if !x.is_finite() {
            return Ok(x.scale(f64::NAN));
        }
        let c_bar = model.fit_grid(x.as_slice())?;
        let next: Vec<f64> = model
            .points()
            .par_iter()
            .enumerate()
            .map(|(s, &[k, z])| {
                let kn = model.k_next(k, z, 1.0, x.as_slice()[s]);
                let e: f64 = model
                    .law()
                    .nodes(z, model.rule())
                    .into_iter()
                    .map(|(w, zn)| w * p.u_c(c_bar.eval(&[kn, zn])) * p.gross_return(kn, zn, 1.0))
                    .sum();
                (p.beta * e).powf(-1.0 / p.gamma)
            })
            .collect();
        BlockVector::new(layout.clone(), next)
    };
    let (x, trace) = iterate(map, x0, cfg)?;
    let actions = ActionTable::new(1, 1, n, x.as_slice().to_vec())?;
    let values = if x.is_finite() {
        model.evaluate_policy(&actions)?
    } else {
        ValueTable::filled(1, n, f64::NAN)
    };
    Ok(SolutionBundle {
        algorithm: label(cfg, "EE"),
        values,
        actions,
        trace,
        cpu_sec: start.elapsed().as_secs_f64(),
    })
}
