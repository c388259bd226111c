//! Fixed-point iteration engine.
//!
//! The iterate is a [`BlockVector`]: a flat vector partitioned into blocks by
//! variable type (the value-function block and one block per action
//! dimension). Two update rules are supported:
//!
//! * simple: `x ← Φ(x)`;
//! * spectral: `x ← x + α_z (Φ(x) − x)` per block `z`, where
//!   `α_z = ‖s_z‖₂ / ‖y_z‖₂`, `s_z = z⁽ⁿ⁾ − z⁽ⁿ⁻¹⁾` and
//!   `y_z = F_z(x⁽ⁿ⁾) − F_z(x⁽ⁿ⁻¹⁾)` with `F = Φ − id`.
//!
//! The step size may be computed separately per block or shared across all
//! blocks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative-change denominators below this magnitude fall back to an
/// absolute difference.
pub const UNIT_FREE_FLOOR: f64 = 1e-12;

/// What a block of the iterate holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Value functions, stacked over agents and grid points.
    Value,
    /// One action dimension, stacked over agents and grid points.
    Action { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    pub label: String,
    pub kind: BlockKind,
    pub len: usize,
}

/// Immutable description of how a [`BlockVector`] is partitioned.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    blocks: Vec<BlockInfo>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<BlockInfo>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for b in &blocks {
            acc += b.len;
            offsets.push(acc);
        }
        Self { blocks, offsets }
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }
}

/// The stacked iterate `x = (V, a¹, …, a^D)`.
#[derive(Debug, Clone)]
pub struct BlockVector {
    layout: Arc<BlockLayout>,
    data: Vec<f64>,
}

impl PartialEq for BlockVector {
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other) && self.data == other.data
    }
}

impl BlockVector {
    pub fn new(layout: Arc<BlockLayout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.total_len() {
            return Err(Error::LayoutMismatch(format!(
                "layout expects {} values, got {}",
                layout.total_len(),
                data.len()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let n = layout.total_len();
        Self {
            layout,
            data: vec![0.0; n],
        }
    }

    /// Builds a vector from per-block slices, in layout order.
    pub fn from_blocks(layout: Arc<BlockLayout>, blocks: &[&[f64]]) -> Result<Self> {
        if blocks.len() != layout.n_blocks() {
            return Err(Error::LayoutMismatch(format!(
                "layout has {} blocks, got {}",
                layout.n_blocks(),
                blocks.len()
            )));
        }
        let mut data = Vec::with_capacity(layout.total_len());
        for (info, b) in layout.blocks().iter().zip(blocks) {
            if info.len != b.len() {
                return Err(Error::LayoutMismatch(format!(
                    "block `{}` expects {} values, got {}",
                    info.label,
                    info.len,
                    b.len()
                )));
            }
            data.extend_from_slice(b);
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.layout.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.range(i);
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(
                "operands carry different block layouts".into(),
            ))
        }
    }

    /// Blockwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_layout(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            layout: Arc::clone(&self.layout),
            data,
        })
    }

    /// Blockwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_layout(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            layout: Arc::clone(&self.layout),
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            layout: Arc::clone(&self.layout),
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Euclidean norm of each block.
    pub fn block_l2_norms(&self) -> Vec<f64> {
        (0..self.layout.n_blocks())
            .map(|i| l2(self.block(i)))
            .collect()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Simple,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScope {
    PerBlock,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `max_i |new_i / old_i − 1|`, absolute where `|old_i| < 1e-12`.
    UnitFreeSup,
    /// `max_i |new_i − old_i|`.
    AbsoluteSup,
}

/// Tolerances per variable type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub value: f64,
    pub action: f64,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            value: tol,
            action: tol,
        }
    }

    pub fn for_kind(&self, kind: BlockKind) -> f64 {
        match kind {
            BlockKind::Value => self.value,
            BlockKind::Action { .. } => self.action,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Policy-gradient learning rate.
    pub lambda: f64,
    /// Step size used for the first spectral update.
    pub alpha0: f64,
    pub mode: UpdateMode,
    pub step_scope: StepScope,
    pub tol: Tolerances,
    pub norm: NormKind,
    pub max_iter: usize,
    pub divergence_threshold: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-7,
            alpha0: 1.0,
            mode: UpdateMode::Spectral,
            step_scope: StepScope::PerBlock,
            tol: Tolerances::uniform(1e-6),
            norm: NormKind::UnitFreeSup,
            max_iter: 100_000,
            divergence_threshold: 1e12,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("alpha0", self.alpha0)?;
        positive("tol.value", self.tol.value)?;
        positive("tol.action", self.tol.action)?;
        positive("divergence_threshold", self.divergence_threshold)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn simple(mut self) -> Self {
        self.mode = UpdateMode::Simple;
        self
    }

    pub fn spectral(mut self) -> Self {
        self.mode = UpdateMode::Spectral;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Diverged,
    MaxIter,
}

/// Diagnostics recorded for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Configured norm of `x⁽ⁿ⁺¹⁾ − x⁽ⁿ⁾`, per block.
    pub residuals: Vec<f64>,
    /// Step size applied to each block (1 in simple mode).
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// Number of evaluations of the fixed-point map.
    pub n_iter: usize,
    pub status: Status,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn final_residuals(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.residuals.as_slice())
    }
}

/// Spectral step size `‖s‖₂ / ‖y‖₂`.
///
/// Returns `None` when `‖s‖₂ = 0` or `‖y‖₂ = 0` (a stalled block); callers
/// keep the previous step size for that block. A zero step would otherwise
/// freeze a block that sat still for one iteration, e.g. actions resting on
/// a bound.
pub fn spectral_step_size(s_block: &[f64], y_block: &[f64]) -> Option<f64> {
    debug_assert_eq!(s_block.len(), y_block.len());
    let (ns, ny) = (l2(s_block), l2(y_block));
    if ns == 0.0 || ny == 0.0 || !ny.is_finite() {
        return None;
    }
    Some(ns / ny)
}

/// Shared step size across blocks: `√(Σ‖s_z‖²) / √(Σ‖y_z‖²)`.
pub fn shared_step_size(s_norms: &[f64], y_norms: &[f64]) -> Option<f64> {
    let ns = s_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ns == 0.0 || ny == 0.0 || !ny.is_finite() {
        return None;
    }
    Some(ns / ny)
}

/// Change between two slices under `norm`.
pub fn change_norm(new: &[f64], old: &[f64], norm: NormKind) -> f64 {
    new.iter().zip(old).fold(0.0_f64, |m, (&n, &o)| {
        let d = match norm {
            NormKind::AbsoluteSup => (n - o).abs(),
            NormKind::UnitFreeSup => {
                if o.abs() < UNIT_FREE_FLOOR {
                    (n - o).abs()
                } else {
                    (n / o - 1.0).abs()
                }
            }
        };
        // NaN propagates as non-convergence
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    })
}

/// Per-block change norms between `x_new` and `x_old`.
pub fn block_changes(x_new: &BlockVector, x_old: &BlockVector, norm: NormKind) -> Result<Vec<f64>> {
    x_new.check_layout(x_old)?;
    Ok((0..x_new.layout.n_blocks())
        .map(|i| change_norm(x_new.block(i), x_old.block(i), norm))
        .collect())
}

/// True iff every block's change is within its tolerance.
pub fn converged(x_new: &BlockVector, x_old: &BlockVector, cfg: &SpectralConfig) -> Result<bool> {
    let changes = block_changes(x_new, x_old, cfg.norm)?;
    Ok(changes
        .iter()
        .zip(x_new.layout.blocks())
        .all(|(c, info)| *c <= cfg.tol.for_kind(info.kind)))
}

/// Runs the fixed-point iteration of `map` from `x0`.
///
/// The run stops once successive iterates are within tolerance; the returned
/// vector is the last iterate `x⁽ⁿ⁺¹⁾`, so `converged(returned, x⁽ⁿ⁾)`
/// holds. Non-finite values or a
/// sup-norm beyond the divergence threshold end the run with
/// [`Status::Diverged`]; errors raised by `map` abort it.
pub fn iterate<F>(map: F, x0: BlockVector, cfg: &SpectralConfig) -> Result<(BlockVector, IterationTrace)>
where
    F: FnMut(&BlockVector) -> Result<BlockVector>,
{
    iterate_projected(map, |_| {}, x0, cfg)
}

/// [`iterate`] with a projection applied to every new iterate, used to keep
/// box-constrained blocks inside their bounds after an extrapolated step.
pub fn iterate_projected<F, P>(
    mut map: F,
    mut project: P,
    x0: BlockVector,
    cfg: &SpectralConfig,
) -> Result<(BlockVector, IterationTrace)>
where
    F: FnMut(&BlockVector) -> Result<BlockVector>,
    P: FnMut(&mut BlockVector),
{
    cfg.validate()?;
    let layout = Arc::clone(x0.layout());
    let n_blocks = layout.n_blocks();
    let tols: Vec<f64> = layout.blocks().iter().map(|b| cfg.tol.for_kind(b.kind)).collect();

    let mut x = x0;
    let mut prev: Option<(BlockVector, BlockVector)> = None;
    let mut alphas = vec![cfg.alpha0; n_blocks];
    let mut records = Vec::new();

    let finish = |n_iter, status, records| IterationTrace {
        n_iter,
        status,
        records,
    };

    for n in 0..cfg.max_iter {
        let phi = map(&x)?;
        if !phi.same_layout(&x) {
            return Err(Error::LayoutMismatch("map changed the block layout".into()));
        }
        let n_iter = n + 1;
        let blown_up = |v: &BlockVector| !v.is_finite() || v.sup_norm() > cfg.divergence_threshold;
        if blown_up(&phi) {
            records.push(IterationRecord {
                residuals: vec![f64::NAN; n_blocks],
                alphas: vec![f64::NAN; n_blocks],
            });
            return Ok((x, finish(n_iter, Status::Diverged, records)));
        }

        let mut next = match cfg.mode {
            UpdateMode::Simple => phi,
            UpdateMode::Spectral => {
                let f = phi.sub(&x)?;
                if let Some((x_prev, f_prev)) = &prev {
                    let s = x.sub(x_prev)?;
                    let y = f.sub(f_prev)?;
                    match cfg.step_scope {
                        StepScope::PerBlock => {
                            for (b, alpha) in alphas.iter_mut().enumerate() {
                                if let Some(a) = spectral_step_size(s.block(b), y.block(b)) {
                                    *alpha = a;
                                }
                            }
                        }
                        StepScope::Shared => {
                            let sn = s.block_l2_norms();
                            let yn = y.block_l2_norms();
                            if let Some(a) = shared_step_size(&sn, &yn) {
                                alphas.iter_mut().for_each(|v| *v = a);
                            }
                        }
                    }
                }
                let mut next = x.clone();
                for (b, alpha) in alphas.iter().enumerate() {
                    let fb = f.block(b);
                    for (xi, fi) in next.block_mut(b).iter_mut().zip(fb) {
                        *xi += alpha * fi;
                    }
                }
                prev = Some((x.clone(), f));
                next
            }
        };
        project(&mut next);

        let step_alphas = match cfg.mode {
            UpdateMode::Simple => vec![1.0; n_blocks],
            UpdateMode::Spectral => alphas.clone(),
        };
        if blown_up(&next) {
            records.push(IterationRecord {
                residuals: vec![f64::NAN; n_blocks],
                alphas: step_alphas,
            });
            return Ok((next, finish(n_iter, Status::Diverged, records)));
        }
        let residuals = block_changes(&next, &x, cfg.norm)?;
        let done = residuals.iter().zip(&tols).all(|(r, t)| r <= t);
        records.push(IterationRecord {
            residuals,
            alphas: step_alphas,
        });
        if done {
            return Ok((next, finish(n_iter, Status::Converged, records)));
        }
        x = next;
    }
    Ok((x, finish(cfg.max_iter, Status::MaxIter, records)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(lens: &[usize]) -> Arc<BlockLayout> {
        Arc::new(BlockLayout::new(
            lens.iter()
                .enumerate()
                .map(|(i, &len)| BlockInfo {
                    label: format!("b{i}"),
                    kind: if i == 0 {
                        BlockKind::Value
                    } else {
                        BlockKind::Action { dim: i - 1 }
                    },
                    len,
                })
                .collect(),
        ))
    }

    fn vec_of(lens: &[usize], data: Vec<f64>) -> BlockVector {
        BlockVector::new(layout(lens), data).unwrap()
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(spectral_step_size(&[1.0, 0.0], &[2.0, 0.0]), Some(0.5));
        let v = [0.3, -0.4];
        assert!((spectral_step_size(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_step_size(&[3.0, 4.0], &[5.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spectral_step_size(&[1.0], &[0.0]), None);
        assert_eq!(spectral_step_size(&[0.0], &[2.0]), None);
    }

    #[test]
    fn convergence_examples() {
        let cfg = SpectralConfig {
            tol: Tolerances::uniform(1e-6),
            ..Default::default()
        };
        let old = vec_of(&[2], vec![1.0, 1.0]);
        assert!(converged(&old, &old, &cfg).unwrap());
        let far = vec_of(&[2], vec![1.0 + 2e-6, 1.0]);
        assert!(!converged(&far, &old, &cfg).unwrap());
        let near = vec_of(&[2], vec![1.0 + 5e-7, 1.0]);
        assert!(converged(&near, &old, &cfg).unwrap());
    }

    #[test]
    fn unit_free_falls_back_to_absolute_near_zero() {
        assert_eq!(change_norm(&[3e-7], &[0.0], NormKind::UnitFreeSup), 3e-7);
        assert_eq!(change_norm(&[2.2], &[2.0], NormKind::AbsoluteSup), 2.2 - 2.0);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let a = vec_of(&[2], vec![1.0, 1.0]);
        let b = vec_of(&[1, 1], vec![1.0, 1.0]);
        assert!(converged(&a, &b, &SpectralConfig::default()).is_err());
    }

    #[test]
    fn constant_map_converges_in_two_simple_steps() {
        let c = vec_of(&[3], vec![1.5, -2.0, 4.0]);
        let cfg = SpectralConfig::default().simple();
        let target = c.clone();
        let (x, trace) = iterate(|_| Ok(target.clone()), vec_of(&[3], vec![9.0, 9.0, 9.0]), &cfg).unwrap();
        assert!(trace.converged());
        assert!(trace.n_iter <= 2);
        assert_eq!(x, c);
    }

    #[test]
    fn halving_map_reaches_zero_with_alpha_two() {
        let cfg = SpectralConfig {
            alpha0: 1.0,
            ..Default::default()
        };
        let (x, trace) = iterate(
            |x| Ok(x.scale(0.5)),
            vec_of(&[2], vec![1.0, 1.0]),
            &cfg,
        )
        .unwrap();
        assert!(trace.converged());
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
        // n = 0 uses α₀, n = 1 uses ‖s‖/‖y‖ = 2, then Φ(0) = 0 is detected.
        assert_eq!(trace.records[0].alphas, vec![1.0]);
        assert_eq!(trace.records[1].alphas, vec![2.0]);
        assert_eq!(trace.n_iter, 3);
    }

    #[test]
    fn drifting_map_diverges() {
        let cfg = SpectralConfig {
            mode: UpdateMode::Simple,
            divergence_threshold: 1e6,
            max_iter: 10_000_000,
            ..Default::default()
        };
        let (_, trace) = iterate(
            |x| {
                let mut y = x.clone();
                y.as_mut_slice().iter_mut().for_each(|v| *v += 1.0);
                Ok(y)
            },
            vec_of(&[1], vec![0.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(trace.status, Status::Diverged);
        assert!(trace.n_iter < 10_000_000);
    }

    #[test]
    fn nan_in_map_is_divergence_not_error() {
        let cfg = SpectralConfig::default();
        let (_, trace) = iterate(
            |x| Ok(x.scale(f64::NAN)),
            vec_of(&[1], vec![1.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(trace.status, Status::Diverged);
        assert_eq!(trace.n_iter, 1);
    }

    #[test]
    fn max_iter_status() {
        let cfg = SpectralConfig {
            mode: UpdateMode::Simple,
            max_iter: 5,
            ..Default::default()
        };
        let (_, trace) = iterate(|x| Ok(x.scale(0.999)), vec_of(&[1], vec![1.0]), &cfg).unwrap();
        assert_eq!(trace.status, Status::MaxIter);
        assert_eq!(trace.n_iter, 5);
    }

    #[test]
    fn per_block_step_sizes_are_independent() {
        // Block 0 contracts by 0.5, block 1 by 0.9: per-block α's are 2 and 10.
        let cfg = SpectralConfig::default();
        let (_, trace) = iterate(
            |x| {
                let mut y = x.clone();
                y.block_mut(0).iter_mut().for_each(|v| *v *= 0.5);
                y.block_mut(1).iter_mut().for_each(|v| *v *= 0.9);
                Ok(y)
            },
            vec_of(&[1, 1], vec![1.0, 1.0]),
            &cfg,
        )
        .unwrap();
        assert!(trace.converged());
        let a = &trace.records[1].alphas;
        assert!((a[0] - 2.0).abs() < 1e-12);
        assert!((a[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SpectralConfig {
            alpha0: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SpectralConfig {
            max_iter: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
