//! Function approximation and numerical integration.
//!
//! * Chebyshev tensor-product and complete ordinary polynomial bases over a
//!   box, affinely mapped to `[-1, 1]` per dimension.
//! * Least-squares coefficient fits through a QR factorization.
//! * Gauss–Hermite quadrature for the weight `e^{-x²}`.
//! * Conditional expectations under AR(1) shocks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Tensor product of Chebyshev polynomials, one degree per dimension.
    ChebyshevTensor { degrees: Vec<usize> },
    /// All monomials with total degree `≤ degree`.
    CompleteOrdinary { degree: usize },
}

/// A polynomial basis over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    kind: BasisKind,
    domain: Vec<(f64, f64)>,
    /// Exponent tuples of the complete ordinary basis, graded-lex order.
    exponents: Vec<Vec<usize>>,
}

impl PolyBasis {
    /// Chebyshev tensor basis with the same degree in every dimension.
    pub fn chebyshev(degree: usize, domain: Vec<(f64, f64)>) -> Result<Self> {
        let degrees = vec![degree; domain.len()];
        Self::chebyshev_with_degrees(degrees, domain)
    }

    pub fn chebyshev_with_degrees(degrees: Vec<usize>, domain: Vec<(f64, f64)>) -> Result<Self> {
        if degrees.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: degrees.len(),
            });
        }
        check_domain(&domain)?;
        Ok(Self {
            kind: BasisKind::ChebyshevTensor { degrees },
            domain,
            exponents: Vec::new(),
        })
    }

    pub fn complete(degree: usize, domain: Vec<(f64, f64)>) -> Result<Self> {
        check_domain(&domain)?;
        let exponents = graded_lex_exponents(domain.len(), degree);
        Ok(Self {
            kind: BasisKind::CompleteOrdinary { degree },
            domain,
            exponents,
        })
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    /// Number of basis functions.
    pub fn size(&self) -> usize {
        match &self.kind {
            BasisKind::ChebyshevTensor { degrees } => degrees.iter().map(|d| d + 1).product(),
            BasisKind::CompleteOrdinary { .. } => self.exponents.len(),
        }
    }

    fn scale(&self, axis: usize, x: f64) -> f64 {
        let (lo, hi) = self.domain[axis];
        (2.0 * x - lo - hi) / (hi - lo)
    }

    fn dscale(&self, axis: usize) -> f64 {
        let (lo, hi) = self.domain[axis];
        2.0 / (hi - lo)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// All basis values at `point`.
    ///
    /// Chebyshev coordinates are clamped to `[-1, 1]` after scaling;
    /// complete ordinary polynomials extrapolate.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_point(point)?;
        match &self.kind {
            BasisKind::ChebyshevTensor { .. } => {
                let factors = self.tensor_factors(point);
                Ok(kron(&factors))
            }
            BasisKind::CompleteOrdinary { degree } => {
                let powers = self.scaled_powers(point, *degree);
                Ok(self
                    .exponents
                    .iter()
                    .map(|e| e.iter().enumerate().map(|(d, &p)| powers[d][p]).product())
                    .collect())
            }
        }
    }

    /// Partial derivatives of all basis functions with respect to
    /// coordinate `axis`, in original (unscaled) units.
    pub fn eval_partial(&self, point: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_point(point)?;
        match &self.kind {
            BasisKind::ChebyshevTensor { degrees } => {
                let mut factors = self.tensor_factors(point);
                let t = self.scale(axis, point[axis]).clamp(-1.0, 1.0);
                let ds = self.dscale(axis);
                factors[axis] = chebyshev_derivatives(degrees[axis], t)
                    .into_iter()
                    .map(|v| v * ds)
                    .collect();
                Ok(kron(&factors))
            }
            BasisKind::CompleteOrdinary { degree } => {
                let powers = self.scaled_powers(point, *degree);
                let ds = self.dscale(axis);
                Ok(self
                    .exponents
                    .iter()
                    .map(|e| {
                        if e[axis] == 0 {
                            return 0.0;
                        }
                        let mut v = e[axis] as f64 * ds;
                        for (d, &p) in e.iter().enumerate() {
                            v *= if d == axis { powers[d][p - 1] } else { powers[d][p] };
                        }
                        v
                    })
                    .collect())
            }
        }
    }

    /// Per-dimension Chebyshev values at `point` (tensor bases only).
    ///
    /// The tensor basis value for multi-index `m` is `Π_d factors[d][m_d]`,
    /// ordered with the last dimension varying fastest.
    pub fn tensor_factors(&self, point: &[f64]) -> Vec<Vec<f64>> {
        match &self.kind {
            BasisKind::ChebyshevTensor { degrees } => degrees
                .iter()
                .enumerate()
                .map(|(d, &deg)| chebyshev_values(deg, self.scale(d, point[d]).clamp(-1.0, 1.0)))
                .collect(),
            BasisKind::CompleteOrdinary { .. } => {
                panic!("tensor_factors requires a Chebyshev tensor basis")
            }
        }
    }

    /// 1-D Chebyshev values along one axis of a tensor basis.
    pub fn axis_values(&self, axis: usize, x: f64) -> Vec<f64> {
        match &self.kind {
            BasisKind::ChebyshevTensor { degrees } => {
                chebyshev_values(degrees[axis], self.scale(axis, x).clamp(-1.0, 1.0))
            }
            BasisKind::CompleteOrdinary { .. } => {
                panic!("axis_values requires a Chebyshev tensor basis")
            }
        }
    }

    /// 1-D Chebyshev derivatives along one axis, in original units.
    pub fn axis_derivatives(&self, axis: usize, x: f64) -> Vec<f64> {
        match &self.kind {
            BasisKind::ChebyshevTensor { degrees } => {
                let ds = self.dscale(axis);
                chebyshev_derivatives(degrees[axis], self.scale(axis, x).clamp(-1.0, 1.0))
                    .into_iter()
                    .map(|v| v * ds)
                    .collect()
            }
            BasisKind::CompleteOrdinary { .. } => {
                panic!("axis_derivatives requires a Chebyshev tensor basis")
            }
        }
    }

    fn scaled_powers(&self, point: &[f64], degree: usize) -> Vec<Vec<f64>> {
        point
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                let s = self.scale(d, x);
                let mut p = Vec::with_capacity(degree + 1);
                let mut acc = 1.0;
                for _ in 0..=degree {
                    p.push(acc);
                    acc *= s;
                }
                p
            })
            .collect()
    }

    /// Regression matrix with one row per grid point.
    pub fn matrix(&self, grid: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(grid.len(), self.size());
        for (r, p) in grid.iter().enumerate() {
            for (c, v) in self.eval(p)?.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }
}

fn check_domain(domain: &[(f64, f64)]) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::InvalidConfig("basis needs at least one dimension".into()));
    }
    for (d, &(lo, hi)) in domain.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "domain of dimension {d} must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// `T_0..=T_degree` at `x` by the three-term recurrence.
pub fn chebyshev_values(degree: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(degree + 1);
    t.push(1.0);
    if degree >= 1 {
        t.push(x);
    }
    for m in 2..=degree {
        let next = 2.0 * x * t[m - 1] - t[m - 2];
        t.push(next);
    }
    t
}

/// `T_0'..=T_degree'` at `x`, from `T_m' = 2T_{m-1} + 2x T_{m-1}' − T_{m-2}'`.
pub fn chebyshev_derivatives(degree: usize, x: f64) -> Vec<f64> {
    let t = chebyshev_values(degree, x);
    let mut dt = Vec::with_capacity(degree + 1);
    dt.push(0.0);
    if degree >= 1 {
        dt.push(1.0);
    }
    for m in 2..=degree {
        let next = 2.0 * t[m - 1] + 2.0 * x * dt[m - 1] - dt[m - 2];
        dt.push(next);
    }
    dt
}

/// Roots of `T_n` mapped to `[lo, hi]`, in increasing order.
pub fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .rev()
        .map(|k| {
            let t = ((2 * k + 1) as f64 * PI / (2 * n) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        })
        .collect()
}

/// `n` equally spaced points on `[lo, hi]`, endpoints included.
pub fn uniform_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Cartesian product of 1-D node sets, last axis varying fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for p in &grid {
            for &x in axis {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        grid = next;
    }
    grid
}

fn kron(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            for &b in f {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// Exponent tuples with total degree `≤ degree`, ordered by total degree
/// and then lexicographically descending (`x₁` before `x₂`).
fn graded_lex_exponents(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn fill(dim: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim - 1 {
            let used: usize = prefix.iter().sum();
            let mut e = prefix.clone();
            e.push(total - used);
            out.push(e);
            return;
        }
        let used: usize = prefix.iter().sum();
        for p in (0..=total - used).rev() {
            prefix.push(p);
            fill(dim, total, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        fill(dim, total, &mut Vec::new(), &mut out);
    }
    out
}

/// A basis together with fitted coefficients: `f(x) = Σ_m θ_m φ_m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFunction {
    pub basis: PolyBasis,
    pub coefficients: Vec<f64>,
}

impl FittedFunction {
    pub fn new(basis: PolyBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.size() {
            return Err(Error::DimensionMismatch {
                expected: basis.size(),
                got: coefficients.len(),
            });
        }
        Ok(Self { basis, coefficients })
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        dot(&self.basis.eval(point).expect("point dimension"), &self.coefficients)
    }

    pub fn partial(&self, point: &[f64], axis: usize) -> f64 {
        dot(
            &self.basis.eval_partial(point, axis).expect("point dimension"),
            &self.coefficients,
        )
    }

    /// Evaluates a tensor-basis function from per-dimension factor vectors
    /// (e.g. Chebyshev values, their derivatives, or their expectations).
    pub fn eval_factors(&self, factors: &[Vec<f64>]) -> f64 {
        contract(&self.coefficients, factors)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_m θ_m Π_d f_d[m_d]` with the last dimension varying fastest.
fn contract(coef: &[f64], factors: &[Vec<f64>]) -> f64 {
    // Contract the last dimension first, then move outwards.
    let mut buf: Vec<f64> = coef.to_vec();
    for f in factors.iter().rev() {
        let n = f.len();
        let outer = buf.len() / n;
        let mut next = Vec::with_capacity(outer);
        for o in 0..outer {
            let row = &buf[o * n..(o + 1) * n];
            next.push(dot(row, f));
        }
        buf = next;
    }
    buf[0]
}

/// Precomputed least-squares solver for a fixed regression matrix.
///
/// Stores `R⁻¹Qᵀ` from a thin QR factorization so repeated fits on the same
/// grid cost one matrix-vector product.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pinv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows < cols {
            return Err(Error::RankDeficient(format!(
                "{rows} grid points cannot identify {cols} basis coefficients"
            )));
        }
        let qr = matrix.clone().qr();
        let r = qr.r();
        let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..cols {
            if r[(i, i)].abs() <= 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
                return Err(Error::RankDeficient(format!(
                    "basis column {i} is linearly dependent on earlier columns \
                     over the {rows}-point grid ({cols} basis functions)"
                )));
            }
        }
        let q = qr.q();
        let r_inv = r
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("triangular factor is singular".into()))?;
        Ok(Self {
            pinv: r_inv * q.transpose(),
        })
    }

    pub fn solve(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.pinv * v).iter().copied().collect()
    }
}

/// Coefficients minimizing `‖Bθ − v‖₂`.
pub fn fit_least_squares(basis_matrix: &DMatrix<f64>, values: &[f64]) -> Result<Vec<f64>> {
    if basis_matrix.nrows() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: basis_matrix.nrows(),
            got: values.len(),
        });
    }
    Ok(LeastSquares::new(basis_matrix)?.solve(values))
}

/// Gauss–Hermite rule for `∫ f(x) e^{-x²} dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// `∫ f(x) e^{-x²} dx ≈ Σ w_q f(x_q)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

pub const MAX_HERMITE_ORDER: usize = 32;

/// Gauss–Hermite nodes and weights.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps on the orthonormal Hermite recurrence; weights are the
/// Christoffel numbers `1 / Σ_k p_k(x)²`.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_HERMITE_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = order;
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    for x in nodes.iter_mut() {
        for _ in 0..10 {
            let (pn, pn1, _) = hermite_orthonormal(n, *x);
            let dp = (2.0 * n as f64).sqrt() * pn1;
            let step = pn / dp;
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| 1.0 / hermite_orthonormal(n, x).2)
        .collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        order,
    })
}

/// Returns `(p_n(x), p_{n-1}(x), Σ_{k<n} p_k(x)²)` for Hermite polynomials
/// orthonormal under `e^{-x²}`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += p * p;
        let next = (2.0 / (k + 1) as f64).sqrt() * x * p - (k as f64 / (k + 1) as f64).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    (p, p_prev, sum_sq)
}

/// Law of motion of an exogenous AR(1) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ar1Law {
    /// `ln z′ = ρ ln z + ε′`.
    Log { rho: f64, sigma: f64 },
    /// `z′ = ρ (z − mean) + mean + ε′`.
    Level { rho: f64, sigma: f64, mean: f64 },
}

impl Ar1Law {
    pub fn sigma(&self) -> f64 {
        match *self {
            Ar1Law::Log { sigma, .. } | Ar1Law::Level { sigma, .. } => sigma,
        }
    }

    /// Next-period state for innovation `eps`.
    pub fn next(&self, z: f64, eps: f64) -> f64 {
        match *self {
            Ar1Law::Log { rho, .. } => (rho * z.ln() + eps).exp(),
            Ar1Law::Level { rho, mean, .. } => rho * (z - mean) + mean + eps,
        }
    }

    /// Quadrature nodes `(w_q / √π, z′_q)` for the conditional distribution.
    pub fn nodes(&self, z: f64, rule: &QuadratureRule) -> Vec<(f64, f64)> {
        let s = std::f64::consts::SQRT_2 * self.sigma();
        let norm = PI.sqrt();
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| (w / norm, self.next(z, s * x)))
            .collect()
    }

    /// `E[f(z′) | z]` under the rule.
    pub fn expectation(&self, z: f64, rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes(z, rule).into_iter().map(|(w, zn)| w * f(zn)).sum()
    }
}

/// `E[f(endog_next, z′) | z_now]` for a fitted function whose last
/// coordinate is the AR(1) state.
pub fn ar1_expectation(
    f: &FittedFunction,
    endog_next: &[f64],
    z_now: f64,
    law: &Ar1Law,
    rule: &QuadratureRule,
) -> f64 {
    let mut point = endog_next.to_vec();
    point.push(0.0);
    let last = point.len() - 1;
    law.nodes(z_now, rule)
        .into_iter()
        .map(|(w, zn)| {
            point[last] = zn;
            w * f.eval(&point)
        })
        .sum()
}
