//! Local losses `L(X, v)` and their primal-update (proximal) operators
//!
//! ```text
//! PU(v) = argmin_z  L(X, z) + (1 / (2τ)) ‖v − z‖²
//! ```
//!
//! The squared-error prox has a closed form. The Lasso prox runs accelerated
//! proximal gradient with soft-thresholding and the logistic prox runs damped
//! Newton. Both iterative solvers return their best iterate together with the
//! optimality residual; hitting the iteration cap is a soft failure, not an
//! error.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::LocalDataset;
use crate::error::{Error, Result};
use crate::math;

/// Which local loss a node uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    SquaredError,
    /// Squared error plus `lambda_local · ‖v‖₁`.
    Lasso {
        lambda_local: f64,
    },
    Logistic,
}

/// Stopping rule for the iterative prox solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolver {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for InnerSolver {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

/// Result of one (possibly approximate) prox evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxReport {
    pub z: Vec<f64>,
    pub iterations: usize,
    /// Norm of the minimal (sub)gradient of the prox objective at `z`.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub kind: LossKind,
    pub inner: InnerSolver,
}

impl LossModel {
    pub fn new(kind: LossKind, inner: InnerSolver) -> Result<Self> {
        let model = Self { kind, inner };
        model.check_parameters()?;
        Ok(model)
    }

    pub fn squared() -> Self {
        Self {
            kind: LossKind::SquaredError,
            inner: InnerSolver::default(),
        }
    }

    pub fn lasso(lambda_local: f64) -> Self {
        Self {
            kind: LossKind::Lasso { lambda_local },
            inner: InnerSolver::default(),
        }
    }

    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            inner: InnerSolver::default(),
        }
    }

    pub fn check_parameters(&self) -> Result<()> {
        if let LossKind::Lasso { lambda_local } = self.kind {
            if !(lambda_local.is_finite() && lambda_local >= 0.0) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "lambda_local = {lambda_local} must be a nonnegative real"
                )));
            }
        }
        if !(self.inner.tolerance > 0.0) {
            return Err(Error::InvalidArgument("inner tolerance must be positive".into()));
        }
        if self.inner.max_iterations == 0 {
            return Err(Error::InvalidArgument("inner iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Checks that `data` is admissible for this loss (labels in {0,1} for logistic).
    pub fn validate(&self, data: &LocalDataset) -> Result<()> {
        if self.kind == LossKind::Logistic {
            check_binary(data)?;
        }
        Ok(())
    }

    pub fn eval(&self, data: &LocalDataset, v: &[f64]) -> Result<f64> {
        match self.kind {
            LossKind::SquaredError => eval_squared(data, v),
            LossKind::Lasso { lambda_local } => eval_lasso(data, v, lambda_local),
            LossKind::Logistic => eval_logistic(data, v),
        }
    }

    pub fn prox(&self, data: &LocalDataset, v: &[f64], tau: f64) -> Result<ProxReport> {
        match self.kind {
            LossKind::SquaredError => {
                let z = prox_squared(data, v, tau)?;
                let residual = squared_prox_residual(data, v, tau, &z);
                Ok(ProxReport {
                    z,
                    iterations: 1,
                    residual,
                    converged: true,
                })
            }
            LossKind::Lasso { lambda_local } => prox_lasso(data, v, tau, lambda_local, &self.inner),
            LossKind::Logistic => prox_logistic(data, v, tau, &self.inner),
        }
    }

    /// `L(X, z) + (1/(2τ)) ‖v − z‖²`.
    pub fn prox_objective(&self, data: &LocalDataset, v: &[f64], tau: f64, z: &[f64]) -> Result<f64> {
        Ok(self.eval(data, z)? + proximity(v, z, tau))
    }
}

fn proximity(v: &[f64], z: &[f64], tau: f64) -> f64 {
    let d = math::dist2(v, z);
    d * d / (2.0 * tau)
}

fn check_dim(data: &LocalDataset, v: &[f64]) -> Result<()> {
    if v.len() != data.n_features() {
        return Err(Error::ShapeMismatch {
            what: "weight vector dimension",
            expected: data.n_features(),
            found: v.len(),
        });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "prox step {tau} must be positive"
        )));
    }
    Ok(())
}

fn check_binary(data: &LocalDataset) -> Result<()> {
    match data.labels().iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(&value) => Err(Error::InvalidLabel { node: None, value }),
        None => Ok(()),
    }
}

/// Residuals `y − X v`.
fn residuals(data: &LocalDataset, v: &[f64]) -> DVector<f64> {
    data.labels() - data.features() * DVector::from_column_slice(v)
}

/// Mean squared residual `(1/m) Σ (y_r − vᵀ x_r)²`.
pub fn eval_squared(data: &LocalDataset, v: &[f64]) -> Result<f64> {
    check_dim(data, v)?;
    Ok(residuals(data, v).norm_squared() / data.len() as f64)
}

pub fn eval_lasso(data: &LocalDataset, v: &[f64], lambda_local: f64) -> Result<f64> {
    Ok(eval_squared(data, v)? + lambda_local * math::norm1(v))
}

/// Mean negative log-likelihood of labels in {0,1} under `σ(vᵀx)`.
pub fn eval_logistic(data: &LocalDataset, v: &[f64]) -> Result<f64> {
    check_dim(data, v)?;
    check_binary(data)?;
    let t = data.features() * DVector::from_column_slice(v);
    let total: f64 = t
        .iter()
        .zip(data.labels().iter())
        .map(|(&t, &y)| {
            if y == 1.0 {
                math::softplus(-t)
            } else {
                math::softplus(t)
            }
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Gradient of the mean logistic loss, `(1/m) Xᵀ (σ(Xv) − y)`.
pub fn logistic_gradient(data: &LocalDataset, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(data, v)?;
    check_binary(data)?;
    Ok(logistic_grad(data, &DVector::from_column_slice(v)).as_slice().to_vec())
}

/// Gradient of the logistic prox objective at `z`.
pub fn logistic_prox_gradient(data: &LocalDataset, v: &[f64], tau: f64, z: &[f64]) -> Result<Vec<f64>> {
    check_dim(data, v)?;
    check_tau(tau)?;
    let mut g = logistic_gradient(data, z)?;
    for ((g, z), v) in g.iter_mut().zip(z).zip(v) {
        *g += (z - v) / tau;
    }
    Ok(g)
}

fn logistic_grad(data: &LocalDataset, v: &DVector<f64>) -> DVector<f64> {
    let t = data.features() * v;
    let r = DVector::from_iterator(
        t.len(),
        t.iter().zip(data.labels().iter()).map(|(&t, &y)| math::sigmoid(t) - y),
    );
    data.features().tr_mul(&r) / data.len() as f64
}

/// Closed-form prox of the squared loss: solves
/// `(I + (2τ/m) XᵀX) z = v + (2τ/m) Xᵀy`.
pub fn prox_squared(data: &LocalDataset, v: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_dim(data, v)?;
    check_tau(tau)?;
    let n = data.n_features();
    let x = data.features();
    let scale = 2.0 * tau / data.len() as f64;
    let system = DMatrix::identity(n, n) + x.tr_mul(x) * scale;
    let rhs = DVector::from_column_slice(v) + x.tr_mul(data.labels()) * scale;
    let z = match system.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        // Unreachable for finite inputs: the system matrix is ≥ I.
        None => system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("singular squared-loss prox system".into()))?,
    };
    Ok(z.as_slice().to_vec())
}

fn squared_grad(data: &LocalDataset, z: &DVector<f64>) -> DVector<f64> {
    let x = data.features();
    x.tr_mul(&(x * z - data.labels())) * (2.0 / data.len() as f64)
}

fn squared_prox_residual(data: &LocalDataset, v: &[f64], tau: f64, z: &[f64]) -> f64 {
    let zv = DVector::from_column_slice(z);
    let mut g = squared_grad(data, &zv);
    for ((g, z), v) in g.iter_mut().zip(z).zip(v) {
        *g += (z - v) / tau;
    }
    g.norm()
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, padded by 1 %.
fn spectral_bound(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_element(n, 1.0 / math::sqrt(n as f64));
    let mut estimate = 0.0;
    for _ in 0..200 {
        let y = m * &x;
        let norm = y.norm();
        if norm == 0.0 {
            // Start vector in the null space; fall back to the trace bound.
            return m.trace();
        }
        let next = x.dot(&y);
        x = y / norm;
        if math::abs(next - estimate) <= 1e-12 * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    1.01 * estimate
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Norm of the minimal subgradient of `h + λ‖·‖₁` at `z`, given `g = ∇h(z)`.
fn l1_residual(z: &DVector<f64>, g: &DVector<f64>, lambda: f64) -> f64 {
    let s: f64 = z
        .iter()
        .zip(g.iter())
        .map(|(&zj, &gj)| {
            let r = if zj > 0.0 {
                gj + lambda
            } else if zj < 0.0 {
                gj - lambda
            } else {
                (math::abs(gj) - lambda).max(0.0)
            };
            r * r
        })
        .sum();
    math::sqrt(s)
}

/// Prox of the Lasso loss by accelerated proximal gradient.
///
/// The smooth part `(1/m)‖Xz − y‖² + (1/(2τ))‖z − v‖²` is `1/τ`-strongly
/// convex, so the constant momentum `(√L − √μ)/(√L + √μ)` is used.
pub fn prox_lasso(
    data: &LocalDataset,
    v: &[f64],
    tau: f64,
    lambda_local: f64,
    inner: &InnerSolver,
) -> Result<ProxReport> {
    check_dim(data, v)?;
    check_tau(tau)?;
    if !(lambda_local.is_finite() && lambda_local >= 0.0) {
        return Err(Error::InvalidArgument("lambda_local must be nonnegative".into()));
    }
    let x = data.features();
    let gram = x.tr_mul(x) * (2.0 / data.len() as f64);
    let mu = 1.0 / tau;
    let lipschitz = spectral_bound(&gram) + mu;
    let step = 1.0 / lipschitz;
    let q = mu / lipschitz;
    let momentum = (1.0 - math::sqrt(q)) / (1.0 + math::sqrt(q));
    let anchor = DVector::from_column_slice(v);
    let xty = x.tr_mul(data.labels()) * (2.0 / data.len() as f64);
    let grad = |z: &DVector<f64>| &gram * z - &xty + (z - &anchor) * mu;

    let mut current = anchor.clone();
    let mut previous = current.clone();
    let mut best = current.clone();
    let mut best_residual = l1_residual(&current, &grad(&current), lambda_local);
    let mut iterations = 0;
    while best_residual > inner.tolerance && iterations < inner.max_iterations {
        iterations += 1;
        let extrapolated = &current + (&current - &previous) * momentum;
        let g = grad(&extrapolated);
        let next = (extrapolated - g * step).map(|c| soft_threshold(c, lambda_local * step));
        previous = core::mem::replace(&mut current, next);
        let residual = l1_residual(&current, &grad(&current), lambda_local);
        if residual < best_residual {
            best_residual = residual;
            best.copy_from(&current);
        }
    }
    Ok(ProxReport {
        z: best.as_slice().to_vec(),
        iterations,
        residual: best_residual,
        converged: best_residual <= inner.tolerance,
    })
}

/// Prox of the logistic loss by Newton's method with Armijo backtracking.
///
/// Falls back to a gradient step when the Newton system cannot be factored or
/// does not give a descent direction. Stops early, flagged unconverged, when
/// the line search can no longer decrease the objective in floating point.
pub fn prox_logistic(data: &LocalDataset, v: &[f64], tau: f64, inner: &InnerSolver) -> Result<ProxReport> {
    check_dim(data, v)?;
    check_tau(tau)?;
    check_binary(data)?;
    let n = data.n_features();
    let x = data.features();
    let m = data.len() as f64;
    let anchor = DVector::from_column_slice(v);
    let objective = |z: &DVector<f64>| -> f64 {
        let t = x * z;
        let loss: f64 = t
            .iter()
            .zip(data.labels().iter())
            .map(|(&t, &y)| {
                if y == 1.0 {
                    math::softplus(-t)
                } else {
                    math::softplus(t)
                }
            })
            .sum::<f64>()
            / m;
        loss + (z - &anchor).norm_squared() / (2.0 * tau)
    };
    let gradient = |z: &DVector<f64>| logistic_grad(data, z) + (z - &anchor) / tau;
    // σ' ≤ 1/4
    let gradient_lipschitz = spectral_bound(&x.tr_mul(x)) / (4.0 * m) + 1.0 / tau;

    let mut z = anchor.clone();
    let mut g = gradient(&z);
    let mut residual = g.norm();
    let mut value = objective(&z);
    let mut iterations = 0;
    while residual > inner.tolerance && iterations < inner.max_iterations {
        iterations += 1;
        let t = x * &z;
        let weights = DVector::from_iterator(
            t.len(),
            t.iter().map(|&t| {
                let s = math::sigmoid(t);
                s * (1.0 - s)
            }),
        );
        let mut hessian = DMatrix::identity(n, n) / tau;
        for r in 0..x.nrows() {
            let row = x.row(r);
            hessian += row.transpose() * row * (weights[r] / m);
        }
        let newton = hessian.cholesky().map(|c| -c.solve(&g));
        let direction = match newton {
            Some(p) if p.iter().all(|c| c.is_finite()) && p.dot(&g) < 0.0 => p,
            _ => -&g / gradient_lipschitz,
        };
        let slope = direction.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        // Near the minimizer the decrease drops below the rounding of the
        // objective; there a step is taken if it shrinks the gradient instead.
        let flat = 8.0 * f64::EPSILON * (1.0 + math::abs(value));
        for _ in 0..60 {
            let candidate = &z + &direction * step;
            let candidate_value = objective(&candidate);
            if candidate_value <= value + 1e-4 * step * slope {
                let cg = gradient(&candidate);
                accepted = Some((candidate, candidate_value, cg));
                break;
            }
            if math::abs(candidate_value - value) <= flat {
                let cg = gradient(&candidate);
                if cg.norm() < residual {
                    accepted = Some((candidate, candidate_value, cg));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_value, next_g)) = accepted else {
            break;
        };
        let next_residual = next_g.norm();
        if next_value == value && next_residual >= residual {
            // No representable progress left.
            break;
        }
        z = next;
        value = next_value;
        g = next_g;
        residual = next_residual;
    }
    Ok(ProxReport {
        z: z.as_slice().to_vec(),
        iterations,
        residual,
        converged: residual <= inner.tolerance,
    })
}
