//! Hyperparameter updates: kernel parameters and mixing weights by
//! minimizing `KL(q(u) ‖ p(u))` with the variational posterior frozen, and
//! the regression noise variances in closed form.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::HeterogeneousDataset;
use crate::error::{Error, Result};
use crate::inference::{LatentPosterior, Moments, Projection};
use crate::kernel::{
    cholesky_with_jitter, kronecker_covariance, log_det, InducingGrid, JitterPolicy,
    LmcHyperparams, RbfParams,
};

const LOG_THETA_BOUND: f64 = 18.0;
const WEIGHT_BOUND: f64 = 100.0;
const FD_STEP: f64 = 1e-5;
const NOISE_FLOOR: f64 = 1e-8;

/// `KL(N(m, Σ) ‖ N(0, K_mm))` against the grid's jittered prior.
pub fn kl_inducing(grid: &InducingGrid, latent: &LatentPosterior) -> Result<f64> {
    let frozen = FrozenPosterior::new(latent)?;
    Ok(frozen.kl_against(grid.chol()))
}

/// Factorized view of a fixed variational posterior.
struct FrozenPosterior {
    /// `[L_Σ | m]`, the right-hand sides of every solve the KL needs.
    rhs: DMatrix<f64>,
    log_det_sigma: f64,
}

impl FrozenPosterior {
    fn new(latent: &LatentPosterior) -> Result<Self> {
        latent.check()?;
        let n = latent.mean.len();
        let (chol, _) = cholesky_with_jitter(&latent.cov, &JitterPolicy::starting_at(0.0))?;
        let log_det_sigma = log_det(&chol);
        let mut rhs = DMatrix::zeros(n, n + 1);
        rhs.view_mut((0, 0), (n, n)).copy_from(&chol.l());
        rhs.column_mut(n).copy_from(&latent.mean);
        Ok(FrozenPosterior { rhs, log_det_sigma })
    }

    fn kl_against(&self, prior: &Cholesky<f64, Dyn>) -> f64 {
        let n = self.rhs.nrows();
        let l = prior.l();
        let Some(sol) = l.solve_lower_triangular(&self.rhs) else {
            return f64::INFINITY;
        };
        let trace = sol.columns(0, n).norm_squared();
        let maha = sol.column(n).norm_squared();
        0.5 * (log_det(prior) - self.log_det_sigma - n as f64 + trace + maha)
    }
}

/// KL as a function of packed hyperparameters
/// `[ln θ0_q, ln θ1_q]_q ++ [w_iq]` (weights row-major).
struct KlObjective<'a> {
    points: &'a [Vec<f64>],
    template: &'a LmcHyperparams,
    jitter_rel: f64,
    frozen: FrozenPosterior,
}

fn pack(hyp: &LmcHyperparams) -> Vec<f64> {
    let mut x = Vec::new();
    for k in &hyp.kernels {
        x.push(k.theta0.ln());
        x.push(k.theta1.ln());
    }
    x.extend(hyp.weights.iter().flatten());
    x
}

fn unpack(x: &[f64], template: &LmcHyperparams) -> LmcHyperparams {
    let q = template.num_basis();
    let kernels = (0..q)
        .map(|k| RbfParams {
            theta0: x[2 * k].exp(),
            theta1: x[2 * k + 1].exp(),
        })
        .collect();
    let weights = x[2 * q..].chunks(q).map(|c| c.to_vec()).collect();
    LmcHyperparams {
        kernels,
        weights,
        noise_vars: template.noise_vars.clone(),
    }
}

fn project(x: &mut [f64], q: usize) {
    for (k, v) in x.iter_mut().enumerate() {
        let bound = if k < 2 * q {
            LOG_THETA_BOUND
        } else {
            WEIGHT_BOUND
        };
        *v = v.clamp(-bound, bound);
    }
}

impl KlObjective<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let hyp = unpack(x, self.template);
        let mut k = kronecker_covariance(&hyp, self.points);
        let n = k.nrows();
        let jitter = self.jitter_rel * k.diagonal().mean().abs().max(1e-300);
        for d in 0..n {
            k[(d, d)] += jitter;
        }
        match Cholesky::new(k) {
            Some(ch) => self.frozen.kl_against(&ch),
            None => f64::INFINITY,
        }
    }

    /// Central differences with step `1e-5 * max(|x_j|, 1)`.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|j| {
                let h = FD_STEP * x[j].abs().max(1.0);
                probe[j] = x[j] + h;
                let up = self.eval(&probe);
                probe[j] = x[j] - h;
                let down = self.eval(&probe);
                probe[j] = x[j];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Box-constrained BFGS with Armijo backtracking on `kl_inducing` over the
/// kernel parameters (log scale) and mixing weights. Returns a grid rebuilt
/// with the new hyperparameters; the objective never increases.
pub fn optimize_kernel_hyperparams(
    grid: &InducingGrid,
    latent: &LatentPosterior,
    inner_iters: usize,
) -> Result<InducingGrid> {
    let template = grid.hyperparams();
    let q = template.num_basis();
    let objective = KlObjective {
        points: grid.points(),
        template,
        jitter_rel: grid.jitter_rel(),
        frozen: FrozenPosterior::new(latent)?,
    };
    let mut x = pack(template);
    project(&mut x, q);
    let mut f = objective.eval(&x);
    if !f.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "KL objective is not finite at the current hyperparameters ({f})"
        )));
    }
    let dim = x.len();
    let mut g = objective.gradient(&x);
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let mut first = true;

    for _ in 0..inner_iters {
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm.is_nan() || gnorm <= 1e-8 {
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        if dot(&d, &g) >= 0.0 {
            hinv = DMatrix::identity(dim, dim);
            d = g.iter().map(|v| -v).collect();
        }
        let mut t = if first { (1.0 / gnorm).min(1.0) } else { 1.0 };
        first = false;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut cand, q);
            let step: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            let fc = objective.eval(&cand);
            if fc.is_finite() && fc <= f + 1e-4 * decrease {
                accepted = Some((cand, fc, step));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, s)) = accepted else {
            break;
        };
        let g_new = objective.gradient(&cand);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            let eye = DMatrix::<f64>::identity(dim, dim);
            let left = &eye - (&sv * yv.transpose()) * rho;
            let right = &eye - (&yv * sv.transpose()) * rho;
            hinv = &left * &hinv * &right + (&sv * sv.transpose()) * rho;
        }
        let improvement = f - fc;
        x = cand;
        f = fc;
        g = g_new;
        if improvement <= 1e-12 * (1.0 + f.abs()) {
            break;
        }
    }

    let mut hyp = unpack(&x, template);
    hyp.canonicalize_signs();
    grid.with_hyperparams(hyp)
}

/// Closed-form noise maximizing the expected regression log-likelihood:
/// `Σ (y² - 2 y ḡ + g̃²) / N`, floored at `1e-8`.
pub fn optimal_noise(
    latent: &LatentPosterior,
    dataset: &HeterogeneousDataset,
    grid: &InducingGrid,
    task: usize,
) -> Result<f64> {
    let reg = dataset.regression.get(task).ok_or(Error::TaskIndex {
        index: task,
        count: dataset.regression.len(),
    })?;
    if reg.outputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "regression task {task} has no samples"
        )));
    }
    let mo = Projection::new(grid, task, &reg.inputs).moments(latent);
    Ok(optimal_noise_from(&reg.outputs, &mo))
}

pub(crate) fn optimal_noise_from(y: &[f64], mo: &Moments) -> f64 {
    let total: f64 = y
        .iter()
        .zip(mo.mean.iter().zip(&mo.var))
        .map(|(y, (m, v))| y * y - 2.0 * y * m + m * m + v)
        .sum();
    (total / y.len() as f64).max(NOISE_FLOOR)
}

/// `Σ_i Σ_n -log(σ_i √(2π)) - (y² - 2 y ḡ + g̃²) / (2 σ_i²)` over all
/// regression tasks.
pub fn expected_regression_loglik(
    latent: &LatentPosterior,
    dataset: &HeterogeneousDataset,
    grid: &InducingGrid,
) -> f64 {
    let moments: Vec<Moments> = dataset
        .regression
        .iter()
        .enumerate()
        .map(|(i, t)| Projection::new(grid, i, &t.inputs).moments(latent))
        .collect();
    expected_regression_loglik_from(dataset, grid.hyperparams(), &moments)
}

pub(crate) fn expected_regression_loglik_from(
    dataset: &HeterogeneousDataset,
    hyp: &LmcHyperparams,
    moments: &[Moments],
) -> f64 {
    dataset
        .regression
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let s2 = hyp.noise_vars[i];
            let mo = &moments[i];
            task.outputs
                .iter()
                .zip(mo.mean.iter().zip(&mo.var))
                .map(|(y, (m, v))| {
                    -0.5 * (2.0 * PI * s2).ln() - (y * y - 2.0 * y * m + m * m + v) / (2.0 * s2)
                })
                .sum::<f64>()
        })
        .sum()
}
