use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::TaskKind;
use crate::error::{Error, Result};
use crate::kernel::InducingGrid;
use crate::rng::{self, Stream};
use crate::special::sigmoid;

use super::state::{FittedModel, LatentPosterior};

/// `k^i(x_m, X)` and `A = (K^i_mm)^{-1} k^i(x_m, X)` for one task and a fixed
/// point set. Depends only on the grid, so it is reused across updates until
/// the hyperparameters change.
#[derive(Debug, Clone)]
pub struct Projection {
    pub task: usize,
    pub kmn: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub prior_var: f64,
}

/// Gaussian marginals of `g_i` at a point set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// How many variances were negative (from jitter round-off) and clipped.
    pub clipped: usize,
}

impl Moments {
    /// `sqrt(E[g^2])` at every point.
    pub fn tilde(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| (m * m + v).sqrt())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

impl Projection {
    pub fn new(grid: &InducingGrid, task: usize, xs: &[Vec<f64>]) -> Self {
        let kmn = grid.task_cross(task, xs);
        let a = grid.block_chol(task).solve(&kmn);
        Projection {
            task,
            kmn,
            a,
            prior_var: grid.hyperparams().task_variance(task),
        }
    }

    pub fn len(&self) -> usize {
        self.kmn.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.kmn.ncols() == 0
    }

    /// Predictive mean and variance of `g_i` at every point.
    pub fn moments(&self, latent: &LatentPosterior) -> Moments {
        let m = self.kmn.nrows();
        let n = self.len();
        let mu_task = latent.mean.rows(self.task * m, m);
        let sigma = latent.cov.view((self.task * m, self.task * m), (m, m));
        let mean: Vec<f64> = (self.a.tr_mul(&mu_task)).iter().copied().collect();
        let sa = sigma * &self.a;
        let mut var = Vec::with_capacity(n);
        let mut clipped = 0;
        for col in 0..n {
            let a = self.a.column(col);
            let v = self.prior_var - self.kmn.column(col).dot(&a) + sa.column(col).dot(&a);
            if v < 0.0 {
                clipped += 1;
                var.push(0.0);
            } else {
                var.push(v);
            }
        }
        Moments { mean, var, clipped }
    }
}

/// Predictive `(mu, var)` of `g_i(x)`.
pub fn predictive(
    latent: &LatentPosterior,
    grid: &InducingGrid,
    task: usize,
    x: &[f64],
) -> Result<(f64, f64)> {
    if task >= grid.num_tasks() {
        return Err(Error::TaskIndex {
            index: task,
            count: grid.num_tasks(),
        });
    }
    if x.len() != grid.domain().dims() {
        return Err(Error::Dimension {
            expected: grid.domain().dims(),
            got: x.len(),
        });
    }
    let mo = Projection::new(grid, task, &[x.to_vec()]).moments(latent);
    Ok((mo.mean[0], mo.var[0]))
}

/// `sqrt(mu^2 + var)`.
pub fn tilde_g(mu: f64, var: f64) -> Result<f64> {
    if var < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance must be non-negative, got {var}"
        )));
    }
    Ok((mu * mu + var).sqrt())
}

/// Posterior summary of a task's reported function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    /// `ḡ` for regression, `s(ḡ)` for classification, `E[λ̄] s(ḡ)` for Cox.
    pub value: f64,
    /// Predictive mean of the latent function.
    pub mean: f64,
    /// Predictive variance of the latent function.
    pub var: f64,
}

pub fn posterior_functions(
    model: &FittedModel,
    task: usize,
    points: &[Vec<f64>],
) -> Result<Vec<PosteriorSummary>> {
    let kind = *model.kinds.get(task).ok_or(Error::TaskIndex {
        index: task,
        count: model.num_tasks(),
    })?;
    let mo = Projection::new(&model.grid, task, points).moments(&model.latent);
    let scale = match kind {
        TaskKind::PointProcess => {
            model
                .gamma_for_task(task)
                .map(|g| g.mean())
                .ok_or(Error::TaskIndex {
                    index: task,
                    count: model.num_tasks(),
                })?
        }
        _ => 1.0,
    };
    Ok(mo
        .mean
        .iter()
        .zip(&mo.var)
        .map(|(&mean, &var)| PosteriorSummary {
            value: match kind {
                TaskKind::Regression => mean,
                TaskKind::Classification => sigmoid(mean),
                TaskKind::PointProcess => scale * sigmoid(mean),
            },
            mean,
            var,
        })
        .collect())
}

/// One-standard-deviation band of a task's reported function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Reported function ± one posterior standard deviation at each point.
///
/// Regression bands come straight from the predictive variance. For
/// classification and Cox tasks the standard deviation is estimated from
/// `samples` draws of `g(x)` pushed through the link.
pub fn posterior_bands(
    model: &FittedModel,
    task: usize,
    points: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<Vec<Band>> {
    let summaries = posterior_functions(model, task, points)?;
    let kind = model.kinds[task];
    let scale = model.gamma_for_task(task).map_or(1.0, |g| g.mean());
    let mut rng = rng::stream_indexed(seed, Stream::Bands, task as u64);
    Ok(summaries
        .iter()
        .map(|s| {
            let sd = match kind {
                TaskKind::Regression => s.var.sqrt(),
                _ => {
                    let sd_g = s.var.sqrt();
                    let draws: Vec<f64> = (0..samples)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            scale * sigmoid(s.mean + sd_g * z)
                        })
                        .collect();
                    sample_sd(&draws)
                }
            };
            Band {
                mean: s.value,
                lower: s.value - sd,
                upper: s.value + sd,
            }
        })
        .collect())
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
