use std::f64::consts::LN_2;

use crate::domain::HeterogeneousDataset;
use crate::error::Result;
use crate::hyperopt::{expected_regression_loglik_from, kl_inducing};
use crate::kernel::InducingGrid;
use crate::special::log_cosh;

use super::predictive::Moments;
use super::state::{LatentPosterior, PgSites};

/// Evidence lower bound of the augmented model restricted to regression and
/// classification tasks:
///
/// `Σ E[log N(y | g, σ²)] + Σ E[h(ω, y g)] - KL(q(ω) ‖ PG(1, 0)) - KL(q(u) ‖ p(u))`.
///
/// `moments` are the predictive moments at each task's inputs (global order)
/// for `latent`; `sites` are the Pólya-Gamma posteriors `PG(1, c)` of the
/// classification samples. Point-process tasks contribute nothing.
pub fn restricted_elbo(
    dataset: &HeterogeneousDataset,
    grid: &InducingGrid,
    latent: &LatentPosterior,
    moments: &[Moments],
    sites: &[PgSites],
) -> Result<f64> {
    let mut total = expected_regression_loglik_from(dataset, grid.hyperparams(), moments);
    let nr = dataset.regression.len();
    for (k, (task, site)) in dataset.classification.iter().zip(sites).enumerate() {
        let mo = &moments[nr + k];
        for n in 0..task.labels.len() {
            let (mean, var) = (mo.mean[n], mo.var[n]);
            let second = mean * mean + var;
            let c = site.tilde_g[n];
            let omega = site.omega_mean[n];
            let expected_h = 0.5 * task.labels[n] * mean - 0.5 * second * omega - LN_2;
            let kl_pg = log_cosh(0.5 * c) - 0.5 * c * c * omega;
            total += expected_h - kl_pg;
        }
    }
    Ok(total - kl_inducing(grid, latent)?)
}
