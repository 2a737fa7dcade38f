use std::time::Instant;

use log::debug;
use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::HeterogeneousDataset;
use crate::error::{Error, Result};
use crate::evaluation::training_loglik;
use crate::hyperopt::{optimal_noise_from, optimize_kernel_hyperparams};
use crate::kernel::{build_inducing_grid, InducingGrid, JitterPolicy, LmcHyperparams};
use crate::quadrature::gauss_legendre;
use crate::rng::{self, Stream};

use super::elbo::restricted_elbo;
use super::predictive::Moments;
use super::state::{AugmentationCache, FittedModel, GammaPosterior, LatentPosterior};
use super::updates::{
    update_lambda_bar, update_latent, update_pg_classification, update_pg_pointprocess,
    update_poisson_intensity, SweepInputs,
};

/// Quantity tracked for the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// Plug-in log-likelihood of the training data under the posterior mean.
    #[default]
    TrainingLoglik,
    /// Closed-form lower bound over regression and classification tasks.
    RestrictedElbo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub inducing_counts: Vec<usize>,
    pub quadrature_counts: Vec<usize>,
    pub max_iters: usize,
    /// Relative change of the monitor below which the fit stops.
    pub tol: f64,
    pub seed: u64,
    pub update_hyperparams: bool,
    /// Hyperparameters are updated on sweeps divisible by this.
    pub hyper_every: usize,
    /// Quasi-Newton steps per kernel-hyperparameter update.
    pub inner_iters: usize,
    pub monitor: Monitor,
    /// Standard deviation of the random initial variational mean.
    pub init_scale: f64,
    pub jitter: JitterPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            inducing_counts: vec![30],
            quadrature_counts: vec![100],
            max_iters: 50,
            tol: 1e-4,
            seed: 0,
            update_hyperparams: true,
            hyper_every: 1,
            inner_iters: 25,
            monitor: Monitor::TrainingLoglik,
            init_scale: 0.1,
            jitter: JitterPolicy::default(),
        }
    }
}

impl FitConfig {
    fn check(&self, dims: usize) -> Result<()> {
        if self.inducing_counts.len() != dims || self.quadrature_counts.len() != dims {
            return Err(Error::InvalidArgument(format!(
                "inducing and quadrature counts need {dims} entries"
            )));
        }
        if self.max_iters == 0 || self.hyper_every == 0 {
            return Err(Error::InvalidArgument(
                "max_iters and hyper_every must be at least 1".into(),
            ));
        }
        if [self.tol, self.init_scale]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return Err(Error::InvalidArgument(
                "tol and init_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Trajectory of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub monitor_kind: Monitor,
    /// Monitor value after each sweep.
    pub monitor: Vec<f64>,
    /// Hyperparameters after each sweep.
    pub hyperparams: Vec<LmcHyperparams>,
    /// Posterior mean of each intensity bound after each sweep.
    pub lambda_bar: Vec<Vec<f64>>,
    pub converged: bool,
    /// Predictive variances clipped at zero over the whole fit.
    pub variance_clips: usize,
    pub elapsed_seconds: f64,
}

fn initial_latent(grid: &InducingGrid, seed: u64, scale: f64) -> LatentPosterior {
    let mut prior = LatentPosterior::prior(grid);
    if scale > 0.0 {
        let mut rng = rng::stream(seed, Stream::VariationalInit);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        prior.mean = DVector::from_iterator(
            prior.mean.len(),
            (0..prior.mean.len()).map(|_| normal.sample(&mut rng)),
        );
    }
    prior
}

fn clips(moments: &[Moments]) -> usize {
    moments.iter().map(|m| m.clipped).sum()
}

/// Runs coordinate-ascent sweeps, alternating with hyperparameter updates,
/// until the monitor settles or `max_iters` sweeps have run.
pub fn fit(
    dataset: &HeterogeneousDataset,
    init: &LmcHyperparams,
    config: &FitConfig,
) -> Result<(FittedModel, FitReport)> {
    let started = Instant::now();
    let domain = &dataset.domain;
    config.check(domain.dims())?;
    init.check_layout(dataset.num_tasks(), dataset.regression.len())?;
    let kinds = dataset.kinds();

    let rule = gauss_legendre(domain, &config.quadrature_counts)?;
    let mut grid = build_inducing_grid(domain, &config.inducing_counts, init, &config.jitter)?;
    let mut latent = initial_latent(&grid, config.seed, config.init_scale);
    let mut gamma: Vec<GammaPosterior> = dataset
        .point_process
        .iter()
        .map(|t| GammaPosterior {
            alpha: (t.events.len() as f64).max(1.0),
            beta: domain.volume(),
        })
        .collect();

    let mut inputs = SweepInputs::new(&grid, dataset, &rule);
    let mut data_mo = inputs.data_moments(&latent);
    let mut node_mo = inputs.node_moments(&latent);

    let mut report = FitReport {
        iterations: 0,
        monitor_kind: config.monitor,
        monitor: Vec::new(),
        hyperparams: Vec::new(),
        lambda_bar: Vec::new(),
        converged: false,
        variance_clips: clips(&data_mo)
            + node_mo.iter().flatten().map(|m| m.clipped).sum::<usize>(),
        elapsed_seconds: 0.0,
    };

    let snapshot = |grid: &InducingGrid, latent: &LatentPosterior, gamma: &[GammaPosterior]| {
        Some(Box::new(FittedModel {
            grid: grid.clone(),
            latent: latent.clone(),
            gamma: gamma.to_vec(),
            kinds: kinds.clone(),
        }))
    };
    let diverged = |sweep: usize, reason: String, last| Error::Diverged {
        sweep,
        reason,
        last,
    };

    for sweep in 1..=config.max_iters {
        let classification = update_pg_classification(dataset, &data_mo);
        let events = update_pg_pointprocess(dataset, &data_mo);
        let node_refs: Vec<&Moments> = node_mo.iter().flatten().collect();
        let intensity = update_poisson_intensity(&gamma, &node_refs, &rule)
            .map_err(|e| diverged(sweep, e.to_string(), snapshot(&grid, &latent, &gamma)))?;
        let r: Vec<f64> = intensity.iter().map(|c| c.r).collect();
        let new_gamma = update_lambda_bar(dataset, &r)?;
        let cache = AugmentationCache {
            classification,
            events,
            intensity,
        };
        let new_latent = update_latent(&inputs, &grid, &cache)
            .map_err(|e| diverged(sweep, e.to_string(), snapshot(&grid, &latent, &gamma)))?;
        gamma = new_gamma;
        latent = new_latent;

        let update_hyper = config.update_hyperparams && sweep % config.hyper_every == 0;
        if update_hyper {
            grid = optimize_kernel_hyperparams(&grid, &latent, config.inner_iters)
                .map_err(|e| diverged(sweep, e.to_string(), snapshot(&grid, &latent, &gamma)))?;
            inputs = SweepInputs::new(&grid, dataset, &rule);
        }
        data_mo = inputs.data_moments(&latent);
        node_mo = inputs.node_moments(&latent);
        report.variance_clips +=
            clips(&data_mo) + node_mo.iter().flatten().map(|m| m.clipped).sum::<usize>();

        if update_hyper && !dataset.regression.is_empty() {
            let mut hyp = grid.hyperparams().clone();
            for (i, task) in dataset.regression.iter().enumerate() {
                if !task.outputs.is_empty() {
                    hyp.noise_vars[i] = optimal_noise_from(&task.outputs, &data_mo[i]);
                }
            }
            grid.set_noise_vars(hyp.noise_vars);
        }

        let value = match config.monitor {
            Monitor::TrainingLoglik => {
                let node_refs: Vec<&Moments> = node_mo.iter().flatten().collect();
                training_loglik(
                    dataset,
                    grid.hyperparams(),
                    &gamma,
                    &data_mo,
                    &node_refs,
                    &rule,
                )
            }
            Monitor::RestrictedElbo => {
                restricted_elbo(dataset, &grid, &latent, &data_mo, &cache.classification)?
            }
        };
        if !value.is_finite() {
            return Err(diverged(
                sweep,
                format!("monitor is {value}"),
                snapshot(&grid, &latent, &gamma),
            ));
        }
        debug!("sweep {sweep}: monitor {value:.6}");
        report.iterations = sweep;
        report.hyperparams.push(grid.hyperparams().clone());
        report
            .lambda_bar
            .push(gamma.iter().map(|g| g.mean()).collect());
        let previous = report.monitor.last().copied();
        report.monitor.push(value);
        if let Some(prev) = previous {
            if (value - prev).abs() < config.tol * value.abs().max(1e-12) {
                report.converged = true;
                break;
            }
        }
    }

    report.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok((
        FittedModel {
            grid,
            latent,
            gamma,
            kinds,
        },
        report,
    ))
}
