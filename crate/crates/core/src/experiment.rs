//! Synthetic experiment presets and the missing-gap runner.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::domain::{apply_mask, random_masks, Domain, HeterogeneousDataset, TaskKind};
use crate::error::{Error, Result};
use crate::evaluation::{task_estimation_error, test_loglik, TllRegion};
use crate::inference::{fit, FitConfig};
use crate::kernel::{LmcHyperparams, RbfParams};
use crate::simulate::{simulate_dataset, SimConfig};

pub const PRESETS: [&str; 4] = ["paper-5.1-d1", "paper-5.1-d2", "paper-5.1-d3", "paper-5.2"];

/// Simulation and fit settings for one named setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub sim: SimConfig,
    pub fit: FitConfig,
    /// Number of tasks that receive a missing gap.
    pub mask_count: usize,
}

fn rbf(theta0: f64, theta1: f64) -> RbfParams {
    RbfParams { theta0, theta1 }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let line = Domain::interval(0.0, 100.0)?;
    let (kernels, weights, kinds, lambda_bar, inducing, mask_count) = match name {
        "paper-5.1-d1" | "paper-5.1-d2" | "paper-5.1-d3" => {
            let kernels = match name {
                "paper-5.1-d1" => vec![rbf(1.0, 0.001), rbf(1.0, 0.001)],
                "paper-5.1-d2" => vec![rbf(1.0, 0.02), rbf(2.0, 0.001)],
                _ => vec![rbf(1.0, 0.1), rbf(2.0, 0.1)],
            };
            let weights = vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]];
            let kinds = vec![
                TaskKind::Regression,
                TaskKind::Classification,
                TaskKind::PointProcess,
            ];
            (kernels, weights, kinds, vec![2.0], 30, 3)
        }
        "paper-5.2" => {
            let kernels = vec![rbf(1.0, 0.02), rbf(2.0, 0.001)];
            let weights = vec![
                vec![0.9, 0.1],
                vec![0.1, 0.9],
                vec![0.3, 0.5],
                vec![1.0, 1.0],
            ];
            let kinds = vec![
                TaskKind::Regression,
                TaskKind::Classification,
                TaskKind::PointProcess,
                TaskKind::PointProcess,
            ];
            (kernels, weights, kinds, vec![2.0, 2.0], 10, 4)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    let hyperparams = LmcHyperparams::new(kernels, weights, vec![0.1])?;
    Ok(Preset {
        name: name.to_string(),
        sim: SimConfig {
            domain: line,
            kinds,
            hyperparams,
            lambda_bar,
            regression_samples: 100,
            classification_samples: 100,
            grid_counts: vec![500],
        },
        fit: FitConfig {
            inducing_counts: vec![inducing],
            quadrature_counts: vec![100],
            ..FitConfig::default()
        },
        mask_count,
    })
}

/// How one experiment is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Side of each missing gap; 0 disables masking and evaluates on an
    /// independent test draw over the whole domain.
    pub width: f64,
    pub replicates: usize,
    pub base_seed: u64,
    /// Also fit each Cox task on its own and record its test log-likelihood.
    pub single_task_baseline: bool,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            width: 0.0,
            replicates: 1,
            base_seed: 0,
            single_task_baseline: false,
            threads: 1,
        }
    }
}

/// Per-replicate results. Sums run over all tasks of a type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub masks: Vec<Option<crate::domain::MaskBox>>,
    pub iterations: usize,
    pub converged: bool,
    pub ee: Vec<f64>,
    pub tll: Vec<Option<f64>>,
    pub ee_regression: f64,
    pub ee_classification: f64,
    pub ee_cox_sum: f64,
    pub tll_regression: f64,
    pub tll_classification: f64,
    pub tll_cox_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_tll_cox_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_tll_cox: Option<Vec<f64>>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub preset: String,
    pub width: f64,
    pub seeds: Vec<u64>,
    pub ee_regression: MeanSd,
    pub ee_classification: MeanSd,
    pub ee_cox_sum: MeanSd,
    pub tll_regression: MeanSd,
    pub tll_classification: MeanSd,
    pub tll_cox_sum: MeanSd,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_tll_cox_sum: Option<MeanSd>,
    pub replicates: Vec<ReplicateResult>,
}

/// Fits every Cox task of `train` on its own with that task's weights and
/// returns their test log-likelihoods.
fn single_task_cox(
    preset: &Preset,
    train: &HeterogeneousDataset,
    test: &HeterogeneousDataset,
    regions: &[TllRegion],
    seed: u64,
) -> Result<Vec<f64>> {
    let offset = train.point_process_offset();
    let hyp = &preset.sim.hyperparams;
    (0..train.point_process.len())
        .map(|k| {
            let i = offset + k;
            let only = |ds: &HeterogeneousDataset| {
                HeterogeneousDataset::new(
                    ds.domain.clone(),
                    vec![],
                    vec![],
                    vec![ds.point_process[k].clone()],
                )
            };
            let (tr, te) = (only(train)?, only(test)?);
            let init =
                LmcHyperparams::new(hyp.kernels.clone(), vec![hyp.weights[i].clone()], vec![])?;
            let config = FitConfig {
                seed,
                ..preset.fit.clone()
            };
            let (model, _) = fit(&tr, &init, &config)?;
            test_loglik(&model, &te, 0, &regions[i], &preset.fit.quadrature_counts)
        })
        .collect()
}

fn run_replicate(
    preset: &Preset,
    config: &ExperimentConfig,
    replicate: usize,
) -> Result<ReplicateResult> {
    let seed = config.base_seed + replicate as u64;
    let started = std::time::Instant::now();
    let (dataset, truth) = simulate_dataset(&preset.sim, seed)?;
    let dims = dataset.domain.dims();
    let (train, test, masks) = if config.width > 0.0 {
        let masks = random_masks(&dataset, &vec![config.width; dims], preset.mask_count, seed)?;
        let (train, test) = apply_mask(&dataset, &masks)?;
        (train, test, masks)
    } else {
        (
            dataset.clone(),
            truth.draw_test_set(seed)?,
            vec![None; dataset.num_tasks()],
        )
    };
    let regions: Vec<TllRegion> = masks
        .iter()
        .map(|m| m.clone().map_or(TllRegion::FullDomain, TllRegion::Mask))
        .collect();

    let fit_config = FitConfig {
        seed,
        ..preset.fit.clone()
    };
    let (model, report) = fit(&train, &preset.sim.hyperparams, &fit_config)?;

    let kinds = dataset.kinds();
    let mut ee = Vec::with_capacity(kinds.len());
    let mut tll = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.iter().enumerate() {
        ee.push(task_estimation_error(&model, &truth, i)?);
        // regression/classification tasks without a gap have nothing held out
        let held_out = *kind == TaskKind::PointProcess || !test.task(i).is_empty();
        tll.push(if held_out {
            Some(test_loglik(
                &model,
                &test,
                i,
                &regions[i],
                &preset.fit.quadrature_counts,
            )?)
        } else {
            None
        });
    }
    let sum_of = |values: &[f64], kind: TaskKind| -> f64 {
        kinds
            .iter()
            .zip(values)
            .filter(|(k, _)| **k == kind)
            .map(|(_, v)| v)
            .sum()
    };
    let tll_flat: Vec<f64> = tll.iter().map(|t| t.unwrap_or(0.0)).collect();
    let baseline = if config.single_task_baseline {
        Some(single_task_cox(preset, &train, &test, &regions, seed)?)
    } else {
        None
    };
    Ok(ReplicateResult {
        replicate,
        seed,
        masks,
        iterations: report.iterations,
        converged: report.converged,
        ee_regression: sum_of(&ee, TaskKind::Regression),
        ee_classification: sum_of(&ee, TaskKind::Classification),
        ee_cox_sum: sum_of(&ee, TaskKind::PointProcess),
        tll_regression: sum_of(&tll_flat, TaskKind::Regression),
        tll_classification: sum_of(&tll_flat, TaskKind::Classification),
        tll_cox_sum: sum_of(&tll_flat, TaskKind::PointProcess),
        baseline_tll_cox_sum: baseline.as_ref().map(|b| b.iter().sum()),
        baseline_tll_cox: baseline,
        ee,
        tll,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs `replicates` independent simulate, mask, fit and evaluate rounds.
/// Replicate `r` uses seed `base_seed + r` for the data, the masks and the
/// fit. Results do not depend on the thread count.
pub fn run_experiment(preset: &Preset, config: &ExperimentConfig) -> Result<ExperimentSummary> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument(
            "at least one replicate is required".into(),
        ));
    }
    if config.width.is_nan() || config.width < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gap width must be non-negative, got {}",
            config.width
        )));
    }
    let threads = config.threads.clamp(1, config.replicates);
    let mut results: Vec<(usize, Result<ReplicateResult>)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    (t..config.replicates)
                        .step_by(threads)
                        .map(|r| (r, run_replicate(preset, config, r)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    });
    results.sort_by_key(|(r, _)| *r);
    let replicates: Vec<ReplicateResult> =
        results.into_iter().map(|(_, r)| r).collect::<Result<_>>()?;

    let stat =
        |f: fn(&ReplicateResult) -> f64| MeanSd::of(&replicates.iter().map(f).collect::<Vec<_>>());
    let baseline = config.single_task_baseline.then(|| {
        MeanSd::of(
            &replicates
                .iter()
                .map(|r| r.baseline_tll_cox_sum.unwrap_or(f64::NAN))
                .collect::<Vec<_>>(),
        )
    });
    Ok(ExperimentSummary {
        preset: preset.name.clone(),
        width: config.width,
        seeds: replicates.iter().map(|r| r.seed).collect(),
        ee_regression: stat(|r| r.ee_regression),
        ee_classification: stat(|r| r.ee_classification),
        ee_cox_sum: stat(|r| r.ee_cox_sum),
        tll_regression: stat(|r| r.tll_regression),
        tll_classification: stat(|r| r.tll_classification),
        tll_cox_sum: stat(|r| r.tll_cox_sum),
        baseline_tll_cox_sum: baseline,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            assert_eq!(p.sim.hyperparams.noise_vars, vec![0.1]);
            assert_eq!(p.sim.hyperparams.weights.len(), p.sim.kinds.len());
        }
        assert!(preset("nope").is_err());
        let p = preset("paper-5.2").unwrap();
        assert_eq!(p.fit.inducing_counts, vec![10]);
        assert_eq!(p.mask_count, 4);
    }

    #[test]
    fn mean_sd() {
        let s = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-15);
        assert!((s.sd - 1.0).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
    }
}
