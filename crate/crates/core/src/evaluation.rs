//! Estimation error and test log-likelihood.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::{HeterogeneousDataset, MaskBox, TaskKind, TaskRef};
use crate::error::{Error, Result};
use crate::inference::{posterior_functions, FittedModel, GammaPosterior, Moments, Projection};
use crate::kernel::LmcHyperparams;
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::simulate::GroundTruth;
use crate::special::{log_sigmoid, sigmoid};

/// Region over which the Cox intensity integral of the test log-likelihood
/// is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TllRegion {
    FullDomain,
    Mask(MaskBox),
}

/// Root mean squared difference.
pub fn estimation_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument(
            "estimation error over an empty grid".into(),
        ));
    }
    let sq: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / truth.len() as f64).sqrt())
}

/// EE of task `task`'s reported function on the ground-truth grid.
pub fn task_estimation_error(model: &FittedModel, truth: &GroundTruth, task: usize) -> Result<f64> {
    let expected = truth.functions.get(task).ok_or(Error::TaskIndex {
        index: task,
        count: truth.functions.len(),
    })?;
    let estimate: Vec<f64> = posterior_functions(model, task, &truth.grid)?
        .iter()
        .map(|s| s.value)
        .collect();
    estimation_error(&estimate, expected)
}

fn regression_loglik(y: &[f64], mean: &[f64], noise_var: f64) -> f64 {
    y.iter()
        .zip(mean)
        .map(|(y, m)| -0.5 * (2.0 * PI * noise_var).ln() - (y - m) * (y - m) / (2.0 * noise_var))
        .sum()
}

fn classification_loglik(labels: &[f64], mean: &[f64]) -> f64 {
    labels
        .iter()
        .zip(mean)
        .map(|(y, m)| log_sigmoid(y * m))
        .sum()
}

fn cox_loglik(lambda: f64, event_mean: &[f64], node_mean: &[f64], rule: &QuadratureRule) -> f64 {
    let events: f64 = event_mean
        .iter()
        .map(|m| lambda.ln() + log_sigmoid(*m))
        .sum();
    let intensity: Vec<f64> = node_mean.iter().map(|m| lambda * sigmoid(*m)).collect();
    events - rule.integrate_values(&intensity)
}

/// Plug-in log-likelihood of the training data under the posterior mean,
/// with Cox integrals over the whole domain. `data` holds moments at every
/// task's inputs (global order), `nodes` the moments at the quadrature nodes
/// for each Cox task.
pub(crate) fn training_loglik(
    dataset: &HeterogeneousDataset,
    hyp: &LmcHyperparams,
    gamma: &[GammaPosterior],
    data: &[Moments],
    nodes: &[&Moments],
    rule: &QuadratureRule,
) -> f64 {
    let offset = dataset.point_process_offset();
    (0..dataset.num_tasks())
        .map(|i| match dataset.task(i) {
            TaskRef::Regression(t) => {
                regression_loglik(&t.outputs, &data[i].mean, hyp.noise_vars[i])
            }
            TaskRef::Classification(t) => classification_loglik(&t.labels, &data[i].mean),
            TaskRef::PointProcess(_) => {
                let k = i - offset;
                cox_loglik(gamma[k].mean(), &data[i].mean, &nodes[k].mean, rule)
            }
        })
        .sum()
}

/// Test log-likelihood of task `task` using the posterior mean.
///
/// Regression and classification tasks need at least one test record. A Cox
/// task with no test events scores 0 with a warning.
pub fn test_loglik(
    model: &FittedModel,
    test: &HeterogeneousDataset,
    task: usize,
    region: &TllRegion,
    quadrature_counts: &[usize],
) -> Result<f64> {
    let data = test.get(task)?;
    if model.kinds.get(task) != Some(&data.kind()) {
        return Err(Error::InvalidArgument(format!(
            "task {task} of the test set does not match the fitted model"
        )));
    }
    let mean = |xs: &[Vec<f64>]| {
        Projection::new(&model.grid, task, xs)
            .moments(&model.latent)
            .mean
    };
    match data {
        TaskRef::Regression(t) => {
            if t.outputs.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "regression task {task} has no test data"
                )));
            }
            let noise = model
                .noise_var(task)
                .expect("regression task has a noise variance");
            Ok(regression_loglik(&t.outputs, &mean(&t.inputs), noise))
        }
        TaskRef::Classification(t) => {
            if t.labels.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "classification task {task} has no test data"
                )));
            }
            Ok(classification_loglik(&t.labels, &mean(&t.inputs)))
        }
        TaskRef::PointProcess(t) => {
            if t.events.is_empty() {
                warn!("Cox task {task} has no test events; its test log-likelihood is 0");
                return Ok(0.0);
            }
            let lambda = model
                .gamma_for_task(task)
                .expect("Cox task has a Gamma posterior")
                .mean();
            let rule = match region {
                TllRegion::FullDomain => gauss_legendre(model.domain(), quadrature_counts)?,
                TllRegion::Mask(b) => gauss_legendre(&b.as_domain()?, quadrature_counts)?,
            };
            Ok(cox_loglik(
                lambda,
                &mean(&t.events),
                &mean(&rule.nodes),
                &rule,
            ))
        }
    }
}

/// Metrics of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: usize,
    #[serde(rename = "type")]
    pub kind: TaskKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ee: Option<f64>,
    pub tll: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// EE (when ground truth is given) and TLL for every task. `regions` gives
/// each task's Cox integration region.
pub fn evaluate_model(
    model: &FittedModel,
    train: &HeterogeneousDataset,
    test: &HeterogeneousDataset,
    truth: Option<&GroundTruth>,
    regions: &[TllRegion],
    quadrature_counts: &[usize],
) -> Result<Vec<TaskMetrics>> {
    if regions.len() != test.num_tasks() {
        return Err(Error::Dimension {
            expected: test.num_tasks(),
            got: regions.len(),
        });
    }
    (0..test.num_tasks())
        .map(|i| {
            let ee = truth
                .map(|t| task_estimation_error(model, t, i))
                .transpose()?;
            let tll = test_loglik(model, test, i, &regions[i], quadrature_counts)?;
            Ok(TaskMetrics {
                task: i,
                kind: test.task(i).kind(),
                ee,
                tll,
                n_train: train.get(i).map(|t| t.len()).unwrap_or(0),
                n_test: test.task(i).len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ClassificationTask, Domain, PointProcessTask, RegressionTask};
    use crate::inference::LatentPosterior;
    use crate::kernel::{build_inducing_grid, JitterPolicy, RbfParams};

    fn prior_model(kinds: &[TaskKind], gamma: Vec<GammaPosterior>) -> FittedModel {
        let n = kinds.len();
        let regression = kinds.iter().filter(|k| **k == TaskKind::Regression).count();
        let hyp = LmcHyperparams::new(
            vec![RbfParams::new(1.0, 0.01).unwrap()],
            vec![vec![1.0]; n],
            vec![1.0; regression],
        )
        .unwrap();
        let grid = build_inducing_grid(
            &Domain::interval(0.0, 10.0).unwrap(),
            &[6],
            &hyp,
            &JitterPolicy::default(),
        )
        .unwrap();
        let mut latent = LatentPosterior::prior(&grid);
        latent.mean.fill(0.0);
        FittedModel {
            grid,
            latent,
            gamma,
            kinds: kinds.to_vec(),
        }
    }

    #[test]
    fn ee_basics() {
        assert_eq!(estimation_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let truth = [0.3, -1.0, 2.5, 4.0];
        let shifted: Vec<f64> = truth.iter().map(|t| t + 0.7).collect();
        assert!((estimation_error(&shifted, &truth).unwrap() - 0.7).abs() < 1e-12);
        assert!(estimation_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ee_permutation_invariant() {
        let a = [0.1, 0.5, 0.9, 1.3];
        let b = [0.0, 0.7, 1.0, 1.0];
        let pa = [a[2], a[0], a[3], a[1]];
        let pb = [b[2], b[0], b[3], b[1]];
        let d = estimation_error(&a, &b).unwrap() - estimation_error(&pa, &pb).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn tll_zero_mean_classification() {
        let model = prior_model(&[TaskKind::Classification], vec![]);
        let test = HeterogeneousDataset::new(
            model.domain().clone(),
            vec![],
            vec![ClassificationTask {
                inputs: vec![vec![1.0], vec![4.0], vec![9.0]],
                labels: vec![1.0, -1.0, 1.0],
            }],
            vec![],
        )
        .unwrap();
        let tll = test_loglik(&model, &test, 0, &TllRegion::FullDomain, &[50]).unwrap();
        assert!((tll - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tll_regression_at_mean() {
        let model = prior_model(&[TaskKind::Regression], vec![]);
        let test = HeterogeneousDataset::new(
            model.domain().clone(),
            vec![RegressionTask {
                inputs: vec![vec![2.0], vec![3.0]],
                outputs: vec![0.0, 0.0],
            }],
            vec![],
            vec![],
        )
        .unwrap();
        let tll = test_loglik(&model, &test, 0, &TllRegion::FullDomain, &[50]).unwrap();
        assert!((tll + 2.0 * (2.0 * PI).sqrt().ln()).abs() < 1e-12);

        let empty = test.emptied();
        assert!(test_loglik(&model, &empty, 0, &TllRegion::FullDomain, &[50]).is_err());
    }

    #[test]
    fn tll_cox_homogeneous() {
        // ḡ = 0 gives intensity E[λ̄]/2 = c
        let c = 0.3;
        let model = prior_model(
            &[TaskKind::PointProcess],
            vec![GammaPosterior {
                alpha: 2.0 * c * 10.0,
                beta: 10.0,
            }],
        );
        let events = vec![vec![2.0], vec![2.5], vec![3.5]];
        let test = HeterogeneousDataset::new(
            model.domain().clone(),
            vec![],
            vec![],
            vec![PointProcessTask { events }],
        )
        .unwrap();
        let region = TllRegion::Mask(MaskBox {
            lower: vec![2.0],
            upper: vec![4.0],
        });
        let tll = test_loglik(&model, &test, 0, &region, &[20]).unwrap();
        assert!((tll - (3.0 * c.ln() - c * 2.0)).abs() < 1e-10);

        let full = test_loglik(&model, &test, 0, &TllRegion::FullDomain, &[20]).unwrap();
        assert!((full - (3.0 * c.ln() - c * 10.0)).abs() < 1e-10);

        let none = test_loglik(&model, &test.emptied(), 0, &TllRegion::FullDomain, &[20]).unwrap();
        assert_eq!(none, 0.0);
    }

    #[test]
    fn cox_tll_peaks_at_empirical_rate() {
        // 4 events in [2, 4]; with ḡ = 0 the intensity is E[λ̄] / 2
        let events: Vec<Vec<f64>> = [2.1, 2.6, 3.0, 3.8].iter().map(|&x| vec![x]).collect();
        let region = TllRegion::Mask(MaskBox {
            lower: vec![2.0],
            upper: vec![4.0],
        });
        let tll = |c: f64| {
            let model = prior_model(
                &[TaskKind::PointProcess],
                vec![GammaPosterior {
                    alpha: 2.0 * c * 10.0,
                    beta: 10.0,
                }],
            );
            let test = HeterogeneousDataset::new(
                model.domain().clone(),
                vec![],
                vec![],
                vec![PointProcessTask {
                    events: events.clone(),
                }],
            )
            .unwrap();
            test_loglik(&model, &test, 0, &region, &[20]).unwrap()
        };
        let best = tll(2.0);
        for c in [0.2, 0.5, 1.0, 1.5, 2.5, 3.0, 10.0] {
            assert!(tll(c) < best);
        }
    }
}
