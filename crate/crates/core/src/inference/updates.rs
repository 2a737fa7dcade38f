use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::domain::{HeterogeneousDataset, TaskRef};
use crate::error::{Error, Result};
use crate::kernel::{cholesky_with_jitter, InducingGrid, JitterPolicy};
use crate::quadrature::QuadratureRule;
use crate::special::{pg_mean_unit, sigmoid};

use super::predictive::{Moments, Projection};
use super::state::{AugmentationCache, CoxCache, GammaPosterior, LatentPosterior, PgSites};

/// Smallest Gamma shape kept for a Cox task with no events and no mass.
const ALPHA_FLOOR: f64 = 1e-3;

/// Projections of every task's data (and, for Cox tasks, of the quadrature
/// nodes) onto the current grid.
#[derive(Debug, Clone)]
pub struct SweepInputs<'a> {
    pub dataset: &'a HeterogeneousDataset,
    pub rule: &'a QuadratureRule,
    pub data: Vec<Projection>,
    pub nodes: Vec<Option<Projection>>,
}

impl<'a> SweepInputs<'a> {
    pub fn new(
        grid: &InducingGrid,
        dataset: &'a HeterogeneousDataset,
        rule: &'a QuadratureRule,
    ) -> Self {
        let tasks = dataset.num_tasks();
        let data = (0..tasks)
            .map(|i| Projection::new(grid, i, dataset.task(i).inputs()))
            .collect();
        let nodes = (0..tasks)
            .map(|i| match dataset.task(i) {
                TaskRef::PointProcess(_) => Some(Projection::new(grid, i, &rule.nodes)),
                _ => None,
            })
            .collect();
        SweepInputs {
            dataset,
            rule,
            data,
            nodes,
        }
    }

    pub fn data_moments(&self, latent: &LatentPosterior) -> Vec<Moments> {
        self.data.iter().map(|p| p.moments(latent)).collect()
    }

    pub fn node_moments(&self, latent: &LatentPosterior) -> Vec<Option<Moments>> {
        self.nodes
            .iter()
            .map(|p| p.as_ref().map(|p| p.moments(latent)))
            .collect()
    }
}

fn pg_sites(moments: &Moments) -> PgSites {
    let tilde_g = moments.tilde();
    let omega_mean = tilde_g.iter().map(|&c| pg_mean_unit(c)).collect();
    PgSites {
        tilde_g,
        omega_mean,
    }
}

/// `q(ω^c_{i,n}) = PG(1, g̃^c_{i,n})` for every classification sample.
/// `moments` holds the predictive moments at each task's inputs, indexed by
/// global task.
pub fn update_pg_classification(
    dataset: &HeterogeneousDataset,
    moments: &[Moments],
) -> Vec<PgSites> {
    let offset = dataset.regression.len();
    (0..dataset.classification.len())
        .map(|k| pg_sites(&moments[offset + k]))
        .collect()
}

/// `q(ω^p_{i,n}) = PG(1, g̃^p_{i,n})` at every Cox event.
pub fn update_pg_pointprocess(dataset: &HeterogeneousDataset, moments: &[Moments]) -> Vec<PgSites> {
    let offset = dataset.point_process_offset();
    (0..dataset.point_process.len())
        .map(|k| pg_sites(&moments[offset + k]))
        .collect()
}

/// Marked-Poisson intensity `λ̄¹ s(-g̃) PG(ω | 1, g̃) e^{(g̃ - ḡ)/2}` of each Cox
/// task, reduced to its ω-marginal and first ω-moment at the quadrature
/// nodes, together with its integral `R_i`.
///
/// `node_moments` holds the predictive moments at the nodes, one entry per
/// Cox task.
pub fn update_poisson_intensity(
    gamma: &[GammaPosterior],
    node_moments: &[&Moments],
    rule: &QuadratureRule,
) -> Result<Vec<CoxCache>> {
    gamma
        .iter()
        .zip(node_moments)
        .enumerate()
        .map(|(k, (g, mo))| {
            let lambda_geo = g.geometric_mean()?;
            let mut intensity = Vec::with_capacity(mo.len());
            let mut omega_intensity = Vec::with_capacity(mo.len());
            for (&mean, &var) in mo.mean.iter().zip(&mo.var) {
                let tilde = (mean * mean + var).sqrt();
                let lam = lambda_geo * sigmoid(-tilde) * (0.5 * (tilde - mean)).exp();
                if !lam.is_finite() {
                    return Err(Error::Diverged {
                        sweep: 0,
                        reason: format!("non-finite marked-Poisson intensity in Cox task {k}"),
                        last: None,
                    });
                }
                intensity.push(lam);
                omega_intensity.push(lam * pg_mean_unit(tilde));
            }
            let r = rule.integrate_values(&intensity);
            Ok(CoxCache {
                lambda_geo,
                intensity,
                omega_intensity,
                r,
            })
        })
        .collect()
}

/// `q(λ̄_i) = Gamma(N_i + R_i, |X|)`.
pub fn update_lambda_bar(dataset: &HeterogeneousDataset, r: &[f64]) -> Result<Vec<GammaPosterior>> {
    if r.len() != dataset.point_process.len() {
        return Err(Error::Dimension {
            expected: dataset.point_process.len(),
            got: r.len(),
        });
    }
    let volume = dataset.domain.volume();
    dataset
        .point_process
        .iter()
        .zip(r)
        .enumerate()
        .map(|(k, (task, &r))| {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "Cox task {k}: intensity integral must be finite and non-negative, got {r}"
                )));
            }
            let mut alpha = task.events.len() as f64 + r;
            if alpha < ALPHA_FLOOR {
                warn!("Cox task {k} has no events and vanishing intensity; flooring Gamma shape at {ALPHA_FLOOR}");
                alpha = ALPHA_FLOOR;
            }
            Ok(GammaPosterior { alpha, beta: volume })
        })
        .collect()
}

/// `A diag(d) Aᵀ` for non-negative `d`.
fn weighted_gram(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(d) {
        col *= w.max(0.0).sqrt();
    }
    &scaled * scaled.transpose()
}

/// Per-task natural parameters `(H_i, v_i)` of the Gaussian likelihood
/// surrogate on the inducing values.
fn natural_terms(
    inputs: &SweepInputs<'_>,
    grid: &InducingGrid,
    cache: &AugmentationCache,
) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let ds = inputs.dataset;
    let nr = ds.regression.len();
    let offset = ds.point_process_offset();
    let m = grid.len();
    (0..ds.num_tasks())
        .map(|i| {
            let a = &inputs.data[i].a;
            match ds.task(i) {
                TaskRef::Regression(t) => {
                    let prec = 1.0 / grid.hyperparams().noise_vars[i];
                    let h = (a * a.transpose()) * prec;
                    let y = DVector::from_column_slice(&t.outputs);
                    (h, (a * y) * prec)
                }
                TaskRef::Classification(t) => {
                    let sites = &cache.classification[i - nr];
                    let h = weighted_gram(a, &sites.omega_mean);
                    let y =
                        DVector::from_iterator(t.labels.len(), t.labels.iter().map(|y| 0.5 * y));
                    (h, a * y)
                }
                TaskRef::PointProcess(_) => {
                    let k = i - offset;
                    let sites = &cache.events[k];
                    let cox = &cache.intensity[k];
                    let nodes = inputs.nodes[i]
                        .as_ref()
                        .expect("Cox task has node projection");
                    let w = &inputs.rule.weights;
                    let node_omega: Vec<f64> = cox
                        .omega_intensity
                        .iter()
                        .zip(w)
                        .map(|(o, w)| o * w)
                        .collect();
                    let mut h = weighted_gram(a, &sites.omega_mean);
                    h += weighted_gram(&nodes.a, &node_omega);
                    let mut v = DVector::zeros(m);
                    for col in a.column_iter() {
                        v += col * 0.5;
                    }
                    let node_mass = DVector::from_iterator(
                        w.len(),
                        cox.intensity.iter().zip(w).map(|(l, w)| -0.5 * l * w),
                    );
                    v += &nodes.a * node_mass;
                    (h, v)
                }
            }
        })
        .collect()
}

/// Gaussian posterior over the inducing values,
/// `Σ = [blockdiag(H) + K^{-1}]^{-1}`, `m = Σ v`.
///
/// Evaluated as `Σ = L (I + Lᵀ H L)^{-1} Lᵀ` with `K = L Lᵀ`, which stays
/// well-conditioned when `K` is rank-deficient.
pub fn update_latent(
    inputs: &SweepInputs<'_>,
    grid: &InducingGrid,
    cache: &AugmentationCache,
) -> Result<LatentPosterior> {
    let m = grid.len();
    let n = m * grid.num_tasks();
    let terms = natural_terms(inputs, grid, cache);
    let l = grid.chol().l();
    let mut lt_h_l = DMatrix::<f64>::zeros(n, n);
    let mut v = DVector::<f64>::zeros(n);
    for (i, (h, vi)) in terms.iter().enumerate() {
        let li = l.rows(i * m, m);
        let hl = h * li;
        lt_h_l += li.transpose() * hl;
        v.rows_mut(i * m, m).copy_from(vi);
    }
    let lt_h_l = (&lt_h_l + lt_h_l.transpose()) * 0.5;
    let b = DMatrix::<f64>::identity(n, n) + lt_h_l;
    let (chol_b, _) = cholesky_with_jitter(&b, &JitterPolicy::starting_at(0.0))?;
    let c = chol_b
        .l()
        .solve_lower_triangular(&l.transpose())
        .ok_or(Error::Cholesky { jitter: 0.0 })?;
    let cov = c.tr_mul(&c);
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = c.tr_mul(&(&c * v));
    Ok(LatentPosterior { mean, cov })
}
