use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, TaskKind};
use crate::error::{Error, Result};
use crate::kernel::InducingGrid;
use crate::special::digamma;

/// Gaussian posterior over the inducing values of every task, stacked in
/// global task order (block `i` holds rows `i*M .. (i+1)*M`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl LatentPosterior {
    /// The prior `N(0, K_mm)`.
    pub fn prior(grid: &InducingGrid) -> Self {
        let n = grid.len() * grid.num_tasks();
        LatentPosterior {
            mean: DVector::zeros(n),
            cov: grid.k_mm_jittered(),
        }
    }

    pub fn task_mean(&self, task: usize, m: usize) -> DVector<f64> {
        self.mean.rows(task * m, m).into_owned()
    }

    pub fn task_cov(&self, task: usize, m: usize) -> DMatrix<f64> {
        self.cov.view((task * m, task * m), (m, m)).into_owned()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.mean.len();
        if self.cov.nrows() != n || self.cov.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.cov.nrows(),
            });
        }
        let asym = (&self.cov - self.cov.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + self.cov.abs().max()) {
            return Err(Error::InvalidArgument(format!(
                "posterior covariance is not symmetric (max deviation {asym:e})"
            )));
        }
        Ok(())
    }
}

/// `q(λ̄_i) = Gamma(alpha, beta)` (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaPosterior {
    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    /// `E[log λ̄] = ψ(alpha) - ln(beta)`.
    pub fn expected_log(&self) -> Result<f64> {
        Ok(digamma(self.alpha)? - self.beta.ln())
    }

    /// `exp(E[log λ̄])`, the bound entering the marked-Poisson intensity.
    pub fn geometric_mean(&self) -> Result<f64> {
        Ok(self.expected_log()?.exp())
    }
}

/// Pólya-Gamma posteriors `PG(1, c_n)` at a set of sites. Only `c_n` (the
/// root second moment of the latent function) and the mean are kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PgSites {
    pub tilde_g: Vec<f64>,
    pub omega_mean: Vec<f64>,
}

/// Marked-Poisson intensity of one Cox task on the quadrature nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoxCache {
    /// `exp(E[log λ̄])` used for the intensity below.
    pub lambda_geo: f64,
    /// ω-marginal of the intensity at each node.
    pub intensity: Vec<f64>,
    /// First ω-moment of the intensity at each node.
    pub omega_intensity: Vec<f64>,
    /// Integral of `intensity` over the domain.
    pub r: f64,
}

/// Augmentation posteriors for every classification and Cox task, indexed
/// by position within the task type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentationCache {
    pub classification: Vec<PgSites>,
    pub events: Vec<PgSites>,
    pub intensity: Vec<CoxCache>,
}

/// Everything needed to evaluate posterior functions after a fit.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub grid: InducingGrid,
    pub latent: LatentPosterior,
    /// One per point-process task.
    pub gamma: Vec<GammaPosterior>,
    pub kinds: Vec<TaskKind>,
}

impl FittedModel {
    pub fn domain(&self) -> &Domain {
        self.grid.domain()
    }

    pub fn num_tasks(&self) -> usize {
        self.kinds.len()
    }

    /// Gamma posterior of global task `i`, which must be a Cox task.
    pub fn gamma_for_task(&self, task: usize) -> Option<&GammaPosterior> {
        let offset = self
            .kinds
            .iter()
            .position(|k| *k == TaskKind::PointProcess)?;
        if task >= offset && self.kinds.get(task) == Some(&TaskKind::PointProcess) {
            self.gamma.get(task - offset)
        } else {
            None
        }
    }

    /// Index of the regression noise variance for global task `i`.
    pub fn noise_var(&self, task: usize) -> Option<f64> {
        match self.kinds.get(task) {
            Some(TaskKind::Regression) => self.grid.hyperparams().noise_vars.get(task).copied(),
            _ => None,
        }
    }
}
