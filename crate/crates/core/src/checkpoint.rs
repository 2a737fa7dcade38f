//! JSON checkpoints of fitted models.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, TaskKind};
use crate::error::{Error, Result};
use crate::inference::{FitConfig, FittedModel, GammaPosterior, LatentPosterior};
use crate::kernel::{build_inducing_grid, JitterPolicy, LmcHyperparams};

pub const CHECKPOINT_FORMAT: &str = "hmgcp-ckpt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub domain: Domain,
    pub kinds: Vec<TaskKind>,
    pub hyperparams: LmcHyperparams,
    pub inducing_counts: Vec<usize>,
    pub inducing_points: Vec<Vec<f64>>,
    /// Relative jitter the prior factorization settled on.
    pub jitter_rel: f64,
    pub mean: Vec<f64>,
    /// Row-major.
    pub cov: Vec<f64>,
    pub gamma: Vec<GammaPosterior>,
    pub config: FitConfig,
}

impl Checkpoint {
    pub fn from_model(model: &FittedModel, config: &FitConfig) -> Self {
        let grid = &model.grid;
        let n = model.latent.mean.len();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            domain: grid.domain().clone(),
            kinds: model.kinds.clone(),
            hyperparams: grid.hyperparams().clone(),
            inducing_counts: grid.counts().to_vec(),
            inducing_points: grid.points().to_vec(),
            jitter_rel: grid.jitter_rel(),
            mean: model.latent.mean.iter().copied().collect(),
            cov: (0..n)
                .flat_map(|r| (0..n).map(move |c| (r, c)))
                .map(|(r, c)| model.latent.cov[(r, c)])
                .collect(),
            gamma: model.gamma.clone(),
            config: config.clone(),
        }
    }

    /// Rebuilds the model. The inducing lattice and its factorization are
    /// recomputed from the stored counts and jitter level.
    pub fn into_model(self) -> Result<FittedModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointVersion {
                found: self.format,
                expected: CHECKPOINT_FORMAT.to_string(),
            });
        }
        let grid = build_inducing_grid(
            &self.domain,
            &self.inducing_counts,
            &self.hyperparams,
            &JitterPolicy::starting_at(self.jitter_rel),
        )?;
        if grid.points() != self.inducing_points.as_slice() {
            return Err(Error::InvalidArgument(
                "stored inducing points do not match the stored lattice counts".into(),
            ));
        }
        let n = grid.len() * grid.num_tasks();
        if self.mean.len() != n || self.cov.len() != n * n {
            return Err(Error::Dimension {
                expected: n,
                got: self.mean.len(),
            });
        }
        if self.kinds.len() != grid.num_tasks() {
            return Err(Error::Dimension {
                expected: grid.num_tasks(),
                got: self.kinds.len(),
            });
        }
        let latent = LatentPosterior {
            mean: DVector::from_vec(self.mean),
            cov: DMatrix::from_row_slice(n, n, &self.cov),
        };
        latent.check()?;
        Ok(FittedModel {
            grid,
            latent,
            gamma: self.gamma,
            kinds: self.kinds,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
