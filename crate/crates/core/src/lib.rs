//! Heterogeneous multi-task Gaussian Cox processes.
//!
//! Regression, binary classification and Cox point-process tasks on a shared
//! domain are coupled through a linear-model-of-coregionalization GP prior and
//! fit jointly by Pólya-Gamma augmented mean-field coordinate ascent over a
//! set of inducing points.

pub mod checkpoint;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod hyperopt;
pub mod inference;
pub mod kernel;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod special;

pub use domain::{
    apply_mask, load_dataset, random_masks, save_dataset, ClassificationTask, Domain,
    HeterogeneousDataset, MaskBox, MaskSpec, PointProcessTask, RegressionTask, TaskKind,
};
pub use error::{Error, Result};
pub use inference::{fit, FitConfig, FitReport, FittedModel};
pub use kernel::{build_inducing_grid, InducingGrid, JitterPolicy, LmcHyperparams, RbfParams};
