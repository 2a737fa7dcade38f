//! Mean-field coordinate ascent for the augmented heterogeneous model.
//!
//! One sweep refreshes the Pólya-Gamma posteriors of the classification
//! samples and Cox events, the marked-Poisson intensities on the quadrature
//! nodes, the Gamma posteriors of the intensity bounds and finally the
//! Gaussian posterior over all inducing values. Every update is the exact
//! coordinate optimum given the others.

mod elbo;
mod fit;
mod predictive;
mod state;
mod updates;

pub use elbo::restricted_elbo;
pub use fit::{fit, FitConfig, FitReport, Monitor};
pub use predictive::{
    posterior_bands, posterior_functions, predictive, tilde_g, Band, Moments, PosteriorSummary,
    Projection,
};
pub use state::{
    AugmentationCache, CoxCache, FittedModel, GammaPosterior, LatentPosterior, PgSites,
};
pub use updates::{
    update_lambda_bar, update_latent, update_pg_classification, update_pg_pointprocess,
    update_poisson_intensity, SweepInputs,
};
