//! Dense CRF refinement of externally supplied segmentations: unary
//! handling, the appearance + smoothness kernel, exact Gibbs energy,
//! mean-field inference and parameter grid search.

mod energy;
mod features;
mod gridsearch;
mod inference;
mod kernel;
mod unary;

pub use energy::{gibbs_energy, gibbs_energy_capped, DEFAULT_ENERGY_CAP};
pub use features::{ExtraFeature, FeatureField, PixelFeature};
pub use gridsearch::{
    grid_search_params, score_params, GridScore, GridSearchResult, Instance, ParamGrid,
};
pub use inference::{
    map_labeling, mean_field_infer, mean_field_infer_with, Marginals, MeanFieldOptions,
    MessagePassing, DEFAULT_ITERATIONS, TRUNCATION_SIGMAS,
};
pub use kernel::{pairwise_kernel, CrfParams};
pub use unary::{
    merge_hair_labels, merge_region_labeling, merged_labels, six_class_labels, Labeling,
    UnaryField, BACKGROUND, FACE, HAIR, MERGED_LABELS, PROBABILITY_FLOOR,
};
