//! Train-only preprocessing: robust scaling, SMOTETomek balancing,
//! mutual-information ranking, top-k selection and angle scaling.
//!
//! Every fitted statistic is computed from the training fold alone.

mod mutual_info;
mod resample;
mod scale;

pub use mutual_info::{
    discretize, equal_frequency_edges, mi_rank, mi_rank_with_bins, plugin_mi, select_top_k,
    MiRanking, DEFAULT_BINS, ESTIMATOR as MI_ESTIMATOR,
};
pub use resample::{
    nearest_neighbours, smote, smote_interpolate, smote_tomek, tomek_clean, tomek_links,
    BalancedFold, Origin,
};
pub use scale::{
    angle_fit_transform, quantile_sorted, robust_fit_transform, AngleScalerFit, RobustScalerFit,
};
