//! Topology-aware comparison of vessel segmentations and morphological
//! closing losses.

pub mod components;
pub mod distance;
pub mod error;
pub mod io;
pub mod loss;
pub mod mask;
pub mod morph;
pub mod metrics;
pub mod pathfind;
pub mod sampling;
pub mod similarity;
pub mod skeleton;
pub mod synth;
mod tape;

pub use components::connected_components;
pub use distance::distance_transform;
pub use error::{Error, Result};
pub use io::{load_mask, load_probmap, save_heatmap};
pub use mask::{BinaryMask, DistanceField, Grid, LabeledMask, Pixel, ProbMap, RealGrid};
pub use pathfind::{
    build_cost_field, min_cost_path, visit_frequency_map, CostField, FrequencyMode, PathStrategy,
    PathTrace,
};
pub use sampling::{sample_pair, PairSampler};
pub use skeleton::skeletonize;
pub use similarity::{exact_similarity, f_feasible, f_hamming, mc_similarity, CoherenceFn, SimilarityResult};
pub use metrics::{auc, cl_dice, pixel_metrics, PixelMetricReport};
pub use morph::{closing, dilate1, erode1, soft_skeleton, SoftMap};
pub use loss::{
    error_map, gradient_check, loss, loss_bce, loss_cldice, loss_clbce, loss_dice, loss_propbce,
    loss_propdice, loss_topo, loss_tprec, loss_tsens, GradientCheck, LossKind, LossParams, LossValue,
    WeightSchedule,
};
