//! Loss, optimizer, schedule, augmentation and the training loop.

mod adam;
mod augment;
mod dataset;
mod fit;
mod loss;

pub use adam::{adam_step, lr_lambda, AdamState, ADAM_BETA2, ADAM_EPS};
pub use augment::{
    augment, augment_variants, AugmentConfig, MAX_ATTEMPTS, SCALE_RANGE, SLIDE_FLATNESS, SLIDE_STEP,
};
pub use dataset::{
    list_split, load_split, median_frequency_weights, write_split, LabeledSample, Split,
};
pub use fit::{
    evaluate, feature_stats, train_loop, BestCallback, EpochRecord, Prepared, TrainConfig,
    TrainOptions, TrainOutcome,
};
pub use loss::{
    weighted_cross_entropy, weighted_cross_entropy_grad, weighted_cross_entropy_parts, LossParts,
};
