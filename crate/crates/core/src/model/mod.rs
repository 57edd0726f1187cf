//! The learner: MLP backbone, linear classifier, and the base-session losses.

mod checkpoint;
mod losses;
mod network;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use losses::{
    loss_base, loss_language_reg, loss_main, BasePhase, BaseSchedule, LanguagePrior, LanguageRegOutput, LossOutput,
    Sample,
};
pub use network::{extend_classifier, forward_logits, Backbone, Classifier, Dense, ForwardCache, Model, CLASSIFIER_PARAM};
