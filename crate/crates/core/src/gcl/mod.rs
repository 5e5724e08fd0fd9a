//! Cloud sizes, clouded cosine logits and the GCL loss.

mod cloud;
mod loss;
mod mixup;

pub use cloud::{compute_cloud_sizes, CloudSizeTable, CloudStrategy};
pub use loss::{
    ce_loss, ce_loss_soft, clouded_logits, eval_logits, gcl_loss, gcl_loss_soft, sample_epsilon,
    GclConfig, LossOutput,
};
pub use mixup::{mix_with, mixup_batch, one_hot, MixedBatch};
