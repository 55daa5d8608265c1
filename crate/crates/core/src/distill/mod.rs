//! Teachers, students and the cross-view distillation pipeline.

mod checkpoint;
mod classifier;
mod config;
mod ensemble;
mod pipeline;
mod stages;
mod train;

pub use checkpoint::{
    load_checkpoint, read_manifest, save_checkpoint, CheckpointManifest, LoadOptions, TensorEntry, FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use classifier::{Classifier, ClassifierVars, Readout};
pub use config::{derive_seed, ExperimentConfig};
pub use ensemble::{average, ensemble_probabilities, predict_ensemble, predict_labels};
pub use pipeline::{prepare, run_branch, student_tag, train_teachers, vid_from_teachers, vid_pipeline, Branch, Prepared, Teachers, VidModels};
pub use stages::{
    argmax, distill_student, finetune, finetune_batch_loss, hard_batch_loss, pseudo_label, teacher_targets,
    train_teacher, transfer_labels, DistillItem, DistillationDataset, SoftLabelSet,
};
pub use train::{batch_loss, batch_loss_var, run_epochs, Example, LossWeights, Trainable};
