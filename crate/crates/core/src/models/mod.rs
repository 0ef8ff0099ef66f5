//! Classifier topologies, parameter files and training loops.

pub mod checkpoint;
pub mod spec;
pub mod train;

pub use checkpoint::{Checkpoint, NamedArray, ROLE_CHECKPOINT, ROLE_FROZEN_BACKBONE};
pub use spec::{
    build_custom_cnn, build_desk_backbone, build_head, build_transfer_member, ClassifierSpec, HeadVariant, LayerKind,
    LayerSpec, ModelProfile, ModelSpec,
};
pub use train::{image_tensor, images_tensor, Classifier, EnsembleFoldLearner, History, TrainConfig};
