//! Hierarchical-context NLU: token-level BiLSTMs over the user utterance
//! (UU) and the dialogue context (DC), sentence-level intent and tag
//! BiLSTMs over the UU states, bilinear attention of the intent state over
//! the DC, and two heads (multi-label domain-intent, per-subword BIOX).

pub mod checkpoint;
pub mod context;
pub mod data;
pub mod model;
pub mod pipeline;
pub mod train;

pub use context::{build_context, DialogContextWindow};
pub use data::{examples_from_corpus, read_corpus, write_corpus, AnnotatedDialogue, AnnotatedTurn, TrainingExample};
pub use model::{select_labels, HcenluModel, ModelInput, NluConfig, Targets, TokenFeatures};
pub use pipeline::{decode_acts, predict_tags, NluOutput, NluPipeline};
pub use train::{nlu_component_metrics, score_annotations, train, NluAnnotation, NluScores, TrainConfig, TrainOutcome};
