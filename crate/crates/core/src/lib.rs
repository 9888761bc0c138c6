pub mod act;
pub mod agent;
pub mod db;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod hcenlu;
pub mod metrics;
pub mod nlg;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod scalar;
pub mod schema;
pub mod sim;
pub mod state;
pub mod tensor;
pub mod text;
pub mod toy;

pub use agent::DialogueSystem;
pub use hcenlu::{HcenluModel, NluPipeline};

/// The concrete model used by the CLI and service.
pub type Model = HcenluModel<f64>;
pub type Pipeline = NluPipeline<f64>;
