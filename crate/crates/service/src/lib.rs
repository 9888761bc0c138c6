//! HTTP chat-session service and command-line tools around the `hceds`
//! dialogue pipeline.

pub mod cli;
pub mod config;
pub mod server;

pub use config::ServiceConfig;
pub use server::{router, AppState};
