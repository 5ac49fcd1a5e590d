//! Data formats, decision-model registry, session store and HTTP service
//! for the OPA family of weighting models.

pub mod api;
pub mod document;
pub mod error;
pub mod models;
mod openapi;
pub mod store;

pub use document::{load_instance, parse_instance, InstanceDocument, ResultDocument};
pub use error::{ErrorClass, Result, Violation, WorkbenchError};
pub use models::{DecisionModel, ModelRegistry, NoSessions, SessionSource, SolveOptions};
pub use store::{SessionFile, SessionStore};
