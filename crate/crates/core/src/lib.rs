pub mod elicitation;
pub mod error;
pub mod inconsistency;
pub mod opa;
pub mod pr;
pub mod prs;
pub mod utility;

pub use error::{OpaError, Result};
