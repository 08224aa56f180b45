pub mod bounds;
pub mod compose;
pub mod error;
pub mod mechanism;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
pub use privacy::PrivacyParams;
pub mod ledger;
pub mod validators;
pub mod pipelines;
pub mod adaptive;
pub mod simulator;
pub mod config;
pub mod cli;
