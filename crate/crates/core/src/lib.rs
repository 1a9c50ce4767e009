//! MLP-based simplicial node classifier trained with a higher-order
//! neighborhood contrastive loss, together with a message-passing baseline
//! and the experiment harnesses around both.
//!
//! Structure is only consumed at training time by the contrastive terms;
//! node inference reads vertex features alone.

pub mod autodiff;
pub mod cli;
pub mod cochain;
pub mod complex;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod honc;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod sparse;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{Matrix, Real};
