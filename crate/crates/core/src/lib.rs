//! Few-shot class-incremental learning on feature vectors.
//!
//! Base training aligns the visual class-similarity structure with a semantic
//! one over a top-K class graph; incremental sessions fine-tune only the
//! classifier, pulling novel rows toward semantic subspace anchors and holding
//! old rows near their end-of-session values.

pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod model;
pub mod numkit;
pub mod pipeline;
pub mod protocol;
pub mod semantic;
mod textfmt;
pub mod trainer;

pub use error::{FscilError, Result};
