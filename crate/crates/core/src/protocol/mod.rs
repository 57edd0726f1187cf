//! Session machinery: datasets, N-way K-shot session streams, the one-exemplar
//! memory, and the synthetic dataset generator.

mod dataset;
mod memory;
mod stream;
mod synthetic;

pub use dataset::LabeledDataset;
pub use memory::{sample_memory, MemoryBuffer};
pub use stream::{build_session_stream, Session, SessionStream, StreamConfig, BASE_QUERY_FRACTION};
pub use synthetic::{class_label, generate_synthetic_dataset, synthetic_embeddings, synthetic_prototypes, SyntheticConfig};
