//! Synthetic non-stationary data streams in which known classes drift and
//! unknown classes emerge abruptly, together with unsupervised drift
//! detectors and an incremental open-set recognition baseline to evaluate on
//! them.

pub mod config;
pub mod detect;
pub mod error;
pub mod events;
pub mod generator;
pub mod io;
pub mod metrics;
pub mod osr;
pub mod plot;
pub mod preset;
pub mod seed;
pub mod stream;

pub use config::{ConfigError, GeneratorConfig};
pub use error::{Error, Result};
pub use events::GroundTruth;
pub use generator::StaticGenerator;
pub use seed::SeedTree;
pub use stream::{generate_stream, Chunk, StreamDataset};
