//! Manifest registry: an HTTP service storing signed manifests and anchoring
//! them in a transparency log, plus a blocking client.

pub mod client;
pub mod server;
pub mod store;
pub mod wire;

pub use client::{ClientError, PublishOutcome, RegistryClient};
pub use server::{BackgroundServer, ServerConfig};
pub use store::{Record, Registry};
pub use wire::RemoteRecord;
