//! Signed manifests for machine-learning objects: canonical serialization,
//! data binding, containers, provenance tracking and a transparency log.

pub mod binding;
pub mod codec;
pub mod container;
pub mod crypto;
pub mod ledger;
pub mod manifest;
pub mod merkle;
pub mod provenance;
pub mod timestamp;
