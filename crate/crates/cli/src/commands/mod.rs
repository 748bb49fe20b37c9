pub mod container;
pub mod graph;
pub mod keys;
pub mod manifest;
pub mod registry;
pub mod verify;

use chrono::{DateTime, Utc};
use vamp_core::timestamp::{now, parse_utc};

use crate::error::{CliError, CliResult};

pub fn at_time(at: Option<&str>) -> CliResult<DateTime<Utc>> {
    match at {
        None => Ok(now()),
        Some(s) => parse_utc(s).ok_or_else(|| CliError::usage(format!("--at: {s:?} is not YYYY-MM-DDTHH:MM:SSZ"))),
    }
}

pub fn client(global: &crate::Global) -> CliResult<vamp_registry::RegistryClient> {
    global
        .registry
        .as_deref()
        .map(vamp_registry::RegistryClient::new)
        .ok_or_else(|| CliError::usage("no registry configured (use --registry or VAMP_REGISTRY_URL)"))
}
