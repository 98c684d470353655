//! Ingestion boundary for the ceckd reasoner: CSV / JSON physiological
//! records, a synthetic stream bootstrapper, an append-only narrative log and
//! the HTTP API for rule deployment, event push, replay and alert retrieval.

pub mod bootstrap;
pub mod config;
pub mod http;
pub mod log;
pub mod record;
pub mod service;

pub use bootstrap::{bootstrap, synthetic_seeds, synthetic_stream, BootstrapError};
pub use config::Config;
pub use record::{parse_csv, to_csv, ParseError, PatientStream, SignalRecord};
pub use service::{Service, ServiceError};
