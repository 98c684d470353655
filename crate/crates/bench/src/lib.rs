//! Benchmarks of the kd-indexed engine against the scan-based baseline on
//! bootstrapped patient streams: update latency, ground and unbound
//! `holds_at` latency, index work, structure size and multi-engine
//! throughput.

pub mod config;
pub mod harness;
pub mod plot;
pub mod report;
pub mod stats;
pub mod workload;

pub use config::{BenchConfig, ConfigError, EngineKind, QueryMix, RuleSet};
pub use harness::{
    run, run_concurrent, verify_prefix, visit_scaling, BenchError, BenchReport, BenchRow,
    ConcurrentReport, ScalingPoint, Summary,
};
pub use stats::Stat;
