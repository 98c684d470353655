use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Flat-vector cached baseline.
    Naive,
    /// Kd-indexed engine.
    Ceckd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMix {
    /// `holds_at(obs(cgm)=value(V), now)` with `V` the current reading.
    GroundHoldsAt,
    /// `holds_at(F=V, now)` with both sides unbound.
    UnboundHoldsAt,
}

/// Theory the narrative is run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSet {
    /// Signal fluents only: every reading closes the previous interval of its
    /// signal and opens a new one.
    Observations,
    /// Signal fluents plus the two clinical alert rules, with alert feedback.
    Clinical,
}

impl RuleSet {
    pub fn name(self) -> &'static str {
        match self {
            RuleSet::Observations => "observations",
            RuleSet::Clinical => "clinical",
        }
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "observations" => Ok(RuleSet::Observations),
            "clinical" => Ok(RuleSet::Clinical),
            _ => Err(format!("unknown rule set {s:?} (observations, clinical)")),
        }
    }
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::Ceckd => "ceckd",
        }
    }
}

impl QueryMix {
    pub fn name(self) -> &'static str {
        match self {
            QueryMix::GroundHoldsAt => "ground_holds_at",
            QueryMix::UnboundHoldsAt => "unbound_holds_at",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for QueryMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive" => Ok(EngineKind::Naive),
            "ceckd" => Ok(EngineKind::Ceckd),
            _ => Err(format!("unknown engine {s:?} (naive, ceckd)")),
        }
    }
}

impl FromStr for QueryMix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground_holds_at" | "ground" => Ok(QueryMix::GroundHoldsAt),
            "unbound_holds_at" | "unbound" => Ok(QueryMix::UnboundHoldsAt),
            _ => Err(format!("unknown query mix {s:?} (ground_holds_at, unbound_holds_at)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub engine: EngineKind,
    pub events: usize,
    pub repeats: usize,
    pub threads: usize,
    pub query_mix: QueryMix,
    pub rules: RuleSet,
    pub rng_seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            engine: EngineKind::Ceckd,
            events: 10_000,
            repeats: 50,
            threads: 1,
            query_mix: QueryMix::GroundHoldsAt,
            rules: RuleSet::Observations,
            rng_seed: 42,
            output: None,
        }
    }
}

pub const MIN_EVENTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("events must be at least {MIN_EVENTS}, got {0}")]
    TooFewEvents(usize),
    #[error("threads must be at least 1")]
    NoThreads,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.repeats == 0 {
            return Err(ConfigError::NoRepeats);
        }
        if self.events < MIN_EVENTS {
            return Err(ConfigError::TooFewEvents(self.events));
        }
        if self.threads == 0 {
            return Err(ConfigError::NoThreads);
        }
        Ok(())
    }
}
