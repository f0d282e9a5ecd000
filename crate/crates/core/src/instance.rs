//! Instance files.
//!
//! An instance is a JSON document:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "n": 2,
//!   "agents": [
//!     { "model": "additive", "t": 2.0, "w": { "kind": "constant", "value": 3.0 } },
//!     { "model": "graph_concave", "t": 1.0, "beta": 0.5, "curve": "sqrt" }
//!   ],
//!   "adjacency": [[1], [0]],
//!   "declared_L": 1.0
//! }
//! ```
//!
//! Agent models are `table` (`values`: `2^n` entries indexed by set mask, `n ≤ 10`),
//! `additive` (`t`, `w`), `scalar` (`t`, `w`), `linear` (`t`, `w`, `w_prime`) and
//! `graph_concave` (`t`, `beta`, optional `curve` = `sqrt` | `log1p`, requires `adjacency`).
//! Set functions are `{"kind": "table", "values": [...]}`, `{"kind": "modular", "weights":
//! [...]}` (one weight per agent), `{"kind": "count", "coeff": c, "power": p}` and
//! `{"kind": "constant", "value": v}`. Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::valuations::{check_conditions, AgentValuation, CheckMode, ValuationProfile};

pub const SCHEMA_VERSION: u32 = 1;

/// Upper bound on input size accepted by the parsers.
pub const MAX_DOCUMENT_BYTES: usize = 16 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema: u32,
    pub n: usize,
    pub agents: Vec<AgentValuation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<usize>>>,
    #[serde(rename = "declared_L", default, skip_serializing_if = "Option::is_none")]
    pub declared_l: Option<f64>,
}

impl InstanceFile {
    pub fn from_profile(profile: &ValuationProfile) -> Self {
        InstanceFile {
            schema: SCHEMA_VERSION,
            n: profile.n(),
            agents: profile.agent_models().to_vec(),
            adjacency: profile.adjacency(),
            declared_l: profile.declared_l(),
        }
    }

    /// Schema and structure checks only; valuation conditions are not evaluated.
    pub fn into_profile(self) -> Result<ValuationProfile> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: self.schema, expected: SCHEMA_VERSION });
        }
        if self.agents.len() != self.n {
            return Err(Error::InvalidInstance(format!("n = {} but {} agents listed", self.n, self.agents.len())));
        }
        ValuationProfile::new(self.agents, self.adjacency, self.declared_l)
    }
}

/// Parses an instance document without checking the valuation conditions.
pub fn parse_instance(text: &str) -> Result<ValuationProfile> {
    if text.len() > MAX_DOCUMENT_BYTES {
        return Err(Error::InvalidInstance(format!("document exceeds {MAX_DOCUMENT_BYTES} bytes")));
    }
    let file: InstanceFile = serde_json::from_str(text)?;
    file.into_profile()
}

/// Parses an instance and rejects it unless every valuation condition holds: exhaustively
/// for `n ≤ 12`, on the default sampled triples otherwise. Subadditivity is relaxed by the
/// declared `L` when present.
pub fn instance_from_str(text: &str) -> Result<ValuationProfile> {
    let profile = parse_instance(text)?;
    validate(&profile)?;
    Ok(profile)
}

pub fn validate(profile: &ValuationProfile) -> Result<()> {
    let relax = profile.declared_l().unwrap_or(1.0);
    let violations = check_conditions(profile, CheckMode::auto(profile.n()), relax)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::ConditionViolations(violations))
    }
}

pub fn load_instance(path: &Path) -> Result<ValuationProfile> {
    instance_from_str(&read_text(path)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Canonical JSON text of a profile.
pub fn instance_to_string(profile: &ValuationProfile) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_profile(profile)).expect("instance serializes")
}

pub fn save_instance(profile: &ValuationProfile, path: &Path) -> Result<()> {
    let mut text = instance_to_string(profile);
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// SHA-256 of the compact canonical JSON, hex encoded.
pub fn instance_hash(profile: &ValuationProfile) -> String {
    let compact = serde_json::to_string(&InstanceFile::from_profile(profile)).expect("instance serializes");
    hex::encode(Sha256::digest(compact.as_bytes()))
}
