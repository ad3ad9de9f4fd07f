use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Provenance stamped into output files: the producing tool, its effective
/// configuration and digests of the inputs it read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
}
