//! Run manifest embedded in every output envelope: what ran, on which
//! inputs (by digest), under which tolerances and seed, and how long it
//! took. Reruns with equal inputs produce identical envelopes except for
//! the wall time field.

use crate::GlobalArgs;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToleranceSet {
    pub coeff: f64,
    pub int: f64,
    pub ode: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 digest of each input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub tolerances: ToleranceSet,
    pub seed: u64,
    pub versions: Versions,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        inputs: BTreeMap<String, String>,
        global: &GlobalArgs,
        wall_time_s: f64,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs,
            tolerances: ToleranceSet {
                coeff: global.tol_coeff,
                int: global.tol_int,
                ode: global.tol_ode,
            },
            seed: global.seed,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION").to_string(),
                core: holorealize_core::VERSION.to_string(),
            },
            wall_time_s,
        }
    }
}

/// Lowercase hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
