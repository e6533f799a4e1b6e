//! Pluggable admissibility predicate for Hadamard-round answers.
//!
//! The protocol only needs *some* efficiently checkable set of acceptable
//! measurement strings `d`; which strings are informative is a property of
//! the underlying hardness assumption, not of the interaction. The default
//! admits everything. `RejectZero` models the one string that is never
//! informative — the all-zero mask decodes to 0 for any claw — and exercises
//! the verifier's reject-and-flip-a-coin branch.

use serde::{Deserialize, Serialize};

/// Which Hadamard-round answer strings the verifier treats as valid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GSetPolicy {
    /// Every `d` is admissible.
    #[default]
    AllowAll,
    /// Every `d` except the all-zero string.
    RejectZero,
}

impl GSetPolicy {
    /// Whether the packed answer string `d` is admissible.
    pub fn admits(&self, d: u64) -> bool {
        match self {
            GSetPolicy::AllowAll => true,
            GSetPolicy::RejectZero => d != 0,
        }
    }
}
