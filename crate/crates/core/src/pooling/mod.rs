//! Sample pooling: importance sampling for single-degree nodes and permuted
//! sample reuse for first-order isomorphic nodes.

pub mod importance;
pub mod iso;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use importance::{
    is_pvalue_single_degree, likelihood_ratio, matching_path, surjective_is_estimate, MappedSample,
};
pub use iso::{
    find_isomorphic_pairs, find_permutation, isomorphic_groups, passes_screens, permute_path,
    GroupMember, IsoGroup, IsoPair, Permutation, Satellite,
};

/// Which accelerations a confidence-set computation may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    None,
    Iso,
    Is,
    Both,
}

impl Pooling {
    pub const ALL: [Pooling; 4] = [Pooling::None, Pooling::Iso, Pooling::Is, Pooling::Both];

    pub fn uses_isomorphism(self) -> bool {
        matches!(self, Pooling::Iso | Pooling::Both)
    }

    pub fn uses_importance(self) -> bool {
        matches!(self, Pooling::Is | Pooling::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Pooling::None => "none",
            Pooling::Iso => "iso",
            Pooling::Is => "is",
            Pooling::Both => "both",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Pooling::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown pooling mode {s:?} (expected none, iso, is or both)"
                ))
            })
    }
}
