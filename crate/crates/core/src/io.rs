//! JSON file formats. Agents and items are 1-indexed in files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matching, Normalization, ValuationProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub n: usize,
    pub normalization: Normalization,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ties_allowed: bool,
}

impl From<&ValuationProfile> for ProfileFile {
    fn from(p: &ValuationProfile) -> Self {
        ProfileFile {
            n: p.n(),
            normalization: p.normalization(),
            values: p.to_rows(),
            ties_allowed: p.ties_allowed(),
        }
    }
}

impl TryFrom<ProfileFile> for ValuationProfile {
    type Error = Error;

    fn try_from(f: ProfileFile) -> Result<Self> {
        if f.values.len() != f.n {
            return Err(Error::DimensionMismatch {
                expected: f.n,
                found: f.values.len(),
            });
        }
        Ok(ValuationProfile::from_rows(f.values, f.normalization)?.with_ties_allowed(f.ties_allowed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingFile {
    pub assignment: Vec<usize>,
}

impl From<&Matching> for MatchingFile {
    fn from(m: &Matching) -> Self {
        MatchingFile {
            assignment: m.as_slice().iter().map(|j| j + 1).collect(),
        }
    }
}

impl TryFrom<MatchingFile> for Matching {
    type Error = Error;

    fn try_from(f: MatchingFile) -> Result<Self> {
        if f.assignment.contains(&0) {
            return Err(Error::InvalidMatching("items are numbered from 1".into()));
        }
        Matching::new(f.assignment.into_iter().map(|j| j - 1).collect())
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Structural(format!("malformed JSON: {e}"))
}

pub fn profile_to_json(p: &ValuationProfile) -> String {
    serde_json::to_string_pretty(&ProfileFile::from(p)).expect("profile serializes")
}

pub fn profile_from_json(s: &str) -> Result<ValuationProfile> {
    serde_json::from_str::<ProfileFile>(s).map_err(json_err)?.try_into()
}

pub fn matching_to_json(m: &Matching) -> String {
    serde_json::to_string(&MatchingFile::from(m)).expect("matching serializes")
}

pub fn matching_from_json(s: &str) -> Result<Matching> {
    serde_json::from_str::<MatchingFile>(s).map_err(json_err)?.try_into()
}

pub fn read_profile(path: &Path) -> Result<ValuationProfile> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    profile_from_json(&s)
}
