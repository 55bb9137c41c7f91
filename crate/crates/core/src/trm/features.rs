use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::types::{Problem, ResponseRecord, Topology};

pub const ONE_HOT_DIM: usize = 3;
pub const STRUCTURAL_DIM: usize = 4;

const BRANCH_WORDS: &[&str] = &[
    "branch",
    "branches",
    "alternatively",
    "option",
    "options",
    "path",
    "paths",
    "explore",
    "node",
    "nodes",
    "neighbor",
    "neighbors",
    "merge",
    "combine",
    "connect",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hash_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { hash_dim: 256 }
    }
}

impl FeatureConfig {
    /// Total feature length: hashed block, topology one-hot, structural block.
    pub fn dim(&self) -> usize {
        self.hash_dim + ONE_HOT_DIM + STRUCTURAL_DIM
    }

    pub fn one_hot_offset(&self) -> usize {
        self.hash_dim
    }

    pub fn structural_offset(&self) -> usize {
        self.hash_dim + ONE_HOT_DIM
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {i} is not finite")));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn is_numeric_token(t: &str) -> bool {
    t.bytes().all(|b| b.is_ascii_digit())
}

/// Hashed bag of words over question and response, topology one-hot, and
/// four structural features (log word count, log numeric-token count,
/// answer-marker flag, log branching-keyword count).
///
/// The hashed block is signed, L2-normalized, and zero when the response
/// text is empty.
pub fn featurize(problem: &Problem, response: &ResponseRecord, cfg: &FeatureConfig) -> FeatureVector {
    let mut v = vec![0.0; cfg.dim()];
    let text = &response.text;
    let has_text = !text.trim().is_empty();

    if has_text && cfg.hash_dim > 0 {
        let question = tokens(&problem.question).map(|t| format!("q:{t}"));
        let answer = tokens(text).map(|t| format!("r:{t}"));
        for tok in question.chain(answer) {
            let h = xxh3_64(tok.as_bytes());
            let idx = (h % cfg.hash_dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        let norm = v[..cfg.hash_dim].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v[..cfg.hash_dim].iter_mut().for_each(|x| *x /= norm);
        }
    }

    v[cfg.one_hot_offset() + response.topology.index()] = 1.0;

    let words = text.split_whitespace().count();
    let numeric = tokens(text).filter(|t| is_numeric_token(t)).count();
    let lower = text.to_lowercase();
    let marker = lower.contains("final answer:") || text.contains("#### ");
    let branching = tokens(text)
        .filter(|t| BRANCH_WORDS.contains(&t.as_str()))
        .count();
    let s = cfg.structural_offset();
    v[s] = (words as f64).ln_1p();
    v[s + 1] = (numeric as f64).ln_1p();
    v[s + 2] = if marker { 1.0 } else { 0.0 };
    v[s + 3] = (branching as f64).ln_1p();

    FeatureVector(v)
}

/// Index of the one-hot coordinate for `t`.
pub fn topology_coordinate(cfg: &FeatureConfig, t: Topology) -> usize {
    cfg.one_hot_offset() + t.index()
}
