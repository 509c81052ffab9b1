use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::embed::RemoteEmbedder;
use super::ClassifierError;
use crate::dataset::normalize_text;
use crate::llm::ProviderConfig;

pub const DEFAULT_HASH_DIMENSION: usize = 1 << 18;
pub const FNV1A_64: &str = "fnv1a-64";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a_64(s: &str) -> u64 {
    s.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds from unordered (index, value) pairs; repeated indices are summed
    /// and explicit zeros dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *acc.entry(i).or_insert(0.0) += v;
        }
        Self {
            entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn l2_normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
        self
    }

    /// Largest index + 1, or 0 for the zero vector.
    pub fn min_dimension(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i as usize + 1)
    }

    pub(crate) fn remap(&self, map: &BTreeMap<u32, u32>) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|&(i, v)| (map[&i], v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturizerKind {
    HashedNgram,
    RemoteEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerSpec {
    pub kind: FeaturizerKind,
    pub dimension: usize,
    #[serde(default = "default_orders")]
    pub ngram_orders: BTreeSet<u8>,
    #[serde(default = "default_hash")]
    pub hash_algorithm: String,
    /// Embedding endpoint, only for `RemoteEmbedding`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<ProviderConfig>,
}

fn default_orders() -> BTreeSet<u8> {
    [1, 2].into_iter().collect()
}

fn default_hash() -> String {
    FNV1A_64.to_string()
}

impl Default for FeaturizerSpec {
    fn default() -> Self {
        Self::hashed(DEFAULT_HASH_DIMENSION)
    }
}

impl FeaturizerSpec {
    pub fn hashed(dimension: usize) -> Self {
        Self {
            kind: FeaturizerKind::HashedNgram,
            dimension,
            ngram_orders: default_orders(),
            hash_algorithm: default_hash(),
            endpoint: None,
        }
    }

    pub fn remote(endpoint: ProviderConfig, dimension: usize) -> Self {
        Self {
            kind: FeaturizerKind::RemoteEmbedding,
            dimension,
            ngram_orders: BTreeSet::new(),
            hash_algorithm: default_hash(),
            endpoint: Some(endpoint),
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.dimension < 2 {
            return Err(ClassifierError::InvalidConfig(format!(
                "feature dimension must be >= 2, got {}",
                self.dimension
            )));
        }
        match self.kind {
            FeaturizerKind::HashedNgram => {
                if self.hash_algorithm != FNV1A_64 {
                    return Err(ClassifierError::InvalidConfig(format!(
                        "unsupported hash algorithm `{}`",
                        self.hash_algorithm
                    )));
                }
                if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|o| !(1..=2).contains(o)) {
                    return Err(ClassifierError::InvalidConfig(
                        "ngram_orders must be a non-empty subset of {1, 2}".into(),
                    ));
                }
                if self.dimension > u32::MAX as usize {
                    return Err(ClassifierError::InvalidConfig("dimension too large".into()));
                }
            }
            FeaturizerKind::RemoteEmbedding => {
                if self.endpoint.is_none() {
                    return Err(ClassifierError::InvalidConfig(
                        "remote_embedding featurizer needs an endpoint".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Hashed unigram/bigram features of `text`, L2-normalized.
///
/// Only valid for `HashedNgram` specs.
pub fn featurize(spec: &FeaturizerSpec, text: &str) -> SparseVector {
    debug_assert_eq!(spec.kind, FeaturizerKind::HashedNgram);
    let normalized = normalize_text(text);
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let dim = spec.dimension as u64;
    let mut pairs = Vec::new();
    if spec.ngram_orders.contains(&1) {
        for t in &tokens {
            pairs.push(((fnv1a_64(t) % dim) as u32, 1.0));
        }
    }
    if spec.ngram_orders.contains(&2) {
        for w in tokens.windows(2) {
            let gram = format!("{}_{}", w[0], w[1]);
            pairs.push(((fnv1a_64(&gram) % dim) as u32, 1.0));
        }
    }
    SparseVector::from_pairs(pairs).l2_normalized()
}

/// Turns texts into feature vectors.
pub trait Featurizer: Send + Sync {
    fn spec(&self) -> &FeaturizerSpec;
    fn featurize_batch(&self, texts: &[&str]) -> Result<Vec<SparseVector>, ClassifierError>;
}

#[derive(Debug, Clone)]
pub struct HashedNgram {
    spec: FeaturizerSpec,
}

impl HashedNgram {
    pub fn new(spec: FeaturizerSpec) -> Result<Self, ClassifierError> {
        if spec.kind != FeaturizerKind::HashedNgram {
            return Err(ClassifierError::InvalidConfig("expected a hashed_ngram spec".into()));
        }
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl Featurizer for HashedNgram {
    fn spec(&self) -> &FeaturizerSpec {
        &self.spec
    }

    fn featurize_batch(&self, texts: &[&str]) -> Result<Vec<SparseVector>, ClassifierError> {
        Ok(texts.iter().map(|t| featurize(&self.spec, t)).collect())
    }
}

pub fn build_featurizer(spec: &FeaturizerSpec) -> Result<Box<dyn Featurizer>, ClassifierError> {
    spec.validate()?;
    Ok(match spec.kind {
        FeaturizerKind::HashedNgram => Box::new(HashedNgram::new(spec.clone())?),
        FeaturizerKind::RemoteEmbedding => Box::new(RemoteEmbedder::from_spec(spec.clone())?),
    })
}
