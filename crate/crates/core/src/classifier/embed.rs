use serde_json::{json, Value};

use super::featurize::{Featurizer, FeaturizerKind, FeaturizerSpec, SparseVector};
use super::ClassifierError;
use crate::llm::{OpenAiCompatible, ProviderError, ProviderErrorKind};

fn invalid(msg: impl Into<String>) -> ProviderError {
    ProviderError::new(ProviderErrorKind::InvalidResponse(msg.into()), 1)
}

/// Embeds `texts` through an OpenAI-compatible `/embeddings` endpoint and
/// L2-normalizes each vector.
pub fn embed_batch(client: &OpenAiCompatible, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::new(
            ProviderErrorKind::InvalidRequest("no texts to embed".into()),
            0,
        ));
    }
    let body = json!({ "model": client.config().model_name, "input": texts });
    let resp = client.post("embeddings", &body)?;
    let data = resp
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("missing `data` array"))?;
    if data.len() != texts.len() {
        return Err(invalid(format!("{} embeddings for {} inputs", data.len(), texts.len())));
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
    for (pos, item) in data.iter().enumerate() {
        let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
        let vector: Vec<f64> = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| invalid("missing `embedding`"))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| invalid("non-numeric embedding value")))
            .collect::<Result<_, _>>()?;
        let slot = slots.get_mut(index).ok_or_else(|| invalid("embedding index out of range"))?;
        if slot.replace(normalize(vector)).is_some() {
            return Err(invalid("duplicate embedding index"));
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Featurizer backed by a remote sentence-embedding endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    spec: FeaturizerSpec,
    client: OpenAiCompatible,
}

impl RemoteEmbedder {
    pub fn from_spec(spec: FeaturizerSpec) -> Result<Self, ClassifierError> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| ClassifierError::InvalidConfig("remote_embedding featurizer needs an endpoint".into()))?;
        Ok(Self::with_client(spec, OpenAiCompatible::new(endpoint)))
    }

    pub fn with_client(spec: FeaturizerSpec, client: OpenAiCompatible) -> Self {
        debug_assert_eq!(spec.kind, FeaturizerKind::RemoteEmbedding);
        Self { spec, client }
    }

    /// Embedding width reported by the endpoint.
    pub fn probe_dimension(client: &OpenAiCompatible) -> Result<usize, ProviderError> {
        Ok(embed_batch(client, &["dimension probe"])?[0].len())
    }
}

impl Featurizer for RemoteEmbedder {
    fn spec(&self) -> &FeaturizerSpec {
        &self.spec
    }

    fn featurize_batch(&self, texts: &[&str]) -> Result<Vec<SparseVector>, ClassifierError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let dense = embed_batch(&self.client, texts)?;
        dense
            .iter()
            .map(|v| {
                if v.len() != self.spec.dimension {
                    Err(ClassifierError::Shape(format!(
                        "embedding of width {}, expected {}",
                        v.len(),
                        self.spec.dimension
                    )))
                } else {
                    Ok(SparseVector::from_dense(v))
                }
            })
            .collect()
    }
}
