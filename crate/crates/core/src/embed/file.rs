use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::provider::{EmbeddingProvider, ImageCrop, ImageView, TextEmbedding};
use crate::embed::vector::EmbeddingVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextEntry {
    pub vision: EmbeddingVector,
    pub semantic: EmbeddingVector,
}

/// Provider backed by precomputed embeddings in a JSON table.
///
/// ```json
/// { "dv": 512, "ds": 768,
///   "text":   { "kitchen": { "vision": [..], "semantic": [..] } },
///   "crops":  { "<frame_key>:<instance_id>": [..] },
///   "images": { "<frame_key>": [..] } }
/// ```
///
/// Vectors are normalized on load. Text lookups are exact after trimming and
/// lowercasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileProvider {
    pub dv: usize,
    pub ds: usize,
    #[serde(default)]
    pub text: BTreeMap<String, TextEntry>,
    #[serde(default)]
    pub crops: BTreeMap<String, EmbeddingVector>,
    #[serde(default)]
    pub images: BTreeMap<String, EmbeddingVector>,
}

impl FileProvider {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FileProvider = serde_json::from_str(text)?;
        raw.normalized()
    }

    fn normalized(self) -> Result<Self> {
        let (dv, ds) = (self.dv, self.ds);
        let check = |key: &str, v: EmbeddingVector, dim: usize| -> Result<EmbeddingVector> {
            if v.dim() != dim {
                return Err(Error::DimMismatch(format!(
                    "{key}: expected {dim}, got {}",
                    v.dim()
                )));
            }
            if !v.is_finite() || v.norm() == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{key}: vector is zero or non-finite"
                )));
            }
            Ok(v.normalized())
        };
        let mut text = BTreeMap::new();
        for (k, e) in self.text {
            let entry = TextEntry {
                vision: check(&k, e.vision, dv)?,
                semantic: check(&k, e.semantic, ds)?,
            };
            text.insert(text_key(&k), entry);
        }
        let crops = self
            .crops
            .into_iter()
            .map(|(k, v)| check(&k, v, dv).map(|v| (k, v)))
            .collect::<Result<_>>()?;
        let images = self
            .images
            .into_iter()
            .map(|(k, v)| check(&k, v, dv).map(|v| (k, v)))
            .collect::<Result<_>>()?;
        Ok(FileProvider {
            dv,
            ds,
            text,
            crops,
            images,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn text_key(t: &str) -> String {
    t.trim().to_lowercase()
}

impl EmbeddingProvider for FileProvider {
    fn dims(&self) -> (usize, usize) {
        (self.dv, self.ds)
    }

    fn embed_text(&self, text: &str) -> Result<TextEmbedding> {
        let e = self
            .text
            .get(&text_key(text))
            .ok_or_else(|| Error::MissingEmbedding(format!("text {text:?}")))?;
        Ok(TextEmbedding {
            vision: e.vision.clone(),
            semantic: e.semantic.clone(),
        })
    }

    fn embed_image_crop(&self, crop: &ImageCrop) -> Result<EmbeddingVector> {
        let key = format!("{}:{}", crop.frame_key, crop.instance_id);
        self.crops
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingEmbedding(format!("crop {key}")))
    }

    fn embed_image(&self, view: &ImageView) -> Result<EmbeddingVector> {
        let key = view.frame_key.to_string();
        self.images
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingEmbedding(format!("image {key}")))
    }
}
