use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embed::provider::{EmbeddingProvider, ImageCrop, ImageView, TextEmbedding};
use crate::embed::vector::{normalized_f64, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scene::frame::hash_parts;

const STOPWORDS: &[&str] = &["a", "an", "the", "in", "of", "on", "at", "to", "with"];
const STOPWORD_WEIGHT: f64 = 0.5;

/// Deterministic stand-in for image-text and sentence encoders.
///
/// Every lowercase token maps to a seeded Gaussian direction, separately for
/// the vision-language and semantic spaces. A text embeds as the normalized
/// weighted sum of its tokens, so texts sharing tokens have positive cosine
/// and unrelated texts are close to orthogonal. Crops and whole images are
/// built from the text directions of what they show, plus seeded noise.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    seed: u64,
    dv: usize,
    ds: usize,
    noise: f64,
}

#[derive(Clone, Copy)]
enum Space {
    Vision,
    Semantic,
}

impl SyntheticProvider {
    pub const DEFAULT_DIM: usize = 64;
    pub const DEFAULT_NOISE: f64 = 0.1;

    pub fn new(seed: u64, dv: usize, ds: usize) -> Result<Self> {
        if dv < 8 || ds < 8 {
            return Err(Error::InvalidConfig(format!(
                "synthetic dims must be >= 8, got ({dv}, {ds})"
            )));
        }
        Ok(SyntheticProvider {
            seed,
            dv,
            ds,
            noise: Self::DEFAULT_NOISE,
        })
    }

    /// Norm of the perturbation added to crop and image embeddings before
    /// renormalization. Clamped to `[0, 0.1]`.
    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise.clamp(0.0, Self::DEFAULT_NOISE);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn gaussian(&self, parts: &[&[u8]], dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(hash_parts(parts));
        (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn token_vector(&self, space: Space, token: &str) -> Vec<f64> {
        let (tag, dim): (&[u8], usize) = match space {
            Space::Vision => (b"vl", self.dv),
            Space::Semantic => (b"sem", self.ds),
        };
        self.gaussian(&[&self.seed.to_le_bytes(), tag, token.as_bytes()], dim)
    }

    fn text_sum(&self, space: Space, text: &str) -> Result<Vec<f64>> {
        let dim = match space {
            Space::Vision => self.dv,
            Space::Semantic => self.ds,
        };
        let mut acc = vec![0.0; dim];
        let mut any = false;
        for token in tokens(text) {
            let w = if STOPWORDS.contains(&token.as_str()) {
                STOPWORD_WEIGHT
            } else {
                1.0
            };
            for (a, v) in acc.iter_mut().zip(self.token_vector(space, &token)) {
                *a += w * v;
            }
            any = true;
        }
        if !any {
            return Err(Error::InvalidLabel(format!("text {text:?} has no tokens")));
        }
        Ok(unit(acc))
    }

    fn perturbed(&self, base: Vec<f64>, noise_parts: &[&[u8]]) -> EmbeddingVector {
        let noise = unit(self.gaussian(noise_parts, base.len()));
        let mixed: Vec<f64> = base
            .iter()
            .zip(&noise)
            .map(|(b, n)| b + self.noise * n)
            .collect();
        EmbeddingVector(normalized_f64(&mixed))
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Lowercase alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingProvider for SyntheticProvider {
    fn dims(&self) -> (usize, usize) {
        (self.dv, self.ds)
    }

    fn embed_text(&self, text: &str) -> Result<TextEmbedding> {
        let vision = normalized_f64(&self.text_sum(Space::Vision, text)?);
        let semantic = normalized_f64(&self.text_sum(Space::Semantic, text)?);
        Ok(TextEmbedding {
            vision: EmbeddingVector(vision),
            semantic: EmbeddingVector(semantic),
        })
    }

    fn embed_image_crop(&self, crop: &ImageCrop) -> Result<EmbeddingVector> {
        let mut base = self.text_sum(Space::Vision, &crop.label)?;
        for (label, frac) in &crop.context {
            if *frac <= 0.0 {
                continue;
            }
            for (a, v) in base.iter_mut().zip(self.text_sum(Space::Vision, label)?) {
                *a += *frac as f64 * v;
            }
        }
        let base = unit(base);
        Ok(self.perturbed(
            base,
            &[
                &self.seed.to_le_bytes(),
                b"crop",
                &crop.instance_id.to_le_bytes(),
            ],
        ))
    }

    fn embed_image(&self, view: &ImageView) -> Result<EmbeddingVector> {
        let mut acc = vec![0.0; self.dv];
        for (label, frac) in &view.content {
            if *frac <= 0.0 {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(self.text_sum(Space::Vision, label)?) {
                *a += *frac as f64 * v;
            }
        }
        if acc.iter().all(|&x| x == 0.0) {
            return Err(Error::NoData("image view has no visible content".into()));
        }
        Ok(self.perturbed(
            unit(acc),
            &[
                &self.seed.to_le_bytes(),
                b"image",
                &view.frame_key.to_le_bytes(),
            ],
        ))
    }
}
