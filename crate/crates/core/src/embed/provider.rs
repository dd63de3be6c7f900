use crate::embed::vector::EmbeddingVector;
use crate::error::Result;
use crate::scene::PixelBox;

/// Vision-language and semantic embedding of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub vision: EmbeddingVector,
    pub semantic: EmbeddingVector,
}

/// An instance crop handed to the image encoder.
///
/// Synthetic providers look at `label`, `instance_id` and `context`; real
/// adapters precompute crop features keyed by frame and instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCrop {
    pub frame_key: u64,
    pub instance_id: i32,
    pub label: String,
    pub bbox: PixelBox,
    /// Other content inside `bbox` (region labels of background pixels,
    /// classes of other instances) as fractions of the box's pixels.
    pub context: Vec<(String, f32)>,
}

/// A whole frame handed to the image encoder, summarized by what is visible:
/// region labels for background pixels and class labels for object pixels,
/// each with its fraction of valid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageView {
    pub frame_key: u64,
    pub content: Vec<(String, f32)>,
}

/// Source of target embeddings. Implementations must be deterministic and
/// safe to call from several threads.
pub trait EmbeddingProvider: Send + Sync {
    /// `(vision-language dim, semantic dim)`.
    fn dims(&self) -> (usize, usize);

    fn embed_text(&self, text: &str) -> Result<TextEmbedding>;

    fn embed_image_crop(&self, crop: &ImageCrop) -> Result<EmbeddingVector>;

    fn embed_image(&self, view: &ImageView) -> Result<EmbeddingVector>;
}
