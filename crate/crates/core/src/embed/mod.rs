//! Target embeddings: providers, prompts, and fusion into a feature cloud.

pub mod cloud;
pub mod file;
pub mod fusion;
pub mod prompt;
pub mod provider;
pub mod synthetic;
pub mod vector;

pub use cloud::{
    validate_lopf, voxel_key, FeaturePoint, FeaturePointCloud, LOPF_MAGIC, LOPF_VERSION,
};
pub use file::FileProvider;
pub use fusion::{build_feature_cloud, frame_view, instance_crop, FusionConfig};
pub use prompt::compose_prompt;
pub use provider::{EmbeddingProvider, ImageCrop, ImageView, TextEmbedding};
pub use synthetic::SyntheticProvider;
pub use vector::{cosine, EmbeddingVector};
