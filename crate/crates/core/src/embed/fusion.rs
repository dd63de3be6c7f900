use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::cloud::{voxel_key, FeaturePoint, FeaturePointCloud};
use crate::embed::prompt::compose_prompt;
use crate::embed::provider::{EmbeddingProvider, ImageCrop, ImageView, TextEmbedding};
use crate::embed::vector::{normalized_f64, EmbeddingVector};
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::scene::frame::hash_parts;
use crate::scene::{Frame, RegionPartition, BACKGROUND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Edge of the merge voxel, meters.
    pub voxel_size: f64,
    /// Pixel budget per frame, split evenly between object and background.
    pub max_pixels_per_frame: usize,
    /// Supervise background pixels with whole-image and region embeddings.
    pub encode_background: bool,
    /// Embed object pixels as "<class> in the <region>" instead of the bare class.
    pub context_prompt: bool,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            voxel_size: 0.05,
            max_pixels_per_frame: 4096,
            encode_background: true,
            context_prompt: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Acc {
    count: f64,
    pos: [f64; 3],
    dist: f64,
    conf: f64,
    e_v: Vec<f64>,
    e_s: Vec<f64>,
}

impl Acc {
    fn new(dv: usize, ds: usize) -> Self {
        Acc {
            count: 0.0,
            pos: [0.0; 3],
            dist: 0.0,
            conf: 0.0,
            e_v: vec![0.0; dv],
            e_s: vec![0.0; ds],
        }
    }

    fn add(&mut self, p: [f64; 3], dist: f64, conf: f64, e_v: &[f32], e_s: &[f32]) {
        self.count += 1.0;
        for k in 0..3 {
            self.pos[k] += p[k];
        }
        self.dist += dist;
        self.conf += conf;
        for (a, &v) in self.e_v.iter_mut().zip(e_v) {
            *a += v as f64;
        }
        for (a, &v) in self.e_s.iter_mut().zip(e_s) {
            *a += v as f64;
        }
    }

    fn merge(&mut self, other: &Acc) {
        self.count += other.count;
        for k in 0..3 {
            self.pos[k] += other.pos[k];
        }
        self.dist += other.dist;
        self.conf += other.conf;
        for (a, v) in self.e_v.iter_mut().zip(&other.e_v) {
            *a += v;
        }
        for (a, v) in self.e_s.iter_mut().zip(&other.e_s) {
            *a += v;
        }
    }

    /// `key` and `voxel` pin the rounded position inside its own cell.
    fn finish(&self, key: [i64; 3], voxel: f64) -> FeaturePoint {
        let n = self.count;
        let mut position = [0f32; 3];
        for k in 0..3 {
            let mut v = (self.pos[k] / n) as f32;
            // f32 rounding can push a mean on the cell edge into the neighbor.
            while ((v as f64) / voxel).floor() as i64 > key[k] {
                v = v.next_down();
            }
            while (((v as f64) / voxel).floor() as i64) < key[k] {
                v = v.next_up();
            }
            position[k] = v;
        }
        FeaturePoint {
            position,
            e_v: EmbeddingVector(normalized_f64(&self.e_v)),
            e_s: EmbeddingVector(normalized_f64(&self.e_s)),
            weight: n as f32,
            dist: (self.dist / n) as f32,
            conf: ((self.conf / n) as f32).clamp(0.0, 1.0),
        }
    }
}

type VoxelMap = BTreeMap<[i64; 3], Acc>;

/// Fuses per-pixel target embeddings of posed frames into a voxel-merged
/// feature point cloud.
///
/// Object pixels carry the crop embedding of their instance and the semantic
/// embedding of their (optionally region-contextualized) class label.
/// Background pixels carry the whole-frame embedding and the semantic
/// embedding of the region they fall in. Per-frame sampling is keyed on the
/// frame content, so the result does not depend on frame order.
pub fn build_feature_cloud(
    frames: &[Frame],
    part: &RegionPartition,
    provider: &dyn EmbeddingProvider,
    cfg: &FusionConfig,
) -> Result<FeaturePointCloud> {
    if frames.is_empty() {
        return Err(Error::NoData("no frames to fuse".into()));
    }
    if !(cfg.voxel_size > 0.0 && cfg.voxel_size.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "voxel_size must be positive, got {}",
            cfg.voxel_size
        )));
    }
    if cfg.max_pixels_per_frame < 2 {
        return Err(Error::InvalidConfig(
            "max_pixels_per_frame must be at least 2".into(),
        ));
    }
    let (dv, ds) = provider.dims();
    // Cells are keyed with the size as stored in the file so readers agree.
    let voxel = cfg.voxel_size as f32 as f64;
    let mut merged = VoxelMap::new();
    let chunk = (rayon::current_num_threads() * 2).max(1);
    for group in frames.chunks(chunk) {
        let maps: Vec<Result<VoxelMap>> = group
            .par_iter()
            .map(|f| fuse_frame(f, part, provider, cfg, voxel, dv, ds))
            .collect();
        for map in maps {
            for (key, acc) in map? {
                merged
                    .entry(key)
                    .or_insert_with(|| Acc::new(dv, ds))
                    .merge(&acc);
            }
        }
    }
    if merged.is_empty() {
        return Err(Error::NoData(
            "frames contain no valid pixels to fuse".into(),
        ));
    }
    Ok(FeaturePointCloud {
        points: merged.iter().map(|(k, a)| a.finish(*k, voxel)).collect(),
        dv,
        ds,
        voxel_size: cfg.voxel_size as f32,
    })
}

/// The crop of instance `id` in `frame`, with the other content of its
/// pixel box as context.
pub fn instance_crop(frame: &Frame, part: &RegionPartition, id: i32) -> Result<ImageCrop> {
    let label = frame
        .instance_labels
        .get(&id)
        .ok_or_else(|| Error::InvalidLabel(format!("instance {id} has no label")))?;
    let bbox = frame
        .instance_box(id)
        .ok_or_else(|| Error::NoData(format!("instance {id} has no pixels")))?;
    let width = frame.width() as usize;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for v in bbox.min_v..=bbox.max_v {
        for u in bbox.min_u..=bbox.max_u {
            let i = v as usize * width + u as usize;
            total += 1;
            let other = frame.instance_ids[i];
            if other == id {
                continue;
            }
            let Some(p) = frame.world_point(i) else {
                continue;
            };
            let name = if other == BACKGROUND {
                part.regions[part.region_index_clamped(p[0], p[1])?].clone()
            } else {
                frame.instance_labels[&other].clone()
            };
            *counts.entry(name).or_default() += 1;
        }
    }
    Ok(ImageCrop {
        frame_key: frame.content_key(),
        instance_id: id,
        label: label.clone(),
        bbox,
        context: counts
            .into_iter()
            .map(|(l, c)| (l, (c as f64 / total as f64) as f32))
            .collect(),
    })
}

/// Whole-image view of `frame`: each visible instance class and each
/// background region, weighted by its share of the valid pixels. This is
/// the view fusion embeds for background pixels.
pub fn frame_view(frame: &Frame, part: &RegionPartition) -> Result<ImageView> {
    frame.validate()?;
    let mut content: BTreeMap<String, usize> = BTreeMap::new();
    let mut valid = 0usize;
    for i in 0..frame.depth.len() {
        let Some(p) = frame.world_point(i) else {
            continue;
        };
        valid += 1;
        let id = frame.instance_ids[i];
        let label = if id == BACKGROUND {
            part.regions[part.region_index_clamped(p[0], p[1])?].clone()
        } else {
            frame.instance_labels[&id].clone()
        };
        *content.entry(label).or_default() += 1;
    }
    if valid == 0 {
        return Err(Error::NoData("frame has no valid pixels".into()));
    }
    Ok(ImageView {
        frame_key: frame.content_key(),
        content: content
            .into_iter()
            .map(|(l, c)| (l, (c as f64 / valid as f64) as f32))
            .collect(),
    })
}

fn check_dim(v: &EmbeddingVector, dim: usize, what: &str) -> Result<()> {
    if v.dim() != dim {
        return Err(Error::DimMismatch(format!(
            "{what} embedding has {} values, provider declares {dim}",
            v.dim()
        )));
    }
    Ok(())
}

fn sample_sorted(rng: &mut ChaCha8Rng, pool: &[usize], budget: usize) -> Vec<usize> {
    if pool.len() <= budget {
        return pool.to_vec();
    }
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), budget)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

fn fuse_frame(
    frame: &Frame,
    part: &RegionPartition,
    provider: &dyn EmbeddingProvider,
    cfg: &FusionConfig,
    voxel: f64,
    dv: usize,
    ds: usize,
) -> Result<VoxelMap> {
    frame.validate()?;
    let key = frame.content_key();
    let camera = frame.pose.position();

    // World point and region of every valid pixel.
    let mut world = vec![None; frame.depth.len()];
    let mut object_pixels = Vec::new();
    let mut background_pixels = Vec::new();
    let mut content: BTreeMap<String, usize> = BTreeMap::new();
    let mut valid = 0usize;
    for i in 0..frame.depth.len() {
        let Some(p) = frame.world_point(i) else {
            continue;
        };
        let region = part.region_index_clamped(p[0], p[1])?;
        world[i] = Some((p, region));
        valid += 1;
        let id = frame.instance_ids[i];
        if id == BACKGROUND {
            background_pixels.push(i);
            *content.entry(part.regions[region].clone()).or_default() += 1;
        } else {
            object_pixels.push(i);
            *content
                .entry(frame.instance_labels[&id].clone())
                .or_default() += 1;
        }
    }

    let mut rng =
        ChaCha8Rng::seed_from_u64(hash_parts(&[&cfg.seed.to_le_bytes(), &key.to_le_bytes()]));
    let half = cfg.max_pixels_per_frame / 2;
    let objects = sample_sorted(&mut rng, &object_pixels, half);
    let background = if cfg.encode_background {
        sample_sorted(
            &mut rng,
            &background_pixels,
            cfg.max_pixels_per_frame - half,
        )
    } else {
        Vec::new()
    };

    let mut texts: HashMap<String, TextEmbedding> = HashMap::new();
    let mut text = |t: String| -> Result<EmbeddingVector> {
        if let Some(e) = texts.get(&t) {
            return Ok(e.semantic.clone());
        }
        let e = provider.embed_text(&t)?;
        check_dim(&e.semantic, ds, "semantic")?;
        let s = e.semantic.clone();
        texts.insert(t, e);
        Ok(s)
    };

    let mut out = VoxelMap::new();
    let mut add = |p: [f64; 3], conf: f64, e_v: &EmbeddingVector, e_s: &EmbeddingVector| {
        out.entry(voxel_key(p, voxel))
            .or_insert_with(|| Acc::new(dv, ds))
            .add(p, distance(p, camera), conf, e_v.as_slice(), e_s.as_slice());
    };

    let mut crops: BTreeMap<i32, EmbeddingVector> = BTreeMap::new();
    for &i in &objects {
        let (p, region) = world[i].expect("sampled pixel is valid");
        let id = frame.instance_ids[i];
        let label = &frame.instance_labels[&id];
        if let std::collections::btree_map::Entry::Vacant(slot) = crops.entry(id) {
            let crop = instance_crop(frame, part, id)?;
            let e = provider.embed_image_crop(&crop)?;
            check_dim(&e, dv, "crop")?;
            slot.insert(e);
        }
        let prompt = if cfg.context_prompt {
            compose_prompt(label, &part.regions[region])?
        } else {
            label.clone()
        };
        let e_s = text(prompt)?;
        add(p, frame.instance_confidences[&id] as f64, &crops[&id], &e_s);
    }

    if !background.is_empty() {
        let view = ImageView {
            frame_key: key,
            content: content
                .into_iter()
                .map(|(l, c)| (l, (c as f64 / valid as f64) as f32))
                .collect(),
        };
        let e_v = provider.embed_image(&view)?;
        check_dim(&e_v, dv, "image")?;
        for &i in &background {
            let (p, region) = world[i].expect("sampled pixel is valid");
            let e_s = text(part.regions[region].clone())?;
            add(p, 1.0, &e_v, &e_s);
        }
    }
    Ok(out)
}
