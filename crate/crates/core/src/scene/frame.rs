use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scene::camera::{back_project, Intrinsics, Pose};

/// Instance id used for pixels outside every detection mask.
pub const BACKGROUND: i32 = -1;

/// Inclusive pixel rectangle of an instance mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub min_u: u32,
    pub min_v: u32,
    pub max_u: u32,
    pub max_v: u32,
}

/// A posed depth frame with per-pixel instance masks and detection labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Row-major meters; 0 marks an invalid pixel.
    pub depth: Vec<f32>,
    /// Row-major instance ids; [`BACKGROUND`] outside masks.
    pub instance_ids: Vec<i32>,
    pub instance_labels: BTreeMap<i32, String>,
    pub instance_confidences: BTreeMap<i32, f32>,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.pose.validate()?;
        let n = self.intrinsics.pixel_count();
        if self.depth.len() != n || self.instance_ids.len() != n {
            return Err(Error::InvalidGeometry(format!(
                "raster sizes {} / {} do not match {}x{}",
                self.depth.len(),
                self.instance_ids.len(),
                self.intrinsics.width,
                self.intrinsics.height
            )));
        }
        for &id in &self.instance_ids {
            if id == BACKGROUND {
                continue;
            }
            if id < 0 {
                return Err(Error::InvalidInput(format!("negative instance id {id}")));
            }
            if !self.instance_labels.contains_key(&id) {
                return Err(Error::InvalidInput(format!("instance {id} has no label")));
            }
            match self.instance_confidences.get(&id) {
                Some(c) if (0.0..=1.0).contains(c) => {}
                Some(c) => {
                    return Err(Error::InvalidInput(format!("instance {id} confidence {c}")))
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "instance {id} has no confidence"
                    )))
                }
            }
        }
        if self.depth.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(
                "depth raster contains negative or non-finite values".into(),
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn pixel(&self, index: usize) -> (u32, u32) {
        let w = self.intrinsics.width as usize;
        ((index % w) as u32, (index / w) as u32)
    }

    /// World point of raster pixel `index`, `None` for invalid depth.
    pub fn world_point(&self, index: usize) -> Option<Point3> {
        let d = self.depth[index];
        if d <= 0.0 {
            return None;
        }
        let (u, v) = self.pixel(index);
        back_project(u as f64, v as f64, d as f64, &self.intrinsics, &self.pose).ok()
    }

    /// Distinct instance ids present in the raster, ascending.
    pub fn instances(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self
            .instance_ids
            .iter()
            .copied()
            .filter(|&id| id != BACKGROUND)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn instance_box(&self, id: i32) -> Option<PixelBox> {
        let mut b: Option<PixelBox> = None;
        for (i, _) in self
            .instance_ids
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == id)
        {
            let (u, v) = self.pixel(i);
            b = Some(match b {
                None => PixelBox {
                    min_u: u,
                    min_v: v,
                    max_u: u,
                    max_v: v,
                },
                Some(b) => PixelBox {
                    min_u: b.min_u.min(u),
                    min_v: b.min_v.min(v),
                    max_u: b.max_u.max(u),
                    max_v: b.max_v.max(v),
                },
            });
        }
        b
    }

    /// Stable 64-bit digest of pose and rasters. Used to key per-frame
    /// randomness so results do not depend on frame order.
    pub fn content_key(&self) -> u64 {
        let mut h = Fnv64::new();
        for v in self
            .pose
            .rotation
            .iter()
            .chain(self.pose.translation.iter())
        {
            h.write(&v.to_le_bytes());
        }
        for d in &self.depth {
            h.write(&d.to_le_bytes());
        }
        for id in &self.instance_ids {
            h.write(&id.to_le_bytes());
        }
        h.finish()
    }
}

/// FNV-1a, 64 bit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

pub(crate) fn hash_parts(parts: &[&[u8]]) -> u64 {
    let mut h = Fnv64::new();
    for p in parts {
        h.write(&(p.len() as u64).to_le_bytes());
        h.write(p);
    }
    h.finish()
}
