use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::vector::EmbeddingVector;
use crate::error::{Error, Result};
use crate::geometry::Aabb;

pub const LOPF_MAGIC: &[u8; 4] = b"LOPF";
pub const LOPF_VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 * 4 + 4;

/// One distilled point with its target embeddings and training weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    pub position: [f32; 3],
    pub e_v: EmbeddingVector,
    pub e_s: EmbeddingVector,
    /// Number of merged observations.
    pub weight: f32,
    /// Mean distance to the observing camera, meters.
    pub dist: f32,
    /// Mean detection confidence; 1.0 for background.
    pub conf: f32,
}

impl FeaturePoint {
    pub fn position_f64(&self) -> [f64; 3] {
        self.position.map(|v| v as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePointCloud {
    pub points: Vec<FeaturePoint>,
    pub dv: usize,
    pub ds: usize,
    pub voxel_size: f32,
}

impl FeaturePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dv, self.ds)
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.points.iter().map(FeaturePoint::position_f64))
    }

    /// Checks every per-point invariant of the format.
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::CorruptCloud(format!(
                "voxel size {}",
                self.voxel_size
            )));
        }
        if self.dv == 0 || self.ds == 0 {
            return Err(Error::CorruptCloud("zero embedding dimension".into()));
        }
        let mut cells = std::collections::HashSet::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let bad = |what: &str| Err(Error::CorruptCloud(format!("point {i}: {what}")));
            if p.e_v.dim() != self.dv || p.e_s.dim() != self.ds {
                return bad("embedding dimension differs from header");
            }
            if p.position.iter().any(|v| !v.is_finite()) {
                return bad("non-finite position");
            }
            if !p.e_v.is_finite() || !p.e_s.is_finite() {
                return bad("non-finite embedding");
            }
            if (p.e_v.norm() - 1.0).abs() > 1e-4 || (p.e_s.norm() - 1.0).abs() > 1e-4 {
                return bad("embedding is not unit norm");
            }
            if !(p.weight >= 1.0) {
                return bad("weight below 1");
            }
            if !(p.dist > 0.0 && p.dist.is_finite()) {
                return bad("distance must be positive");
            }
            if !(0.0..=1.0).contains(&p.conf) {
                return bad("confidence outside [0, 1]");
            }
            if !cells.insert(voxel_key(p.position_f64(), self.voxel_size as f64)) {
                return bad("shares a voxel with another point");
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(LOPF_MAGIC)?;
        w.write_u32::<LittleEndian>(LOPF_VERSION)?;
        w.write_u32::<LittleEndian>(u32_len(self.points.len())?)?;
        w.write_u32::<LittleEndian>(u32_len(self.dv)?)?;
        w.write_u32::<LittleEndian>(u32_len(self.ds)?)?;
        w.write_f32::<LittleEndian>(self.voxel_size)?;
        for p in &self.points {
            if p.e_v.dim() != self.dv || p.e_s.dim() != self.ds {
                return Err(Error::DimMismatch(
                    "point embedding differs from cloud dims".into(),
                ));
            }
            for v in p.position {
                w.write_f32::<LittleEndian>(v)?;
            }
            w.write_f32::<LittleEndian>(p.weight)?;
            w.write_f32::<LittleEndian>(p.dist)?;
            w.write_f32::<LittleEndian>(p.conf)?;
            for &v in p.e_v.as_slice().iter().chain(p.e_s.as_slice()) {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out =
            Vec::with_capacity(HEADER_BYTES + self.points.len() * (6 + self.dv + self.ds) * 4);
        self.write_to(&mut out)?;
        Ok(out)
    }

    /// Parses and validates a feature cloud.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let cloud = parse(bytes)?;
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    /// Splits off `count` points chosen uniformly at random (seeded) as a
    /// held-out set. Both parts keep the original point order.
    pub fn split_holdout(
        &self,
        count: usize,
        seed: u64,
    ) -> Result<(FeaturePointCloud, FeaturePointCloud)> {
        if count >= self.len() {
            return Err(Error::InvalidInput(format!(
                "cannot hold out {count} of {} points",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked: BTreeSet<usize> = rand::seq::index::sample(&mut rng, self.len(), count)
            .into_iter()
            .collect();
        let part = |keep: bool| FeaturePointCloud {
            points: self
                .points
                .iter()
                .enumerate()
                .filter(|(i, _)| picked.contains(i) != keep)
                .map(|(_, p)| p.clone())
                .collect(),
            dv: self.dv,
            ds: self.ds,
            voxel_size: self.voxel_size,
        };
        Ok((part(true), part(false)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn u32_len(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidInput(format!("{n} does not fit the format")))
}

/// Integer voxel cell containing `p`.
pub fn voxel_key(p: [f64; 3], voxel: f64) -> [i64; 3] {
    p.map(|v| (v / voxel).floor() as i64)
}

fn parse(bytes: &[u8]) -> Result<FeaturePointCloud> {
    let corrupt = |m: &str| Error::CorruptCloud(m.to_string());
    if bytes.len() < HEADER_BYTES {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != LOPF_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut r = &bytes[4..];
    let version = r.read_u32::<LittleEndian>()?;
    if version != LOPF_VERSION {
        return Err(Error::CorruptCloud(format!(
            "unsupported version {version}"
        )));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let dv = r.read_u32::<LittleEndian>()? as usize;
    let ds = r.read_u32::<LittleEndian>()? as usize;
    let voxel_size = r.read_f32::<LittleEndian>()?;
    let per_point = (6 + dv + ds) * 4;
    let expected = count
        .checked_mul(per_point)
        .ok_or_else(|| corrupt("size overflow"))?;
    if r.len() != expected {
        return Err(Error::CorruptCloud(format!(
            "payload is {} bytes, header implies {expected}",
            r.len()
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut buf = vec![0f32; 6 + dv + ds];
    for _ in 0..count {
        r.read_f32_into::<LittleEndian>(&mut buf)?;
        points.push(FeaturePoint {
            position: [buf[0], buf[1], buf[2]],
            weight: buf[3],
            dist: buf[4],
            conf: buf[5],
            e_v: EmbeddingVector(buf[6..6 + dv].to_vec()),
            e_s: EmbeddingVector(buf[6 + dv..].to_vec()),
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    debug_assert!(rest.is_empty());
    Ok(FeaturePointCloud {
        points,
        dv,
        ds,
        voxel_size,
    })
}

/// Schema check for LOPF files produced by any tool.
pub fn validate_lopf(bytes: &[u8]) -> Result<()> {
    FeaturePointCloud::from_bytes(bytes).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::vector::normalized;

    fn point(x: f32, dv: usize, ds: usize) -> FeaturePoint {
        let e_v = normalized(&(0..dv).map(|i| (i as f32 + x).sin()).collect::<Vec<_>>());
        let e_s = normalized(&(0..ds).map(|i| (i as f32 * x).cos()).collect::<Vec<_>>());
        FeaturePoint {
            position: [x, -x, 0.5],
            e_v: e_v.into(),
            e_s: e_s.into(),
            weight: 2.0,
            dist: 1.5,
            conf: 0.75,
        }
    }

    fn cloud() -> FeaturePointCloud {
        FeaturePointCloud {
            points: vec![point(0.1, 8, 12), point(1.3, 8, 12)],
            dv: 8,
            ds: 12,
            voxel_size: 0.05,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = cloud();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"LOPF");
        assert_eq!(bytes.len(), HEADER_BYTES + 2 * (6 + 8 + 12) * 4);
        assert_eq!(FeaturePointCloud::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn holdout_partitions_the_points() {
        let c = FeaturePointCloud {
            points: (0..20).map(|i| point(i as f32 * 0.3, 8, 12)).collect(),
            dv: 8,
            ds: 12,
            voxel_size: 0.05,
        };
        let (train, held) = c.split_holdout(5, 3).unwrap();
        assert_eq!((train.len(), held.len()), (15, 5));
        let mut all: Vec<f32> = train
            .points
            .iter()
            .chain(&held.points)
            .map(|p| p.position[0])
            .collect();
        all.sort_by(f32::total_cmp);
        let want: Vec<f32> = c.points.iter().map(|p| p.position[0]).collect();
        assert_eq!(all, want);
        assert_eq!(c.split_holdout(5, 3).unwrap(), (train, held));
        assert!(c.split_holdout(20, 3).is_err());
    }

    #[test]
    fn header_layout() {
        let bytes = cloud().to_bytes().unwrap();
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 12);
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 0.05);
        // first point's position follows the header directly
        assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 0.1);
    }

    #[test]
    fn checker_rejects_damage() {
        let bytes = cloud().to_bytes().unwrap();
        assert!(validate_lopf(&bytes).is_ok());
        assert!(matches!(
            validate_lopf(&bytes[..bytes.len() - 1]),
            Err(Error::CorruptCloud(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(validate_lopf(&bad), Err(Error::CorruptCloud(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(validate_lopf(&bad), Err(Error::CorruptCloud(_))));
        // conf of the first point set to 1.5
        let mut bad = bytes.clone();
        bad[44..48].copy_from_slice(&1.5f32.to_le_bytes());
        assert!(matches!(validate_lopf(&bad), Err(Error::CorruptCloud(_))));
        assert!(validate_lopf(b"LO").is_err());
    }

    #[test]
    fn duplicate_voxel_is_rejected() {
        let mut c = cloud();
        c.points[0].position = [0.12, -0.12, 0.52];
        c.points[1].position = [0.13, -0.13, 0.53];
        assert!(matches!(c.validate(), Err(Error::CorruptCloud(_))));
    }
}
