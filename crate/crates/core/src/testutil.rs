//! Hand-built fields with known outputs for unit tests.

use std::collections::HashSet;

use crate::embed::EmbeddingVector;
use crate::field::{Activation, FieldHeads, LopField, LossConfig};
use crate::geometry::Aabb;
use crate::hashgrid::{hash, HashGrid, HashGridConfig};
use crate::numeric::Mat;

pub fn split_bounds() -> Aabb {
    Aabb::new([-1.0, -1.0, 0.0], [1.0, 1.0, 2.0])
}

/// Field over [`split_bounds`] whose raw output blends linearly in x from
/// `left` (x = -1) to `right` (x = 1): `t * right + (1 - t) * left` with
/// `t = (x + 1) / 2`, then normalized per branch.
pub fn split_field(
    left: (&EmbeddingVector, &EmbeddingVector),
    right: (&EmbeddingVector, &EmbeddingVector),
) -> LopField<f32> {
    let config = HashGridConfig {
        levels: 1,
        features_per_level: 2,
        log2_table_size: 16,
        base_resolution: 2,
        finest_resolution: 2,
        bounds: split_bounds(),
    };
    let mut grid = HashGrid::<f32>::zeros(config).unwrap();
    let mut seen = HashSet::new();
    for x in 0..3u32 {
        for y in 0..3u32 {
            for z in 0..3u32 {
                let row = hash([x, y, z], 16);
                assert!(seen.insert(row), "corner hash collision in fixture");
                let t = x as f32 / 2.0;
                grid.row_mut(row).copy_from_slice(&[t, 1.0 - t]);
            }
        }
    }
    let (dv, ds) = (left.0.dim(), left.1.dim());
    let mut heads = FieldHeads::<f32>::new(2, 2, dv, ds, Activation::Relu, 0);
    heads.trunk_w = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
    heads.trunk_b = vec![0.0; 2];
    let stack = |a: &EmbeddingVector, b: &EmbeddingVector| {
        Mat::from_vec(2, a.dim(), a.0.iter().chain(&b.0).copied().collect())
    };
    heads.head_v_w = stack(right.0, left.0);
    heads.head_s_w = stack(right.1, left.1);
    heads.head_v_b = vec![0.0; dv];
    heads.head_s_b = vec![0.0; ds];
    LopField::new(grid, heads, LossConfig::default()).unwrap()
}

/// Field with the same output everywhere.
pub fn constant_field(v: &EmbeddingVector, s: &EmbeddingVector) -> LopField<f32> {
    split_field((v, s), (v, s))
}

pub fn unit(v: &[f32]) -> EmbeddingVector {
    EmbeddingVector(v.to_vec()).normalized()
}
