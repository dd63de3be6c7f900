//! Multi-resolution hash encoding of 3D positions.
//!
//! Each level overlays a cubic lattice on the scene bounds, hashes the eight
//! lattice corners around a point into a table of feature rows, and
//! interpolates them trilinearly. Level outputs are concatenated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::numeric::Real;

/// Spatial hash multipliers, one per axis.
pub const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

pub const INIT_RANGE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: usize,
    pub features_per_level: usize,
    pub log2_table_size: u32,
    pub base_resolution: u32,
    /// Cells across the longest bounds axis at the finest level.
    pub finest_resolution: u32,
    pub bounds: Aabb,
}

impl HashGridConfig {
    pub fn new(bounds: Aabb) -> Self {
        HashGridConfig {
            levels: 18,
            features_per_level: 8,
            log2_table_size: 20,
            base_resolution: 16,
            finest_resolution: 512,
            bounds,
        }
    }

    /// [`HashGridConfig::new`] with 2^16-row tables, small enough for
    /// desk-scale scenes and memory.
    pub fn desk(bounds: Aabb) -> Self {
        HashGridConfig {
            log2_table_size: 16,
            ..Self::new(bounds)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.features_per_level == 0 {
            return Err(Error::InvalidConfig(
                "levels and features_per_level must be positive".into(),
            ));
        }
        if self.log2_table_size == 0 || self.log2_table_size > 24 {
            return Err(Error::InvalidConfig(format!(
                "log2_table_size {} outside 1..=24",
                self.log2_table_size
            )));
        }
        if self.base_resolution < 2 {
            return Err(Error::InvalidConfig(
                "base_resolution must be at least 2".into(),
            ));
        }
        if self.finest_resolution < self.base_resolution {
            return Err(Error::InvalidConfig(
                "finest_resolution below base_resolution".into(),
            ));
        }
        let b = &self.bounds;
        let finite = b.min.iter().chain(&b.max).all(|v| v.is_finite());
        if !finite || (0..3).any(|i| b.max[i] <= b.min[i]) {
            return Err(Error::InvalidBounds(format!("{:?} .. {:?}", b.min, b.max)));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    pub fn table_rows(&self) -> usize {
        1 << self.log2_table_size
    }

    pub fn param_count(&self) -> usize {
        self.levels * self.table_rows() * self.features_per_level
    }

    /// Per-level resolution multiplier.
    pub fn growth(&self) -> f64 {
        if self.levels == 1 {
            1.0
        } else {
            ((self.finest_resolution as f64).ln() - (self.base_resolution as f64).ln())
                / (self.levels - 1) as f64
        }
        .exp()
    }

    /// Lattice cells across the longest axis at each level.
    pub fn resolutions(&self) -> Vec<u32> {
        let b = self.growth();
        (0..self.levels)
            .map(|l| {
                // the small epsilon keeps exact powers from flooring one short
                ((self.base_resolution as f64 * b.powi(l as i32)) + 1e-9).floor() as u32
            })
            .collect()
    }
}

/// Table index of an integer lattice corner.
pub fn hash(corner: [u32; 3], log2_table_size: u32) -> u32 {
    let h = corner[0].wrapping_mul(PRIMES[0])
        ^ corner[1].wrapping_mul(PRIMES[1])
        ^ corner[2].wrapping_mul(PRIMES[2]);
    h & ((1u32 << log2_table_size) - 1)
}

/// Table rows and trilinear weights touched by one point: `levels * 8`
/// entries, level-major. Rows are global (`level * table_rows + index`).
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint<T> {
    pub rows: Vec<u32>,
    pub weights: Vec<T>,
}

/// Accumulated table gradient over the touched rows, sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad<T> {
    pub features: usize,
    pub rows: Vec<u32>,
    /// `rows.len() * features` values.
    pub values: Vec<T>,
}

impl<T: Real> SparseGrad<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.features..(i + 1) * self.features]
    }

    /// Gradient for a global row, zero when untouched.
    pub fn get(&self, row: u32) -> Vec<T> {
        match self.rows.binary_search(&row) {
            Ok(i) => self.row(i).to_vec(),
            Err(_) => vec![T::zero(); self.features],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid<T: Real = f32> {
    config: HashGridConfig,
    scales: Vec<f64>,
    /// Level-major rows of `features_per_level` values.
    pub tables: Vec<T>,
}

impl<T: Real> HashGrid<T> {
    /// Tables drawn uniformly from `[-1e-4, 1e-4]`.
    pub fn new(config: HashGridConfig, seed: u64) -> Result<Self> {
        let mut g = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut g.tables {
            *v = T::of(rng.random_range(-INIT_RANGE..=INIT_RANGE));
        }
        Ok(g)
    }

    pub fn zeros(config: HashGridConfig) -> Result<Self> {
        config.validate()?;
        let n = config.param_count();
        Self::from_tables(config, vec![T::zero(); n])
    }

    pub fn from_tables(config: HashGridConfig, tables: Vec<T>) -> Result<Self> {
        config.validate()?;
        if tables.len() != config.param_count() {
            return Err(Error::DimMismatch(format!(
                "{} table values for a grid of {}",
                tables.len(),
                config.param_count()
            )));
        }
        let e = config.bounds.extent();
        let longest = e[0].max(e[1]).max(e[2]);
        let scales = config
            .resolutions()
            .iter()
            .map(|&r| r as f64 / longest)
            .collect();
        Ok(HashGrid {
            config,
            scales,
            tables,
        })
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn row(&self, global_row: u32) -> &[T] {
        let f = self.config.features_per_level;
        let r = global_row as usize;
        &self.tables[r * f..(r + 1) * f]
    }

    pub fn row_mut(&mut self, global_row: u32) -> &mut [T] {
        let f = self.config.features_per_level;
        let r = global_row as usize;
        &mut self.tables[r * f..(r + 1) * f]
    }

    pub fn cast<U: Real>(&self) -> HashGrid<U> {
        HashGrid {
            config: self.config.clone(),
            scales: self.scales.clone(),
            tables: self.tables.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Lattice coordinates of `p` at `level`, after clamping into bounds.
    pub fn lattice_position(&self, p: Point3, level: usize) -> [f64; 3] {
        let q = self.config.bounds.clamp(p);
        let s = self.scales[level];
        [0, 1, 2].map(|i| (q[i] - self.config.bounds.min[i]) * s)
    }

    pub fn footprint(&self, p: Point3) -> Result<Footprint<T>> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite position {p:?}")));
        }
        let levels = self.config.levels;
        let n = self.config.table_rows() as u32;
        let mut rows = Vec::with_capacity(levels * 8);
        let mut weights = Vec::with_capacity(levels * 8);
        for level in 0..levels {
            let x = self.lattice_position(p, level);
            let base = x.map(|v| v.floor());
            let frac = [0, 1, 2].map(|i| x[i] - base[i]);
            let base = base.map(|v| v as u32);
            for c in 0..8u32 {
                let bit = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
                let corner = [0, 1, 2].map(|i| base[i] + bit[i]);
                let w: f64 = (0..3)
                    .map(|i| if bit[i] == 1 { frac[i] } else { 1.0 - frac[i] })
                    .product();
                rows.push(level as u32 * n + hash(corner, self.config.log2_table_size));
                weights.push(T::of(w));
            }
        }
        Ok(Footprint { rows, weights })
    }

    /// Writes the encoding described by `fp` into `out` (length `d`).
    pub fn encode_footprint(&self, fp: &Footprint<T>, out: &mut [T]) {
        let f = self.config.features_per_level;
        debug_assert_eq!(out.len(), self.output_dim());
        out.fill(T::zero());
        for level in 0..self.config.levels {
            let slice = &mut out[level * f..(level + 1) * f];
            for c in 0..8 {
                let k = level * 8 + c;
                let w = fp.weights[k];
                if w == T::zero() {
                    continue;
                }
                for (o, &t) in slice.iter_mut().zip(self.row(fp.rows[k])) {
                    *o += w * t;
                }
            }
        }
    }

    pub fn encode(&self, p: Point3) -> Result<Vec<T>> {
        let fp = self.footprint(p)?;
        let mut out = vec![T::zero(); self.output_dim()];
        self.encode_footprint(&fp, &mut out);
        Ok(out)
    }

    /// Encodes a batch into a row-major `B x d` buffer and returns the
    /// footprints for the backward pass.
    pub fn encode_batch(&self, points: &[Point3]) -> Result<(Vec<Footprint<T>>, Vec<T>)> {
        let d = self.output_dim();
        let mut out = vec![T::zero(); points.len() * d];
        let mut fps = Vec::with_capacity(points.len());
        for (p, o) in points.iter().zip(out.chunks_mut(d)) {
            let fp = self.footprint(*p)?;
            self.encode_footprint(&fp, o);
            fps.push(fp);
        }
        Ok((fps, out))
    }

    pub fn encode_backward(&self, fp: &Footprint<T>, upstream: &[T]) -> SparseGrad<T> {
        self.backward_batch(std::slice::from_ref(fp), upstream)
    }

    /// Distributes row-major `B x d` upstream gradients onto table rows.
    /// Contributions to a shared row are summed in (sample, level, corner)
    /// order, so the result is independent of threading.
    pub fn backward_batch(&self, fps: &[Footprint<T>], upstream: &[T]) -> SparseGrad<T> {
        let f = self.config.features_per_level;
        let d = self.output_dim();
        assert_eq!(upstream.len(), fps.len() * d, "upstream shape");
        let mut order: Vec<(u32, u32)> = Vec::with_capacity(fps.len() * self.config.levels * 8);
        for (s, fp) in fps.iter().enumerate() {
            for (k, &row) in fp.rows.iter().enumerate() {
                order.push((row, (s * fp.rows.len() + k) as u32));
            }
        }
        order.sort_unstable();
        let per = self.config.levels * 8;
        let mut rows: Vec<u32> = Vec::new();
        let mut values: Vec<T> = Vec::new();
        for (row, idx) in order {
            let (s, k) = (idx as usize / per, idx as usize % per);
            let level = k / 8;
            let w = fps[s].weights[k];
            if rows.last() != Some(&row) {
                rows.push(row);
                values.extend(std::iter::repeat_n(T::zero(), f));
            }
            let start = values.len() - f;
            let up = &upstream[s * d + level * f..s * d + (level + 1) * f];
            for (v, &u) in values[start..].iter_mut().zip(up) {
                *v += w * u;
            }
        }
        SparseGrad {
            features: f,
            rows,
            values,
        }
    }
}
