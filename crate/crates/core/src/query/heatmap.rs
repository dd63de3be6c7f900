use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{distance, Aabb, Point3};

/// Similarity of each sample point to one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub points: Vec<Point3>,
    pub scores: Vec<f32>,
    pub best: usize,
}

impl Heatmap {
    pub fn new(points: Vec<Point3>, scores: Vec<f32>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoSamples);
        }
        if points.len() != scores.len() {
            return Err(Error::DimMismatch(format!(
                "{} points but {} scores",
                points.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite heatmap score".into()));
        }
        let best = super::argmax(&scores).expect("non-empty");
        Ok(Heatmap {
            points,
            scores,
            best,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn best_point(&self) -> Point3 {
        self.points[self.best]
    }

    /// Indices of the `k` highest scores, best first; equal scores keep
    /// sample order.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx.truncate(k.max(1));
        idx
    }

    /// Weights of the top-k set: scores shifted so the weakest member of the
    /// set gets a small positive weight.
    fn top_k_weights(&self, idx: &[usize]) -> Vec<f64> {
        let lo = idx
            .iter()
            .map(|&i| self.scores[i] as f64)
            .fold(f64::INFINITY, f64::min);
        let hi = idx
            .iter()
            .map(|&i| self.scores[i] as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        if hi > 0.0 && lo >= 0.0 {
            idx.iter()
                .map(|&i| self.scores[i] as f64)
                .map(|s| s.max(1e-12))
                .collect()
        } else {
            let eps = ((hi - lo) * 1e-3).max(1e-9);
            idx.iter()
                .map(|&i| self.scores[i] as f64 - lo + eps)
                .collect()
        }
    }

    /// Score-weighted centroid of the `k` best samples.
    pub fn predicted_position(&self, k: usize) -> Point3 {
        let idx = self.top_k(k);
        let w = self.top_k_weights(&idx);
        let total: f64 = w.iter().sum();
        let mut c = [0.0; 3];
        for (&i, wi) in idx.iter().zip(&w) {
            for (a, p) in c.iter_mut().zip(self.points[i]) {
                *a += wi * p;
            }
        }
        c.map(|v| v / total)
    }

    /// `x,y,z,score` lines under a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,z,score")?;
        for (p, s) in self.points.iter().zip(&self.scores) {
            writeln!(out, "{},{},{},{}", p[0], p[1], p[2], s)?;
        }
        Ok(())
    }

    /// Top-down binning: the maximum score per `cell`-sized (x, y) square,
    /// written as `ix,iy,x,y,score` with the cell center.
    pub fn write_grid_csv<W: Write>(&self, cell: f64, mut out: W) -> Result<()> {
        if !(cell > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid cell {cell} must be positive"
            )));
        }
        let mut bins: BTreeMap<(i64, i64), f32> = BTreeMap::new();
        for (p, &s) in self.points.iter().zip(&self.scores) {
            let key = ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
            let e = bins.entry(key).or_insert(f32::NEG_INFINITY);
            *e = e.max(s);
        }
        writeln!(out, "ix,iy,x,y,score")?;
        for ((ix, iy), s) in bins {
            let (x, y) = ((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
            writeln!(out, "{ix},{iy},{x},{y},{s}")?;
        }
        Ok(())
    }
}

/// Similarity-weighted mean distance from the `k` best samples to the
/// nearest reference point.
pub fn weighted_distance(map: &Heatmap, k: usize, reference: &[Point3]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::NoSamples);
    }
    let idx = map.top_k(k);
    let w = map.top_k_weights(&idx);
    let mut num = 0.0;
    for (&i, wi) in idx.iter().zip(&w) {
        let p = map.points[i];
        let d = reference
            .iter()
            .map(|&r| distance(p, r))
            .fold(f64::INFINITY, f64::min);
        num += wi * d;
    }
    Ok(num / w.iter().sum::<f64>())
}

/// Regular lattice over `bounds` with spacing `step`, cell centers only.
/// With `height` set, a single horizontal layer at that z.
pub fn grid_samples(bounds: &Aabb, step: f64, height: Option<f64>) -> Result<Vec<Point3>> {
    if bounds.is_degenerate() {
        return Err(Error::InvalidBounds(format!("{bounds:?}")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "grid step {step} must be positive"
        )));
    }
    let count = |i: usize| ((bounds.max[i] - bounds.min[i]) / step).ceil().max(1.0) as usize;
    let (nx, ny) = (count(0), count(1));
    let zs: Vec<f64> = match height {
        Some(z) => vec![z],
        None => (0..count(2))
            .map(|k| (bounds.min[2] + (k as f64 + 0.5) * step).min(bounds.max[2]))
            .collect(),
    };
    let mut out = Vec::with_capacity(nx * ny * zs.len());
    for &z in &zs {
        for j in 0..ny {
            for i in 0..nx {
                let x = (bounds.min[0] + (i as f64 + 0.5) * step).min(bounds.max[0]);
                let y = (bounds.min[1] + (j as f64 + 0.5) * step).min(bounds.max[1]);
                out.push([x, y, z]);
            }
        }
    }
    Ok(out)
}
