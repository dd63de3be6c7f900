//! Attribute inference and query localization against a trained field.

mod bank;
mod heatmap;

pub use bank::LabelBank;
pub use heatmap::{grid_samples, weighted_distance, Heatmap};

use crate::embed::vector::{dot, norm};
use crate::embed::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::field::LopField;
use crate::geometry::Point3;

/// Default share of the vision-language branch in combined scores: the best
/// held-out region accuracy in a weight sweep on validation scenes.
pub const DEFAULT_VS_WEIGHT: f64 = 0.1;
pub const DEFAULT_TOP_K: usize = 50;

/// Result of scoring one point against a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub index: usize,
    pub scores: Vec<f32>,
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "v-s weight {w} outside [0, 1]"
        )))
    }
}

fn cos_unit_query(row: &[f32], query: &[f32]) -> f64 {
    let n = norm(row);
    if n == 0.0 {
        0.0
    } else {
        dot(row, query) / n
    }
}

/// Index of the largest score; the first one wins ties.
pub fn argmax(scores: &[f32]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Scores every point against every bank label and picks the argmax.
pub fn infer_batch(
    field: &LopField<f32>,
    points: &[Point3],
    bank: &LabelBank,
    w: f64,
) -> Result<Vec<Inference>> {
    check_weight(w)?;
    let (_, dv, ds) = field.dims();
    bank.check_dims(dv, ds)?;
    let (f_v, f_s) = field.forward(points)?;
    let mut out = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let (rv, rs) = (f_v.row(i), f_s.row(i));
        let zero_v = w > 0.0 && norm(rv) == 0.0;
        let zero_s = w < 1.0 && norm(rs) == 0.0;
        if zero_v || zero_s {
            return Err(Error::UndefinedEmbedding);
        }
        let scores: Vec<f32> = (0..bank.len())
            .map(|j| {
                let sv = if w > 0.0 {
                    cos_unit_query(rv, bank.e_v[j].as_slice())
                } else {
                    0.0
                };
                let ss = if w < 1.0 {
                    cos_unit_query(rs, bank.e_s[j].as_slice())
                } else {
                    0.0
                };
                (w * sv + (1.0 - w) * ss) as f32
            })
            .collect();
        let index =
            argmax(&scores).ok_or_else(|| Error::InvalidInput("empty label bank".into()))?;
        out.push(Inference { index, scores });
    }
    Ok(out)
}

/// Label of `p` and the score of every bank entry.
pub fn infer_attribute(
    field: &LopField<f32>,
    p: Point3,
    bank: &LabelBank,
    w: f64,
) -> Result<(String, Vec<f32>)> {
    let mut inf = infer_batch(field, &[p], bank, w)?;
    let Inference { index, scores } = inf.pop().expect("one point in, one inference out");
    Ok((bank.labels[index].clone(), scores))
}

/// Scores samples against explicit query embeddings. A `None` branch
/// contributes zero.
pub fn localize_embedding(
    field: &LopField<f32>,
    e_v: Option<&EmbeddingVector>,
    e_s: Option<&EmbeddingVector>,
    samples: &[Point3],
    w: f64,
) -> Result<Heatmap> {
    check_weight(w)?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let (_, dv, ds) = field.dims();
    let unit = |e: Option<&EmbeddingVector>, dim: usize, what: &str| -> Result<Option<Vec<f32>>> {
        match e {
            None => Ok(None),
            Some(v) if v.dim() != dim => Err(Error::DimMismatch(format!(
                "{what} query has dim {}, field expects {dim}",
                v.dim()
            ))),
            Some(v) if v.norm() == 0.0 || !v.is_finite() => Err(Error::UndefinedEmbedding),
            Some(v) => Ok(Some(v.normalized().0)),
        }
    };
    let qv = unit(e_v, dv, "vision")?;
    let qs = unit(e_s, ds, "semantic")?;
    let (f_v, f_s) = field.forward(samples)?;
    let scores = (0..samples.len())
        .map(|i| {
            let sv = qv.as_ref().map_or(0.0, |q| cos_unit_query(f_v.row(i), q));
            let ss = qs.as_ref().map_or(0.0, |q| cos_unit_query(f_s.row(i), q));
            (w * sv + (1.0 - w) * ss) as f32
        })
        .collect();
    Heatmap::new(samples.to_vec(), scores)
}

/// Heatmap of a free-text query over `samples`.
pub fn localize_text(
    field: &LopField<f32>,
    query: &str,
    provider: &dyn EmbeddingProvider,
    samples: &[Point3],
    w: f64,
) -> Result<Heatmap> {
    let e = provider.embed_text(query)?;
    localize_embedding(field, Some(&e.vision), Some(&e.semantic), samples, w)
}

/// Heatmap of a precomputed image embedding; only the vision-language
/// branch takes part.
pub fn localize_image(
    field: &LopField<f32>,
    image: &EmbeddingVector,
    samples: &[Point3],
) -> Result<Heatmap> {
    localize_embedding(field, Some(image), None, samples, 1.0)
}

#[cfg(test)]
mod tests;
