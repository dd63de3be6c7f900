use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gemm, Mat, Real};

/// Temperature and branch weights of the contrastive objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Initial temperature; the field learns its logarithm.
    pub init_temperature: f64,
    pub min_temperature: f64,
    pub max_temperature: f64,
    pub learn_temperature: bool,
    pub vision_weight: f64,
    pub semantic_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            init_temperature: 1.0 / 0.07,
            min_temperature: 1.0,
            max_temperature: 100.0,
            learn_temperature: true,
            vision_weight: 1.0,
            semantic_weight: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_temperature > 0.0
            && self.min_temperature <= self.max_temperature
            && self.max_temperature.is_finite()
            && self.init_temperature.is_finite()
            && self.vision_weight >= 0.0
            && self.semantic_weight >= 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("bad loss config {self:?}")));
        }
        Ok(())
    }

    pub fn log_temperature_bounds(&self) -> (f64, f64) {
        (self.min_temperature.ln(), self.max_temperature.ln())
    }

    pub fn clamp_log_temperature(&self, v: f64) -> f64 {
        let (lo, hi) = self.log_temperature_bounds();
        v.clamp(lo, hi)
    }
}

/// Value and gradients of one contrastive branch.
#[derive(Debug, Clone)]
pub struct ContrastiveGrad<T> {
    pub loss: T,
    /// Gradient with respect to the (normalized) predictions.
    pub d_pred: Mat<T>,
    /// Gradient with respect to the temperature itself.
    pub d_tau: T,
}

/// Symmetric weighted cross-entropy over the tempered similarity matrix
/// `S = tau * F * E^T`: the mean over rows of `w_i * CE(S_i, i)` plus the
/// mean over columns of `w_j * CE(S_:j, j)`. Minimal when the diagonal
/// dominates.
pub fn contrastive_loss<T: Real>(
    pred: &Mat<T>,
    target: &Mat<T>,
    weights: &[T],
    tau: T,
) -> Result<T> {
    contrastive_loss_grad(pred, target, weights, tau).map(|g| g.loss)
}

pub fn contrastive_loss_grad<T: Real>(
    pred: &Mat<T>,
    target: &Mat<T>,
    weights: &[T],
    tau: T,
) -> Result<ContrastiveGrad<T>> {
    let b = pred.rows;
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    if target.rows != b || weights.len() != b {
        return Err(Error::DimMismatch(format!(
            "{b} predictions, {} targets, {} weights",
            target.rows,
            weights.len()
        )));
    }
    if pred.cols != target.cols {
        return Err(Error::DimMismatch(format!(
            "prediction dim {} vs target dim {}",
            pred.cols, target.cols
        )));
    }
    // G = F E^T, S = tau G
    let mut g = Mat::zeros(b, b);
    gemm(T::one(), pred, false, target, true, T::zero(), &mut g);
    let s: Vec<T> = g.data.iter().map(|&v| v * tau).collect();
    let bt = T::of(b as f64);

    let c: Vec<T> = weights.iter().map(|&w| w / bt).collect();
    let mut ds = Mat::zeros(b, b);
    let mut loss = T::zero();
    // rows: P = softmax over each row
    for i in 0..b {
        let row = &s[i * b..(i + 1) * b];
        let m = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let out = &mut ds.data[i * b..(i + 1) * b];
        let mut z = T::zero();
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - m).exp();
            z += *o;
        }
        loss += c[i] * (m + z.ln() - row[i]);
        let scale = c[i] / z;
        out.iter_mut().for_each(|o| *o = *o * scale);
        out[i] = out[i] - c[i];
    }
    // columns: Q = softmax over each column, accumulated row-major
    let mut col_max = vec![T::neg_infinity(); b];
    for row in s.chunks(b) {
        for (m, &v) in col_max.iter_mut().zip(row) {
            *m = m.max(v);
        }
    }
    let mut q = vec![T::zero(); b * b];
    let mut col_z = vec![T::zero(); b];
    for (qrow, row) in q.chunks_mut(b).zip(s.chunks(b)) {
        for (((qv, &v), &m), z) in qrow.iter_mut().zip(row).zip(&col_max).zip(col_z.iter_mut()) {
            *qv = (v - m).exp();
            *z += *qv;
        }
    }
    for j in 0..b {
        loss += c[j] * (col_max[j] + col_z[j].ln() - s[j * b + j]);
    }
    let col_scale: Vec<T> = c.iter().zip(&col_z).map(|(&cj, &z)| cj / z).collect();
    for (i, (drow, qrow)) in ds.data.chunks_mut(b).zip(q.chunks(b)).enumerate() {
        for ((d, &qv), &k) in drow.iter_mut().zip(qrow).zip(&col_scale) {
            *d += k * qv;
        }
        drow[i] = drow[i] - c[i];
    }
    let d_tau = ds
        .data
        .iter()
        .zip(&g.data)
        .fold(T::zero(), |a, (&x, &y)| a + x * y);
    let mut d_pred = Mat::zeros(b, pred.cols);
    gemm(tau, &ds, false, target, false, T::zero(), &mut d_pred);
    Ok(ContrastiveGrad {
        loss,
        d_pred,
        d_tau,
    })
}
