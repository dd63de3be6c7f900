use crate::embed::FeaturePoint;
use crate::error::{Error, Result};
use crate::field::heads::FieldHeads;
use crate::field::loss::{contrastive_loss_grad, LossConfig};
use crate::geometry::Point3;
use crate::hashgrid::{Footprint, HashGrid, SparseGrad};
use crate::numeric::{gemm, Mat, Real};

/// Rows handed to [`LopField::forward`] per chunk.
const CHUNK: usize = 1024;

/// Position-to-embedding field: hash encoding followed by the MLP heads.
#[derive(Debug, Clone, PartialEq)]
pub struct LopField<T: Real = f32> {
    pub grid: HashGrid<T>,
    pub heads: FieldHeads<T>,
    /// Natural log of the contrastive temperature.
    pub log_tau: T,
    pub loss: LossConfig,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub footprints: Vec<Footprint<T>>,
    pub encoded: Mat<T>,
    pub pre: Mat<T>,
    pub hidden: Mat<T>,
    pub raw_v: Mat<T>,
    pub raw_s: Mat<T>,
    pub norm_v: Vec<T>,
    pub norm_s: Vec<T>,
    pub f_v: Mat<T>,
    pub f_s: Mat<T>,
}

/// Gradients of the total loss for every parameter class.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub tables: SparseGrad<T>,
    pub trunk_w: Mat<T>,
    pub trunk_b: Vec<T>,
    pub head_v_w: Mat<T>,
    pub head_v_b: Vec<T>,
    pub head_s_w: Mat<T>,
    pub head_s_b: Vec<T>,
    pub log_tau: T,
}

/// Loss value split by branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub vision: T,
    pub semantic: T,
}

fn add_bias<T: Real>(m: &mut Mat<T>, b: &[T]) {
    for i in 0..m.rows {
        for (v, &c) in m.row_mut(i).iter_mut().zip(b) {
            *v += c;
        }
    }
}

fn col_sum<T: Real>(m: &Mat<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.cols];
    for i in 0..m.rows {
        for (o, &v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// Row-normalizes `raw`, returning the norms. Zero rows stay zero.
fn normalize_rows<T: Real>(raw: &Mat<T>) -> (Mat<T>, Vec<T>) {
    let mut out = raw.clone();
    let mut norms = Vec::with_capacity(raw.rows);
    for i in 0..raw.rows {
        let n = raw.row(i).iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        norms.push(n);
        if n > T::zero() {
            out.row_mut(i).iter_mut().for_each(|v| *v = *v / n);
        }
    }
    (out, norms)
}

/// Backward of `f = h / |h|`: `(df - f (f . df)) / |h|`, zero for zero rows.
fn normalize_backward<T: Real>(f: &Mat<T>, norms: &[T], df: &Mat<T>) -> Mat<T> {
    let mut out = Mat::zeros(f.rows, f.cols);
    for i in 0..f.rows {
        if norms[i] == T::zero() {
            continue;
        }
        let fi = f.row(i);
        let dfi = df.row(i);
        let dot = fi.iter().zip(dfi).fold(T::zero(), |a, (&x, &y)| a + x * y);
        for ((o, &x), &y) in out.row_mut(i).iter_mut().zip(fi).zip(dfi) {
            *o = (y - x * dot) / norms[i];
        }
    }
    out
}

/// Per-row weights: `exp(-dist)` for the vision branch, detection
/// confidence for the semantic branch.
pub fn branch_weights<T: Real>(batch: &[&FeaturePoint]) -> (Vec<T>, Vec<T>) {
    let w_v = batch
        .iter()
        .map(|p| T::of(-(p.dist as f64)).exp())
        .collect();
    let w_s = batch.iter().map(|p| T::of(p.conf as f64)).collect();
    (w_v, w_s)
}

impl<T: Real> LopField<T> {
    pub fn new(grid: HashGrid<T>, heads: FieldHeads<T>, loss: LossConfig) -> Result<Self> {
        heads.validate()?;
        loss.validate()?;
        if grid.output_dim() != heads.input_dim() {
            return Err(Error::DimMismatch(format!(
                "grid emits {} values, trunk expects {}",
                grid.output_dim(),
                heads.input_dim()
            )));
        }
        let log_tau = T::of(loss.clamp_log_temperature(loss.init_temperature.ln()));
        Ok(LopField {
            grid,
            heads,
            log_tau,
            loss,
        })
    }

    /// `(d, dv, ds)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let (dv, ds) = self.heads.dims();
        (self.grid.output_dim(), dv, ds)
    }

    pub fn temperature(&self) -> T {
        self.log_tau.exp()
    }

    pub fn cast<U: Real>(&self) -> LopField<U> {
        LopField {
            grid: self.grid.cast(),
            heads: self.heads.cast(),
            log_tau: U::of(self.log_tau.f64()),
            loss: self.loss.clone(),
        }
    }

    pub fn forward_cached(&self, points: &[Point3]) -> Result<ForwardCache<T>> {
        let b = points.len();
        let h = &self.heads;
        let (footprints, enc) = self.grid.encode_batch(points)?;
        let encoded = Mat::from_vec(b, self.grid.output_dim(), enc);
        let mut pre = Mat::zeros(b, h.hidden_dim());
        gemm(
            T::one(),
            &encoded,
            false,
            &h.trunk_w,
            false,
            T::zero(),
            &mut pre,
        );
        add_bias(&mut pre, &h.trunk_b);
        let hidden = Mat::from_vec(
            b,
            pre.cols,
            pre.data.iter().map(|&x| h.activation.apply(x)).collect(),
        );
        let (dv, ds) = h.dims();
        let mut raw_v = Mat::zeros(b, dv);
        gemm(
            T::one(),
            &hidden,
            false,
            &h.head_v_w,
            false,
            T::zero(),
            &mut raw_v,
        );
        add_bias(&mut raw_v, &h.head_v_b);
        let mut raw_s = Mat::zeros(b, ds);
        gemm(
            T::one(),
            &hidden,
            false,
            &h.head_s_w,
            false,
            T::zero(),
            &mut raw_s,
        );
        add_bias(&mut raw_s, &h.head_s_b);
        let (f_v, norm_v) = normalize_rows(&raw_v);
        let (f_s, norm_s) = normalize_rows(&raw_s);
        Ok(ForwardCache {
            footprints,
            encoded,
            pre,
            hidden,
            raw_v,
            raw_s,
            norm_v,
            norm_s,
            f_v,
            f_s,
        })
    }

    /// Unit-norm `(F_v, F_s)` rows for each point. Rows whose raw output is
    /// exactly zero stay zero.
    pub fn forward(&self, points: &[Point3]) -> Result<(Mat<T>, Mat<T>)> {
        let (_, dv, ds) = self.dims();
        let mut f_v = Mat::zeros(0, dv);
        let mut f_s = Mat::zeros(0, ds);
        for chunk in points.chunks(CHUNK) {
            let c = self.forward_cached(chunk)?;
            f_v.data.extend_from_slice(&c.f_v.data);
            f_v.rows += c.f_v.rows;
            f_s.data.extend_from_slice(&c.f_s.data);
            f_s.rows += c.f_s.rows;
        }
        Ok((f_v, f_s))
    }

    /// Loss of a batch and gradients for tables, trunk, heads and log-temperature.
    pub fn loss_and_gradients(
        &self,
        batch: &[&FeaturePoint],
    ) -> Result<(LossParts<T>, Gradients<T>)> {
        let b = batch.len();
        if b < 2 {
            return Err(Error::BatchTooSmall(b));
        }
        let (_, dv, ds) = self.dims();
        for p in batch {
            if p.e_v.dim() != dv || p.e_s.dim() != ds {
                return Err(Error::DimMismatch(format!(
                    "point embeddings ({}, {}) vs field ({dv}, {ds})",
                    p.e_v.dim(),
                    p.e_s.dim()
                )));
            }
        }
        let points: Vec<Point3> = batch.iter().map(|p| p.position_f64()).collect();
        let cache = self.forward_cached(&points)?;
        let e_v = Mat::from_vec(
            b,
            dv,
            batch
                .iter()
                .flat_map(|p| p.e_v.0.iter().map(|&v| T::of(v as f64)))
                .collect(),
        );
        let e_s = Mat::from_vec(
            b,
            ds,
            batch
                .iter()
                .flat_map(|p| p.e_s.0.iter().map(|&v| T::of(v as f64)))
                .collect(),
        );
        let (w_v, w_s) = branch_weights::<T>(batch);
        let tau = self.temperature();
        let gv = contrastive_loss_grad(&cache.f_v, &e_v, &w_v, tau)?;
        let gs = contrastive_loss_grad(&cache.f_s, &e_s, &w_s, tau)?;
        let (lv, ls) = (
            T::of(self.loss.vision_weight),
            T::of(self.loss.semantic_weight),
        );
        let parts = LossParts {
            total: lv * gv.loss + ls * gs.loss,
            vision: gv.loss,
            semantic: gs.loss,
        };

        let scale = |m: Mat<T>, s: T| {
            Mat::from_vec(m.rows, m.cols, m.data.into_iter().map(|v| v * s).collect())
        };
        let d_raw_v = normalize_backward(&cache.f_v, &cache.norm_v, &scale(gv.d_pred, lv));
        let d_raw_s = normalize_backward(&cache.f_s, &cache.norm_s, &scale(gs.d_pred, ls));
        let h = &self.heads;

        let mut head_v_w = Mat::zeros(h.hidden_dim(), dv);
        gemm(
            T::one(),
            &cache.hidden,
            true,
            &d_raw_v,
            false,
            T::zero(),
            &mut head_v_w,
        );
        let mut head_s_w = Mat::zeros(h.hidden_dim(), ds);
        gemm(
            T::one(),
            &cache.hidden,
            true,
            &d_raw_s,
            false,
            T::zero(),
            &mut head_s_w,
        );

        let mut d_hidden = Mat::zeros(b, h.hidden_dim());
        gemm(
            T::one(),
            &d_raw_v,
            false,
            &h.head_v_w,
            true,
            T::zero(),
            &mut d_hidden,
        );
        gemm(
            T::one(),
            &d_raw_s,
            false,
            &h.head_s_w,
            true,
            T::one(),
            &mut d_hidden,
        );
        let d_pre = Mat::from_vec(
            b,
            d_hidden.cols,
            d_hidden
                .data
                .iter()
                .zip(&cache.pre.data)
                .map(|(&g, &x)| g * h.activation.derivative(x))
                .collect(),
        );
        let mut trunk_w = Mat::zeros(h.input_dim(), h.hidden_dim());
        gemm(
            T::one(),
            &cache.encoded,
            true,
            &d_pre,
            false,
            T::zero(),
            &mut trunk_w,
        );
        let mut d_enc = Mat::zeros(b, h.input_dim());
        gemm(
            T::one(),
            &d_pre,
            false,
            &h.trunk_w,
            true,
            T::zero(),
            &mut d_enc,
        );
        let tables = self.grid.backward_batch(&cache.footprints, &d_enc.data);

        let log_tau = if self.loss.learn_temperature {
            (lv * gv.d_tau + ls * gs.d_tau) * tau
        } else {
            T::zero()
        };
        let grads = Gradients {
            tables,
            trunk_b: col_sum(&d_pre),
            trunk_w,
            head_v_b: col_sum(&d_raw_v),
            head_v_w,
            head_s_b: col_sum(&d_raw_s),
            head_s_w,
            log_tau,
        };
        Ok((parts, grads))
    }

    /// Loss only; used by finite-difference checks and evaluation.
    pub fn loss_value(&self, batch: &[&FeaturePoint]) -> Result<LossParts<T>> {
        self.loss_and_gradients(batch).map(|(l, _)| l)
    }
}
