use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{FeaturePoint, FeaturePointCloud};
use crate::error::{Error, Result};
use crate::field::heads::{Activation, FieldHeads};
use crate::field::loss::LossConfig;
use crate::field::model::LopField;
use crate::field::optim::{AdamParams, AdamState};
use crate::hashgrid::{HashGrid, HashGridConfig};
use crate::numeric::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay per epoch: `lr * (1 - decay)^epoch`.
    pub lr_decay: f64,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale settings: about a minute and a half on one core for a
    /// four-room scene. The short schedule needs a larger step that anneals
    /// quickly.
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            epochs: 20,
            samples_per_epoch: 50_000,
            learning_rate: 1e-2,
            lr_decay: 0.3,
            hidden_dim: 256,
            activation: Activation::Softplus,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-scale settings for large scenes.
    pub fn paper_scale() -> Self {
        TrainConfig {
            batch_size: 12544,
            epochs: 100,
            samples_per_epoch: 3_000_000,
            learning_rate: 1e-4,
            lr_decay: 3e-3,
            hidden_dim: 600,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        if self.epochs == 0 || self.samples_per_epoch == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "epochs, samples_per_epoch and hidden_dim must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.lr_decay) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive and lr_decay in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * (1.0 - self.lr_decay).powi(epoch as i32)
    }

    pub fn steps_per_epoch(&self, batch: usize) -> usize {
        self.samples_per_epoch.div_ceil(batch)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean total loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub vision_losses: Vec<f64>,
    pub semantic_losses: Vec<f64>,
    pub final_temperature: f64,
}

/// Weighted sampling without replacement: each pass is an
/// Efraimidis-Spirakis permutation (keys `ln(u) / w`, descending), and each
/// batch is a contiguous slice of one pass.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    weights: Vec<f64>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    pub fn new(weights: Vec<f64>, seed: u64) -> Self {
        WeightedSampler {
            weights,
            order: Vec::new(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn reshuffle(&mut self) {
        let mut keyed: Vec<(f64, usize)> = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let u = 1.0 - self.rng.random::<f64>();
                (u.ln() / w.max(1e-12), i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        self.order = keyed.into_iter().map(|(_, i)| i).collect();
        self.pos = 0;
    }

    /// `n` distinct indices.
    pub fn next_batch(&mut self, n: usize) -> &[usize] {
        assert!(n <= self.weights.len());
        if self.order.is_empty() || self.pos + n > self.order.len() {
            self.reshuffle();
        }
        let s = self.pos;
        self.pos += n;
        &self.order[s..s + n]
    }
}

/// Optimizer state for every parameter block of a field.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub field: LopField<f32>,
    pub config: TrainConfig,
    adam: AdamParams,
    tables: AdamState<f32>,
    trunk_w: AdamState<f32>,
    trunk_b: AdamState<f32>,
    head_v_w: AdamState<f32>,
    head_v_b: AdamState<f32>,
    head_s_w: AdamState<f32>,
    head_s_b: AdamState<f32>,
    log_tau: AdamState<f32>,
    step: u64,
}

impl Trainer {
    pub fn new(field: LopField<f32>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let h = &field.heads;
        Ok(Trainer {
            adam: AdamParams::default(),
            tables: AdamState::new(field.grid.tables.len()),
            trunk_w: AdamState::new(h.trunk_w.data.len()),
            trunk_b: AdamState::new(h.trunk_b.len()),
            head_v_w: AdamState::new(h.head_v_w.data.len()),
            head_v_b: AdamState::new(h.head_v_b.len()),
            head_s_w: AdamState::new(h.head_s_w.data.len()),
            head_s_b: AdamState::new(h.head_s_b.len()),
            log_tau: AdamState::new(1),
            step: 0,
            field,
            config,
        })
    }

    /// One optimizer step on `batch`; returns `(total, vision, semantic)` loss.
    pub fn step(&mut self, batch: &[&FeaturePoint], lr: f64) -> Result<(f64, f64, f64)> {
        let (loss, g) = self.field.loss_and_gradients(batch)?;
        if !loss.total.is_finite() {
            return Err(Error::InvalidInput(format!(
                "loss became non-finite at step {}",
                self.step
            )));
        }
        self.step += 1;
        let t = self.step;
        let hp = self.adam;
        let f = &mut self.field;
        self.tables
            .step_sparse(&mut f.grid.tables, &g.tables, &hp, lr, t);
        self.trunk_w
            .step(&mut f.heads.trunk_w.data, &g.trunk_w.data, &hp, lr, t);
        self.trunk_b
            .step(&mut f.heads.trunk_b, &g.trunk_b, &hp, lr, t);
        self.head_v_w
            .step(&mut f.heads.head_v_w.data, &g.head_v_w.data, &hp, lr, t);
        self.head_v_b
            .step(&mut f.heads.head_v_b, &g.head_v_b, &hp, lr, t);
        self.head_s_w
            .step(&mut f.heads.head_s_w.data, &g.head_s_w.data, &hp, lr, t);
        self.head_s_b
            .step(&mut f.heads.head_s_b, &g.head_s_b, &hp, lr, t);
        if f.loss.learn_temperature {
            let mut lt = [f.log_tau];
            self.log_tau.step(&mut lt, &[g.log_tau], &hp, lr, t);
            f.log_tau = f.loss.clamp_log_temperature(lt[0] as f64) as f32;
        }
        Ok((loss.total.f64(), loss.vision.f64(), loss.semantic.f64()))
    }

    /// Runs every configured epoch over `cloud`.
    pub fn run(&mut self, cloud: &FeaturePointCloud) -> Result<TrainReport> {
        let (_, dv, ds) = self.field.dims();
        if cloud.dims() != (dv, ds) {
            return Err(Error::DimMismatch(format!(
                "cloud dims {:?} vs field dims ({dv}, {ds})",
                cloud.dims()
            )));
        }
        if cloud.len() < 2 {
            return Err(Error::BatchTooSmall(cloud.len()));
        }
        let batch = self.config.batch_size.min(cloud.len());
        let weights = cloud.points.iter().map(|p| p.weight as f64).collect();
        let mut sampler = WeightedSampler::new(weights, self.config.seed ^ 0x5a5a_5a5a);
        let mut report = TrainReport::default();
        for epoch in 0..self.config.epochs {
            let lr = self.config.learning_rate_at(epoch);
            let steps = self.config.steps_per_epoch(batch);
            let (mut tot, mut vis, mut sem) = (0.0, 0.0, 0.0);
            for _ in 0..steps {
                let idx = sampler.next_batch(batch);
                let refs: Vec<&FeaturePoint> = idx.iter().map(|&i| &cloud.points[i]).collect();
                let (t, v, s) = self.step(&refs, lr)?;
                tot += t;
                vis += v;
                sem += s;
            }
            let n = steps as f64;
            report.epoch_losses.push(tot / n);
            report.vision_losses.push(vis / n);
            report.semantic_losses.push(sem / n);
        }
        report.final_temperature = self.field.temperature() as f64;
        Ok(report)
    }
}

/// Builds a fresh field for `cloud` and trains it.
pub fn train(
    cloud: &FeaturePointCloud,
    grid: &HashGridConfig,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
) -> Result<(LopField<f32>, TrainReport)> {
    tcfg.validate()?;
    lcfg.validate()?;
    let grid = HashGrid::<f32>::new(grid.clone(), tcfg.seed)?;
    let heads = FieldHeads::new(
        grid.output_dim(),
        tcfg.hidden_dim,
        cloud.dv,
        cloud.ds,
        tcfg.activation,
        tcfg.seed.wrapping_add(1),
    );
    let field = LopField::new(grid, heads, lcfg.clone())?;
    fine_tune(field, cloud, tcfg)
}

/// Continues training an existing field; the cloud must match its dims.
pub fn fine_tune(
    field: LopField<f32>,
    cloud: &FeaturePointCloud,
    tcfg: &TrainConfig,
) -> Result<(LopField<f32>, TrainReport)> {
    let mut trainer = Trainer::new(field, tcfg.clone())?;
    let report = trainer.run(cloud)?;
    Ok((trainer.field, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_values() {
        let p = TrainConfig::paper_scale();
        assert_eq!(
            (p.batch_size, p.epochs, p.samples_per_epoch),
            (12544, 100, 3_000_000)
        );
        assert_eq!((p.learning_rate, p.lr_decay), (1e-4, 3e-3));
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), p);
    }

    #[test]
    fn learning_rate_decays_geometrically() {
        let c = TrainConfig::paper_scale();
        assert_eq!(c.learning_rate_at(0), 1e-4);
        assert!((c.learning_rate_at(2) - 1e-4 * 0.997 * 0.997).abs() < 1e-18);
        let d = TrainConfig::default();
        assert!((d.learning_rate_at(1) - 7e-3).abs() < 1e-15);
    }

    #[test]
    fn batches_have_distinct_indices() {
        let mut s = WeightedSampler::new(vec![1.0, 5.0, 2.0, 1.0, 9.0], 3);
        for _ in 0..20 {
            let mut b = s.next_batch(4).to_vec();
            b.sort_unstable();
            b.dedup();
            assert_eq!(b.len(), 4);
        }
    }

    #[test]
    fn heavy_points_come_first_more_often() {
        let mut s = WeightedSampler::new(vec![1.0, 20.0], 5);
        let firsts = (0..400).filter(|_| s.next_batch(2)[0] == 1).count();
        // P(heavy first) = 20 / 21
        assert!(firsts > 340, "{firsts}");
    }

    #[test]
    fn tiny_batch_is_rejected() {
        let c = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::BatchTooSmall(1))));
    }
}
