use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Group, MlpModel};
use crate::datagen::{Instance, NUM_CLASSES};
use crate::real::Real;
use crate::rng::{substream, tag};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs (0-based) at whose start the rate is multiplied by `decay`.
    pub decay_at: Vec<usize>,
    pub decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 128, lr: 0.05, decay_at: vec![15, 25], decay: 0.5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.decay > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid training config {self:?}")));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = self.decay_at.iter().filter(|&&e| e <= epoch).count();
        self.lr * self.decay.powi(k as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Pixel-identical instances share one id so a minibatch does one forward
/// and backward row per distinct image.
struct ImageBank<'a> {
    ids: Vec<u32>,
    unique: Vec<&'a [u8]>,
}

impl<'a> ImageBank<'a> {
    fn new(instances: &'a [Instance]) -> Self {
        let mut index: HashMap<&'a [u8], u32> = HashMap::new();
        let mut unique = Vec::new();
        let ids = instances
            .iter()
            .map(|inst| {
                let px = inst.image.pixels();
                *index.entry(px).or_insert_with(|| {
                    unique.push(px);
                    (unique.len() - 1) as u32
                })
            })
            .collect();
        Self { ids, unique }
    }
}

/// Pixels scaled to `[0, 1]`.
pub fn normalize<T: Real>(pixels: &[u8], out: &mut Vec<T>) {
    let lut = scale_table::<T>();
    out.extend(pixels.iter().map(|&p| lut[p as usize]));
}

fn scale_table<T: Real>() -> [T; 256] {
    let s = T::one() / T::of(255.0);
    std::array::from_fn(|p| T::of(p as f64) * s)
}

/// First layer kept in image space: with `X` the distinct training images,
/// `h = X W0` is maintained directly and `W0 = W0_start + X^T c` is only
/// materialized at the end. A step costs `N x batch x width` instead of
/// `2 x pixels x batch x width`, so it pays off when `N` is below the
/// input width.
struct ImageSpaceLayer<T> {
    n: usize,
    x: Vec<T>,
    gram: Vec<T>,
    h: Vec<T>,
    c: Vec<T>,
    rows: Vec<T>,
    xw0: Vec<T>,
}

impl<T: Real> ImageSpaceLayer<T> {
    fn new(model: &MlpModel<T>, bank: &ImageBank) -> Self {
        let (n, d, w) = (bank.unique.len(), model.input_dim(), model.dims()[1]);
        let mut x = Vec::with_capacity(n * d);
        for px in &bank.unique {
            normalize(px, &mut x);
        }
        let mut gram = vec![T::zero(); n * n];
        T::gemm(n, d, n, T::one(), &x, d as isize, 1, &x, 1, d as isize, T::zero(), &mut gram, n as isize, 1);
        let mut h = vec![T::zero(); n * w];
        T::gemm(n, d, w, T::one(), &x, d as isize, 1, &model.weights[0], w as isize, 1, T::zero(), &mut h, w as isize, 1);
        Self { n, x, gram, h, c: vec![T::zero(); n * w], rows: Vec::new(), xw0: Vec::new() }
    }

    fn step<'a>(&mut self, model: &mut MlpModel<T>, ids: &[u32], members: impl Iterator<Item = (usize, &'a [T])>, batch: usize, lr: T) -> T {
        let (n, w, u) = (self.n, model.dims()[1], ids.len());
        self.xw0.clear();
        self.rows.clear();
        for &id in ids {
            let id = id as usize;
            self.xw0.extend_from_slice(&self.h[id * w..(id + 1) * w]);
            self.rows.extend_from_slice(&self.gram[id * n..(id + 1) * n]);
        }
        let (loss, delta) = model.sgd_step_from_first(&self.xw0, members, batch, lr);
        if !loss.is_finite() {
            return loss;
        }
        T::gemm(n, u, w, -lr, &self.rows, 1, n as isize, &delta, w as isize, 1, T::one(), &mut self.h, w as isize, 1);
        for (&id, row) in ids.iter().zip(delta.chunks(w)) {
            let id = id as usize;
            for (c, &v) in self.c[id * w..(id + 1) * w].iter_mut().zip(row) {
                *c += -lr * v;
            }
        }
        loss
    }

    fn finish(self, model: &mut MlpModel<T>) {
        let (d, w) = (model.input_dim(), model.dims()[1]);
        T::gemm(d, self.n, w, T::one(), &self.x, 1, d as isize, &self.c, w as isize, 1, T::one(), &mut model.weights[0], w as isize, 1);
    }
}

/// Minibatch SGD on soft-label cross-entropy.
pub fn train<T: Real>(model: &mut MlpModel<T>, data: &[Instance], config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, data, config, None)
}

/// `image_space` forces the first-layer engine; `None` picks it by the
/// number of distinct images.
fn train_with<T: Real>(model: &mut MlpModel<T>, data: &[Instance], config: &TrainConfig, image_space: Option<bool>) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let d = model.input_dim();
    let k = model.output_dim();
    if let Some(inst) = data.iter().find(|i| i.image.pixels().len() != d) {
        return Err(Error::Dimension { expected: d, got: inst.image.pixels().len() });
    }
    if k != NUM_CLASSES {
        return Err(Error::Dimension { expected: NUM_CLASSES, got: k });
    }
    let bank = ImageBank::new(data);
    let image_space = image_space.unwrap_or(bank.unique.len() <= d);
    let mut first = image_space.then(|| ImageSpaceLayer::new(model, &bank));
    let targets: Vec<[f32; NUM_CLASSES]> = data.iter().map(Instance::target).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport { epoch_losses: Vec::with_capacity(config.epochs), steps: 0 };
    let mut slot: HashMap<u32, usize> = HashMap::new();
    let mut inputs: Vec<T> = Vec::new();
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(config.seed, &[tag::SHUFFLE, epoch as u64]));
        let lr = T::of(config.lr_at(epoch));
        let mut total = 0.0;
        let mut batches = 0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            slot.clear();
            let mut ids: Vec<u32> = Vec::new();
            let mut members: Vec<(usize, Vec<T>)> = Vec::new();
            for &i in batch {
                let id = bank.ids[i];
                let g = *slot.entry(id).or_insert_with(|| {
                    ids.push(id);
                    members.push((0, vec![T::zero(); k]));
                    members.len() - 1
                });
                members[g].0 += 1;
                for (s, &t) in members[g].1.iter_mut().zip(&targets[i]) {
                    *s += T::of(t as f64);
                }
            }
            let loss = match first.as_mut() {
                Some(layer) => layer.step(model, &ids, members.iter().map(|(c, t)| (*c, &t[..])), batch.len(), lr),
                None => {
                    inputs.clear();
                    for &id in &ids {
                        normalize(bank.unique[id as usize], &mut inputs);
                    }
                    let groups: Vec<Group<T>> = members
                        .into_iter()
                        .enumerate()
                        .map(|(g, (count, target_sum))| Group { input: &inputs[g * d..(g + 1) * d], count, target_sum })
                        .collect();
                    model.sgd_step(&groups, batch.len(), lr)?
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            total += loss.as_f64();
            batches += 1;
            report.steps += 1;
        }
        report.epoch_losses.push(total / batches as f64);
    }
    if let Some(layer) = first {
        layer.finish(model);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DatasetSpec, Variant};

    fn small_run(image_space: bool) -> (MlpModel<f64>, TrainReport) {
        let spec = DatasetSpec::new(Variant::Dcm, 0.9, 300, 1, 4).unwrap();
        let (train_set, _) = generate_dataset(&spec).unwrap();
        let mut model = MlpModel::<f64>::new(&[crate::datagen::PIXELS, 16, 10], 2).unwrap();
        let config = TrainConfig { epochs: 3, batch_size: 32, lr: 0.1, decay_at: vec![2], ..TrainConfig::default() };
        let report = train_with(&mut model, &train_set.instances, &config, Some(image_space)).unwrap();
        (model, report)
    }

    #[test]
    fn image_space_engine_matches_direct() {
        let (a, ra) = small_run(false);
        let (b, rb) = small_run(true);
        assert_eq!(ra.steps, rb.steps);
        for (x, y) in ra.epoch_losses.iter().zip(&rb.epoch_losses) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        let params = |m: &MlpModel<f64>| m.weights().iter().chain(m.biases()).flatten().copied().collect::<Vec<_>>();
        let worst = params(&a).iter().zip(params(&b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "max parameter gap {worst}");
    }

    #[test]
    fn learning_rate_schedule() {
        let c = TrainConfig { lr: 0.4, decay_at: vec![2, 4], decay: 0.5, ..TrainConfig::default() };
        assert_eq!([c.lr_at(0), c.lr_at(1), c.lr_at(2), c.lr_at(3), c.lr_at(4), c.lr_at(9)], [0.4, 0.4, 0.2, 0.2, 0.1, 0.1]);
    }
}
