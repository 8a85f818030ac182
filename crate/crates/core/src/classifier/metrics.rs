use serde::{Deserialize, Serialize};

use super::mlp::{log_sum_exp, MlpModel};
use super::train::normalize;
use crate::datagen::{Factor, Instance, NUM_CLASSES};
use crate::real::Real;
use crate::scm::DistTable;
use crate::{Error, Result};

const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    /// Accuracy within each true class; NaN for absent classes.
    pub per_class_accuracy: Vec<f64>,
    pub mean_loss: f64,
}

fn logits_for<T: Real>(model: &MlpModel<T>, data: &[Instance]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(data.len() * model.output_dim());
    let mut x = Vec::new();
    for chunk in data.chunks(EVAL_CHUNK) {
        x.clear();
        for inst in chunk {
            if inst.image.pixels().len() != model.input_dim() {
                return Err(Error::Dimension { expected: model.input_dim(), got: inst.image.pixels().len() });
            }
            normalize(inst.image.pixels(), &mut x);
        }
        out.extend(model.logits(&x, chunk.len())?);
    }
    Ok(out)
}

fn argmax<T: Real>(row: &[T]) -> u8 {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best as u8
}

/// Most probable class for each instance.
pub fn predict<T: Real>(model: &MlpModel<T>, data: &[Instance]) -> Result<Vec<u8>> {
    let k = model.output_dim();
    Ok(logits_for(model, data)?.chunks(k).map(argmax).collect())
}

pub fn evaluate<T: Real>(model: &MlpModel<T>, data: &[Instance]) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty set".into()));
    }
    let k = model.output_dim();
    let logits = logits_for(model, data)?;
    let mut correct = vec![0usize; NUM_CLASSES];
    let mut seen = vec![0usize; NUM_CLASSES];
    let mut loss = 0.0;
    for (inst, row) in data.iter().zip(logits.chunks(k)) {
        let y = inst.hard_label() as usize;
        seen[y] += 1;
        if argmax(row) as usize == y {
            correct[y] += 1;
        }
        let lse = log_sum_exp(row).as_f64();
        loss -= inst.target().iter().zip(row).map(|(&t, &z)| t as f64 * (z.as_f64() - lse)).sum::<f64>();
    }
    let n = data.len();
    Ok(Metrics {
        n,
        accuracy: correct.iter().sum::<usize>() as f64 / n as f64,
        per_class_accuracy: correct.iter().zip(&seen).map(|(&c, &s)| c as f64 / s as f64).collect(),
        mean_loss: loss / n as f64,
    })
}

/// Empirical joint over `(factor, digit, y_hat)` on `data`.
pub fn predicted_joint<T: Real>(model: &MlpModel<T>, data: &[Instance], factor: Factor) -> Result<DistTable<f64>> {
    let preds = predict(model, data)?;
    let kz = factor.cardinality();
    let mut w = vec![0.0; kz * NUM_CLASSES * NUM_CLASSES];
    for (inst, &yh) in data.iter().zip(&preds) {
        let z = inst.factors.get(factor).ok_or_else(|| Error::MissingFactor(factor.name().into()))? as usize;
        w[(z * NUM_CLASSES + inst.factors.digit as usize) * NUM_CLASSES + yh as usize] += 1.0;
    }
    DistTable::from_weights(vec![factor.name().into(), "digit".into(), "y_hat".into()], vec![kz, NUM_CLASSES, NUM_CLASSES], w)
}
