//! Intervention-derived augmentation.
//!
//! Every strategy produces a list of new instances `D'` from a training set
//! `D`; [`augment`] returns `D ∪ D'`. Counterfactual strategies first pick
//! the heavily populated `(digit, style)` cells, then run abduction, action
//! and prediction on each instance in those cells using the exact renderer.

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    build_scm, invert, render, unconfounded_subset, AugmentationRecord, Dataset, Factor, FactorTuple, Image, Instance,
    Origin, Relabeling, Renderer, Thickness, HEIGHT, NUM_CLASSES, WIDTH,
};
use crate::rng::{substream, tag, StreamRng};
use crate::{Error, Result};

/// Allowed values for [`AugmentConfig::alpha_cap`].
pub const ALPHA_CAPS: [usize; 6] = [1000, 2000, 5000, 10000, 20000, 50000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    DoZ0,
    DoZcnf,
    DoZ0AndZcnf,
    DoX,
    ReplicateUnconfounded,
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::DoZ0,
        Strategy::DoZcnf,
        Strategy::DoZ0AndZcnf,
        Strategy::DoX,
        Strategy::ReplicateUnconfounded,
        Strategy::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::DoZ0 => "do-z0",
            Strategy::DoZcnf => "do-zcnf",
            Strategy::DoZ0AndZcnf => "do-z0-zcnf",
            Strategy::DoX => "do-x",
            Strategy::ReplicateUnconfounded => "replicate-uc",
            Strategy::None => "none",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Minimum fraction of `D` a `(digit, style)` cell must exceed.
    pub tau: f64,
    pub per_instance: usize,
    /// Upper bound on `|D'|`; `None` keeps everything.
    pub alpha_cap: Option<usize>,
    /// Range of patch side lengths as fractions of the image side.
    pub patch: (f64, f64),
    pub seed: u64,
    /// Never resample the digit to its current value.
    pub exclude_current: bool,
    /// Drop emissions whose factor tuple already occurs in `D`.
    pub dedup: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { tau: 0.05, per_instance: 1, alpha_cap: None, patch: (0.25, 0.5), seed: 0, exclude_current: true, dedup: true }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau = {} is outside [0, 1]", self.tau));
        }
        if self.per_instance == 0 {
            return bad("per_instance must be at least 1".into());
        }
        if self.exclude_current && self.per_instance >= NUM_CLASSES {
            return bad(format!("per_instance = {} leaves no unused digit values", self.per_instance));
        }
        if let Some(cap) = self.alpha_cap {
            if !ALPHA_CAPS.contains(&cap) {
                return bad(format!("alpha_cap {cap} is not one of {ALPHA_CAPS:?}"));
            }
        }
        let (lo, hi) = self.patch;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("patch range ({lo}, {hi}) must satisfy 0 < min <= max <= 1"));
        }
        Ok(())
    }
}

/// Recover the factors behind `instance`, insisting that the stored
/// provenance and the decoded image agree.
pub fn abduct(instance: &Instance) -> Result<FactorTuple> {
    let stored = instance.factors;
    let decoded = invert(&instance.image, stored.variant()?)?;
    if decoded != stored {
        return Err(Error::AbductionMismatch { stored: stored.to_string(), decoded: decoded.to_string() });
    }
    Ok(decoded)
}

/// Set factors on an abducted tuple; everything else is kept.
fn act(mut z: FactorTuple, assignments: &[(Factor, u8)]) -> Result<FactorTuple> {
    for &(f, v) in assignments {
        if v as usize >= f.cardinality() {
            return Err(Error::InvalidArgument(format!("{f} = {v} is out of range")));
        }
        if z.get(f).is_none() {
            return Err(Error::MissingFactor(f.name().into()));
        }
        z = z.with(f, v);
    }
    Ok(z)
}

fn predict(z: FactorTuple) -> Instance {
    Instance {
        image: render(&z),
        label: z.digit,
        soft_label: None,
        factors: z,
        origin: Origin::Counterfactual,
        donor: None,
    }
}

/// The counterfactual of `instance` under `do(factor = value)`.
pub fn counterfactual(instance: &Instance, factor: Factor, value: u8) -> Result<Instance> {
    counterfactual_many(instance, &[(factor, value)])
}

/// The counterfactual under a joint intervention on several factors.
pub fn counterfactual_many(instance: &Instance, assignments: &[(Factor, u8)]) -> Result<Instance> {
    Ok(predict(act(abduct(instance)?, assignments)?))
}

/// The same counterfactual computed in relabeled coordinates: abduct with
/// `g~ = g o h^-1`, act on `h(z)` with the relabeled value, and render with
/// `g~`. Identifiability means the image equals [`counterfactual`]'s.
pub fn relabeled_counterfactual(instance: &Instance, h: &Relabeling, factor: Factor, value: u8) -> Result<Image> {
    let g_tilde = Renderer::relabeled(h);
    let stored = h.apply(&instance.factors);
    let decoded = g_tilde.invert(&instance.image, instance.factors.variant()?)?;
    if decoded != stored {
        return Err(Error::AbductionMismatch { stored: stored.to_string(), decoded: decoded.to_string() });
    }
    if value as usize >= factor.cardinality() {
        return Err(Error::InvalidArgument(format!("{factor} = {value} is out of range")));
    }
    let value = h.factor_perm(factor).map_or(value, |p| p[value as usize]);
    Ok(g_tilde.render(&act(decoded, &[(factor, value)])?))
}

/// Cells of one style factor that pass the confounding filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSelection {
    pub factor: Factor,
    /// Selected `(digit, style value)` pairs in ascending order.
    pub cells: Vec<(u8, u8)>,
    /// Indices into `D` of the instances lying in a selected cell.
    pub members: Vec<usize>,
}

/// For each style factor, the `(digit, value)` cells holding more than
/// `tau · |D|` instances.
pub fn select_cells(dataset: &Dataset, tau: f64) -> Result<Vec<CellSelection>> {
    let n = dataset.len() as f64;
    let mut out = Vec::new();
    for &f in dataset.spec.variant.style_factors() {
        let mut counts = vec![0usize; NUM_CLASSES * f.cardinality()];
        let mut cell_of = Vec::with_capacity(dataset.len());
        for inst in &dataset.instances {
            let v = inst.factors.get(f).ok_or_else(|| Error::MissingFactor(f.name().into()))?;
            let c = inst.factors.digit as usize * f.cardinality() + v as usize;
            counts[c] += 1;
            cell_of.push(c);
        }
        let keep: Vec<bool> = counts.iter().map(|&c| c as f64 / n > tau).collect();
        let cells = (0..counts.len())
            .filter(|&c| keep[c])
            .map(|c| ((c / f.cardinality()) as u8, (c % f.cardinality()) as u8))
            .collect();
        let members = (0..dataset.len()).filter(|&i| keep[cell_of[i]]).collect();
        out.push(CellSelection { factor: f, cells, members });
    }
    Ok(out)
}

/// Sampler over one factor's marginal under the training model.
struct Marginal {
    weights: Vec<f64>,
}

impl Marginal {
    fn of(dataset: &Dataset, f: Factor) -> Result<Self> {
        let scm = build_scm(&dataset.spec)?;
        Ok(Self { weights: scm.exact_joint(&[f.name()])?.probs().to_vec() })
    }

    /// `k` distinct values, none equal to `exclude`.
    fn draw_distinct(&self, rng: &mut StreamRng, k: usize, exclude: Option<u8>) -> Result<Vec<u8>> {
        let mut w = self.weights.clone();
        if let Some(e) = exclude {
            w[e as usize] = 0.0;
        }
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let d = WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(format!("cannot sample marginal: {e}")))?;
            let v = d.sample(rng);
            w[v] = 0.0;
            out.push(v as u8);
        }
        Ok(out)
    }

    fn draw(&self, rng: &mut StreamRng) -> Result<u8> {
        let d = WeightedIndex::new(&self.weights).map_err(|e| Error::InvalidArgument(format!("cannot sample marginal: {e}")))?;
        Ok(d.sample(rng) as u8)
    }
}

/// Shared driver for the three counterfactual strategies: filter, abduct,
/// let `intervene` choose the actions, dedup, cap and render.
fn filtered_counterfactuals(
    dataset: &Dataset,
    config: &AugmentConfig,
    mut intervene: impl FnMut(&FactorTuple, &mut StreamRng) -> Result<Vec<Vec<(Factor, u8)>>>,
) -> Result<Vec<Instance>> {
    config.validate()?;
    let seen: HashSet<[u8; 6]> =
        if config.dedup { dataset.instances.iter().map(|i| i.factors.key()).collect() } else { HashSet::new() };
    let mut emitted: Vec<(usize, usize, FactorTuple)> = Vec::new();
    let mut abducted: Vec<Option<FactorTuple>> = vec![None; dataset.len()];
    for (fi, sel) in select_cells(dataset, config.tau)?.iter().enumerate() {
        for &src in &sel.members {
            let z = match abducted[src] {
                Some(z) => z,
                None => *abducted[src].insert(abduct(&dataset.instances[src])?),
            };
            let mut rng = substream(config.seed, &[tag::COUNTERFACTUAL, src as u64, fi as u64]);
            for (k, actions) in intervene(&z, &mut rng)?.into_iter().enumerate() {
                let z2 = act(z, &actions)?;
                if !seen.contains(&z2.key()) {
                    emitted.push((src, fi * config.per_instance + k, z2));
                }
            }
        }
    }
    emitted.sort_by_key(|&(src, e, _)| (src, e));
    if let Some(cap) = config.alpha_cap {
        if emitted.len() > cap {
            let mut rng = substream(config.seed, &[tag::ALPHA_CAP]);
            let mut keep = sample_indices(&mut rng, emitted.len(), cap).into_vec();
            keep.sort_unstable();
            emitted = keep.into_iter().map(|i| emitted[i]).collect();
        }
    }
    Ok(emitted.into_iter().map(|(_, _, z)| predict(z)).collect())
}

/// Counterfactuals that move the digit away from its style (`do(Z_0)`).
pub fn algorithm1_do_z0(dataset: &Dataset, config: &AugmentConfig) -> Result<Vec<Instance>> {
    let digit = Marginal::of(dataset, Factor::Digit)?;
    filtered_counterfactuals(dataset, config, |z, rng| {
        let exclude = config.exclude_current.then_some(z.digit);
        let values = if config.exclude_current {
            digit.draw_distinct(rng, config.per_instance, exclude)?
        } else {
            (0..config.per_instance).map(|_| digit.draw(rng)).collect::<Result<_>>()?
        };
        Ok(values.into_iter().map(|d| vec![(Factor::Digit, d)]).collect())
    })
}

/// Counterfactuals that resample every style factor and keep the digit.
pub fn do_zcnf(dataset: &Dataset, config: &AugmentConfig) -> Result<Vec<Instance>> {
    let styles = style_marginals(dataset)?;
    filtered_counterfactuals(dataset, config, |_, rng| {
        (0..config.per_instance)
            .map(|_| styles.iter().map(|(f, m)| Ok((*f, m.draw(rng)?))).collect())
            .collect()
    })
}

/// Fresh draws of the digit and every style factor, with the training
/// thickness rule applied to the new digit.
pub fn do_z0_and_zcnf(dataset: &Dataset, config: &AugmentConfig) -> Result<Vec<Instance>> {
    let digit = Marginal::of(dataset, Factor::Digit)?;
    let styles = style_marginals(dataset)?;
    filtered_counterfactuals(dataset, config, |z, rng| {
        let digits = if config.exclude_current {
            digit.draw_distinct(rng, config.per_instance, Some(z.digit))?
        } else {
            (0..config.per_instance).map(|_| digit.draw(rng)).collect::<Result<_>>()?
        };
        digits
            .into_iter()
            .map(|d| {
                let mut a = vec![(Factor::Digit, d), (Factor::Thickness, Thickness::train_rule(d).index())];
                for (f, m) in &styles {
                    a.push((*f, m.draw(rng)?));
                }
                Ok(a)
            })
            .collect()
    })
}

fn style_marginals(dataset: &Dataset) -> Result<Vec<(Factor, Marginal)>> {
    dataset.spec.variant.style_factors().iter().map(|&f| Ok((f, Marginal::of(dataset, f)?))).collect()
}

/// Paste a `pw × ph` block of `donor` into `base` at `(x0, y0)`.
pub fn paste_patch(base: &Image, donor: &Image, x0: usize, y0: usize, pw: usize, ph: usize) -> Image {
    let mut out = base.clone();
    for y in y0..(y0 + ph).min(HEIGHT) {
        for x in x0..(x0 + pw).min(WIDTH) {
            out.set_pixel(x, y, donor.pixel(x, y));
        }
    }
    out
}

/// Area-weighted label mix. Ties in the hard label go to the base.
fn mixed_label(base: u8, donor: u8, area: f32) -> ([f32; NUM_CLASSES], u8) {
    let mut soft = [0.0f32; NUM_CLASSES];
    soft[base as usize] += 1.0 - area;
    soft[donor as usize] += area;
    let label = if soft[donor as usize] > soft[base as usize] { donor } else { base };
    (soft, label)
}

/// Mix two instance images with a random rectangular patch (`do(X)`).
///
/// Emits `alpha_cap` instances, or `|D|` when there is no cap.
pub fn do_x_patchmix(dataset: &Dataset, config: &AugmentConfig) -> Result<Vec<Instance>> {
    config.validate()?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("patch mixing needs at least 2 instances, got {n}")));
    }
    let count = config.alpha_cap.unwrap_or(n);
    let (lo, hi) = config.patch;
    (0..count)
        .map(|e| {
            let mut rng = substream(config.seed, &[tag::PATCHMIX, e as u64]);
            let b = rng.random_range(0..n);
            let mut d = rng.random_range(0..n - 1);
            if d >= b {
                d += 1;
            }
            let side = |rng: &mut StreamRng, len: usize| ((rng.random_range(lo..=hi) * len as f64).round() as usize).min(len);
            let pw = side(&mut rng, WIDTH);
            let ph = side(&mut rng, HEIGHT);
            let x0 = rng.random_range(0..=WIDTH - pw);
            let y0 = rng.random_range(0..=HEIGHT - ph);
            Ok(mix_pair(&dataset.instances[b], &dataset.instances[d], x0, y0, pw, ph))
        })
        .collect()
}

/// The mixed instance for one patch placement.
pub fn mix_pair(base: &Instance, donor: &Instance, x0: usize, y0: usize, pw: usize, ph: usize) -> Instance {
    let area = (pw * ph) as f32 / (WIDTH * HEIGHT) as f32;
    let (soft, label) = mixed_label(base.hard_label(), donor.hard_label(), area);
    Instance {
        image: paste_patch(&base.image, &donor.image, x0, y0, pw, ph),
        label,
        soft_label: Some(soft),
        factors: base.factors,
        origin: Origin::Patchmix,
        donor: Some(donor.factors),
    }
}

/// Cyclic copies of the unconfounded subset, `|D|` of them.
pub fn replicate_unconfounded(dataset: &Dataset, _config: &AugmentConfig) -> Result<Vec<Instance>> {
    let subset = unconfounded_subset(dataset)?;
    Ok(subset
        .iter()
        .cycle()
        .take(dataset.len())
        .map(|i| Instance { origin: Origin::Replica, ..i.clone() })
        .collect())
}

/// The new instances a strategy adds to `dataset`.
pub fn emissions(dataset: &Dataset, strategy: Strategy, config: &AugmentConfig) -> Result<Vec<Instance>> {
    config.validate()?;
    match strategy {
        Strategy::DoZ0 => algorithm1_do_z0(dataset, config),
        Strategy::DoZcnf => do_zcnf(dataset, config),
        Strategy::DoZ0AndZcnf => do_z0_and_zcnf(dataset, config),
        Strategy::DoX => do_x_patchmix(dataset, config),
        Strategy::ReplicateUnconfounded => replicate_unconfounded(dataset, config),
        Strategy::None => Ok(Vec::new()),
    }
}

/// `D ∪ D'`, with the derivation recorded on the result.
pub fn augment(dataset: &Dataset, strategy: Strategy, config: &AugmentConfig) -> Result<Dataset> {
    if strategy == Strategy::None {
        config.validate()?;
        return Ok(dataset.clone());
    }
    let added = emissions(dataset, strategy, config)?;
    let record = AugmentationRecord {
        strategy: strategy.name().into(),
        config: serde_json::to_value(config)?,
        source_digest: dataset.digest()?,
        n_source: dataset.len(),
        n_added: added.len(),
    };
    let mut instances = dataset.instances.clone();
    instances.extend(added);
    Ok(Dataset { instances, augmentation: Some(record), ..dataset.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DatasetSpec, Variant};

    fn small(variant: Variant, r: f64, n: usize) -> Dataset {
        generate_dataset(&DatasetSpec::new(variant, r, n, 10, 4).unwrap()).unwrap().0
    }

    #[test]
    fn null_intervention_is_identity() {
        let d = small(Variant::Dcm, 0.5, 20);
        for inst in &d.instances {
            let cf = counterfactual(inst, Factor::Fg, inst.factors.fg.unwrap()).unwrap();
            assert_eq!(cf.image, inst.image);
            let cf = counterfactual(inst, Factor::Digit, inst.factors.digit).unwrap();
            assert_eq!(cf.image, inst.image);
        }
    }

    #[test]
    fn tampered_provenance_is_rejected() {
        let d = small(Variant::Cm, 0.5, 2);
        let mut inst = d.instances[0].clone();
        inst.factors.fg = Some((inst.factors.fg.unwrap() + 1) % 10);
        assert!(matches!(counterfactual(&inst, Factor::Digit, 3), Err(Error::AbductionMismatch { .. })));
    }

    #[test]
    fn out_of_range_value() {
        let d = small(Variant::Cm, 0.5, 2);
        assert!(counterfactual(&d.instances[0], Factor::Fg, 10).is_err());
        assert!(matches!(counterfactual(&d.instances[0], Factor::Bg, 1), Err(Error::MissingFactor(_))));
    }

    #[test]
    fn config_bounds() {
        let ok = AugmentConfig::default();
        ok.validate().unwrap();
        for bad in [
            AugmentConfig { tau: 1.5, ..ok.clone() },
            AugmentConfig { per_instance: 0, ..ok.clone() },
            AugmentConfig { alpha_cap: Some(7), ..ok.clone() },
            AugmentConfig { patch: (0.0, 0.5), ..ok.clone() },
            AugmentConfig { patch: (0.6, 0.5), ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn full_tau_emits_nothing() {
        let d = small(Variant::Cm, 0.95, 300);
        let cfg = AugmentConfig { tau: 1.0, ..Default::default() };
        assert!(algorithm1_do_z0(&d, &cfg).unwrap().is_empty());
    }

    #[test]
    fn mixed_label_limits() {
        assert_eq!(mixed_label(3, 7, 0.0), ({ let mut s = [0.0; 10]; s[3] = 1.0; s }, 3));
        assert_eq!(mixed_label(3, 7, 1.0).1, 7);
        assert_eq!(mixed_label(3, 7, 0.5).1, 3);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
    }
}
