use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::factors::{CanonicalMap, Factor, FactorTuple, Origin, Thickness, Variant, NUM_CLASSES, NUM_STYLES};
use super::render::{render, Image};
use crate::rng::{derive, substream, tag};
use crate::scm::{point_mass, Scm, ScmBuilder};
use crate::{Error, Result};

/// Stroke scalar used for every training image.
pub const TRAIN_MORPH: f32 = 0.9;
pub const TEST_MORPH_MEAN: f64 = 0.9;
pub const TEST_MORPH_SD: f64 = 0.2;
const TEST_MORPH_RANGE: (f64, f64) = (0.3, 1.5);

/// Root confounder shared by the digit and every style factor.
pub const CONFOUNDER_NODE: &str = "U_d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub variant: Variant,
    pub r: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(variant: Variant, r: f64, n_train: usize, n_test: usize, seed: u64) -> Result<Self> {
        let s = Self { variant, r, n_train, n_test, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidArgument(format!("r = {} is outside [0, 1]", self.r)));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("split sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labelled image with its generative provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub image: Image,
    pub label: u8,
    /// Present only for mixed images.
    pub soft_label: Option<[f32; NUM_CLASSES]>,
    pub factors: FactorTuple,
    pub origin: Origin,
    /// Second parent of a mixed image.
    pub donor: Option<FactorTuple>,
}

impl Instance {
    pub fn real(factors: FactorTuple) -> Self {
        Self { image: render(&factors), label: factors.digit, soft_label: None, factors, origin: Origin::Real, donor: None }
    }

    /// Target distribution: the soft label, or one-hot on the label.
    pub fn target(&self) -> [f32; NUM_CLASSES] {
        self.soft_label.unwrap_or_else(|| {
            let mut t = [0.0; NUM_CLASSES];
            t[self.label as usize] = 1.0;
            t
        })
    }

    /// Class used for hard-label scoring.
    pub fn hard_label(&self) -> u8 {
        match &self.soft_label {
            None => self.label,
            Some(s) => {
                let mut best = 0;
                for k in 1..NUM_CLASSES {
                    if s[k] > s[best] {
                        best = k;
                    }
                }
                best as u8
            }
        }
    }

    /// Factor tuples that generated this image (one, or two for mixes).
    pub fn parents(&self) -> impl Iterator<Item = &FactorTuple> {
        std::iter::once(&self.factors).chain(self.donor.as_ref())
    }
}

/// How an augmented dataset was derived from its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub strategy: String,
    pub config: serde_json::Value,
    pub source_digest: String,
    pub n_source: usize,
    pub n_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub split: Split,
    pub instances: Vec<Instance>,
    pub canonical: CanonicalMap,
    pub augmentation: Option<AugmentationRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Counts over `(digit, factor)` across every parent tuple.
    pub fn provenance_counts(&self, factor: Factor) -> Result<crate::info::JointCounts> {
        let mut c = crate::info::JointCounts::new(&["digit", factor.name()], &[NUM_CLASSES, factor.cardinality()])?;
        for inst in &self.instances {
            for t in inst.parents() {
                let v = t.get(factor).ok_or_else(|| Error::MissingFactor(factor.name().into()))?;
                c.add(&[t.digit as usize, v as usize]);
            }
        }
        Ok(c)
    }

    /// Plug-in CNF between digit and `factor` over the provenance.
    pub fn provenance_cnf(&self, factor: Factor) -> Result<f64> {
        crate::info::cnf_from_counts(&self.provenance_counts(factor)?)
    }
}

/// `2 I(digit; style)` for the gate model with `k` values and gate
/// probability `r`.
pub fn gate_cnf_closed_form(r: f64, k: usize) -> f64 {
    let kf = k as f64;
    let p_match = r + (1.0 - r) / kf;
    let p_other = (1.0 - r) / kf;
    let xlnx = |p: f64| if p > 0.0 { p * p.ln() } else { 0.0 };
    2.0 * (kf.ln() + xlnx(p_match) + (kf - 1.0) * xlnx(p_other))
}

fn gate_node(f: Factor) -> String {
    format!("G_{}", f.name())
}

fn free_node(f: Factor) -> String {
    format!("R_{}", f.name())
}

/// The confounded generative model for a dataset family.
///
/// `U_d` is a uniform root; each style factor copies the canonical value
/// of `U_d` when its Bernoulli(r) gate fires and an independent uniform
/// root otherwise. The digit copies `U_d`; thickness is thin for
/// `U_d <= 4` and thick otherwise, so in training data it follows the digit
/// without being caused by it.
pub fn build_scm(spec: &DatasetSpec) -> Result<Scm> {
    spec.validate()?;
    let canon = CanonicalMap::default();
    let mut b = ScmBuilder::new();
    b.root(CONFOUNDER_NODE, vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]).confounder(CONFOUNDER_NODE);
    for &f in spec.variant.style_factors() {
        b.root(&gate_node(f), vec![1.0 - spec.r, spec.r]);
        b.root(&free_node(f), vec![1.0 / NUM_STYLES as f64; NUM_STYLES]);
    }
    b.child("digit", NUM_CLASSES, &[CONFOUNDER_NODE], |pa| point_mass(NUM_CLASSES, pa[0]))
        .causal("digit");
    b.child("thickness", 2, &[CONFOUNDER_NODE], |pa| point_mass(2, Thickness::train_rule(pa[0] as u8).index() as usize));
    for &f in spec.variant.style_factors() {
        let (g, r) = (gate_node(f), free_node(f));
        b.child(f.name(), NUM_STYLES, &[CONFOUNDER_NODE, &g, &r], |pa| {
            let v = if pa[1] == 1 { canon.value(f, pa[0] as u8) as usize } else { pa[2] };
            point_mass(NUM_STYLES, v)
        })
        .confounded(f.name());
    }
    b.build()
}

fn tuple_from_row(scm: &Scm, variant: Variant, row: &[usize]) -> Result<FactorTuple> {
    let val = |name: &str| -> Result<u8> { Ok(row[scm.dag().index_of(name)?] as u8) };
    let mut t = FactorTuple {
        digit: val("digit")?,
        thickness: Thickness::from_index(val("thickness")?)?,
        morph: TRAIN_MORPH,
        fg: None,
        bg: None,
        fg_tex: None,
        bg_tex: None,
    };
    for &f in variant.style_factors() {
        t = t.with(f, val(f.name())?);
    }
    Ok(t)
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f32 {
    let n = Normal::new(TEST_MORPH_MEAN, TEST_MORPH_SD).expect("valid normal");
    loop {
        let v = n.sample(rng);
        if (TEST_MORPH_RANGE.0..=TEST_MORPH_RANGE.1).contains(&v) {
            return v as f32;
        }
    }
}

/// Generate the confounded training split and the unconfounded test split.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let train_scm = build_scm(spec)?;
    let train = train_scm
        .sample_rows(spec.n_train, derive(spec.seed, &[tag::TRAIN_SPLIT]))
        .iter()
        .map(|row| tuple_from_row(&train_scm, spec.variant, row).map(Instance::real))
        .collect::<Result<Vec<_>>>()?;

    let test_scm = build_scm(&DatasetSpec { r: 0.0, ..*spec })?;
    let test = test_scm
        .sample_rows(spec.n_test, derive(spec.seed, &[tag::TEST_SPLIT]))
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut t = tuple_from_row(&test_scm, spec.variant, row)?;
            let mut rng = substream(spec.seed, &[tag::TEST_MORPH, i as u64]);
            t.thickness = if rng.random_bool(0.5) { Thickness::Thick } else { Thickness::Thin };
            t.morph = truncated_normal(&mut rng);
            Ok(Instance::real(t))
        })
        .collect::<Result<Vec<_>>>()?;

    let make = |split, instances| Dataset {
        spec: *spec,
        split,
        instances,
        canonical: CanonicalMap::default(),
        augmentation: None,
    };
    Ok((make(Split::Train, train), make(Split::Test, test)))
}

/// Indices of real instances whose style deviates from the canonical map in
/// at least one factor.
pub fn unconfounded_indices(dataset: &Dataset) -> Result<Vec<usize>> {
    let idx: Vec<usize> = dataset
        .instances
        .iter()
        .enumerate()
        .filter(|(_, i)| i.origin == Origin::Real && !dataset.canonical.is_canonical(&i.factors, dataset.spec.variant))
        .map(|(k, _)| k)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(idx)
}

/// The unconfounded part of a training set.
pub fn unconfounded_subset(dataset: &Dataset) -> Result<Vec<Instance>> {
    Ok(unconfounded_indices(dataset)?.into_iter().map(|i| dataset.instances[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::cnf_exact;

    #[test]
    fn spec_bounds() {
        assert!(DatasetSpec::new(Variant::Cm, 1.2, 10, 10, 0).is_err());
        assert!(DatasetSpec::new(Variant::Cm, -0.1, 10, 10, 0).is_err());
        assert!(DatasetSpec::new(Variant::Cm, 0.5, 0, 10, 0).is_err());
        DatasetSpec::new(Variant::Cm, 1.0, 1, 1, 0).unwrap();
    }

    #[test]
    fn deterministic_gate() {
        let spec = DatasetSpec::new(Variant::Dcm, 1.0, 10, 10, 0).unwrap();
        let scm = build_scm(&spec).unwrap();
        let j = scm.exact_joint(&["digit", "fg"]).unwrap();
        let canon = CanonicalMap::default();
        let on_canon: f64 = (0..10).map(|d| j.get(&[d, canon.fg[d] as usize])).sum();
        assert!((on_canon - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_gate_no_confounding() {
        let spec = DatasetSpec::new(Variant::Cm, 0.0, 10, 10, 0).unwrap();
        let scm = build_scm(&spec).unwrap();
        assert!(cnf_exact(&scm, "digit", "fg").unwrap().abs() < 1e-12);
    }

    #[test]
    fn thickness_rule_on_train_split() {
        let spec = DatasetSpec::new(Variant::Cm, 0.95, 500, 50, 3).unwrap();
        let (train, test) = generate_dataset(&spec).unwrap();
        assert!(train.instances.iter().all(|i| i.factors.thickness == Thickness::train_rule(i.factors.digit)));
        assert!(train.instances.iter().all(|i| i.factors.morph == TRAIN_MORPH && i.label == i.factors.digit));
        assert!(test.instances.iter().all(|i| (0.3..=1.5).contains(&i.factors.morph)));
    }

    #[test]
    fn full_gate_leaves_no_unconfounded_data() {
        let spec = DatasetSpec::new(Variant::Dcm, 1.0, 200, 10, 1).unwrap();
        let (train, _) = generate_dataset(&spec).unwrap();
        assert!(matches!(unconfounded_subset(&train), Err(Error::EmptySubset)));
    }

    #[test]
    fn thickness_is_not_downstream_of_digit() {
        let spec = DatasetSpec::new(Variant::Cm, 0.95, 10, 10, 0).unwrap();
        let scm = build_scm(&spec).unwrap();
        let base = scm.exact_joint(&["thickness"]).unwrap();
        for d in 0..10 {
            let p = scm.interventional_dist(&["thickness"], &crate::Assignment::of([("digit", d)])).unwrap();
            assert!(p.max_abs_diff(&base).unwrap() < 1e-12);
        }
    }

    #[test]
    fn closed_form_endpoints() {
        assert!(gate_cnf_closed_form(0.0, 10).abs() < 1e-15);
        assert!((gate_cnf_closed_form(1.0, 10) - 2.0 * 10f64.ln()).abs() < 1e-12);
    }
}
