use std::collections::HashMap;

use cfaug::augment::{
    algorithm1_do_z0, augment, counterfactual, do_x_patchmix, do_z0_and_zcnf, do_zcnf, mix_pair,
    replicate_unconfounded, select_cells, AugmentConfig, Strategy,
};
use cfaug::datagen::{
    generate_dataset, glyph_mask, CanonicalMap, Dataset, DatasetSpec, Factor, Instance, Origin, Thickness, Variant, HEIGHT, WIDTH,
};
use cfaug::info::{mutual_information, JointCounts};
use cfaug::rng::substream;
use cfaug::Error;
use rand::Rng;

fn train(variant: Variant, r: f64, n: usize, seed: u64) -> Dataset {
    generate_dataset(&DatasetSpec::new(variant, r, n, 1, seed).unwrap()).unwrap().0
}

fn pair_mi(instances: &[Instance], f: Factor) -> f64 {
    let mut c = JointCounts::new(&["digit", f.name()], &[10, 10]).unwrap();
    for i in instances {
        c.add(&[i.factors.digit as usize, i.factors.get(f).unwrap() as usize]);
    }
    mutual_information(&c.to_table::<f64>().unwrap()).unwrap()
}

#[test]
fn double_intervention_restores_the_image() {
    let d = train(Variant::Dcm, 0.5, 100, 1);
    let mut rng = substream(2, &[]);
    for inst in &d.instances {
        for f in [Factor::Fg, Factor::Bg, Factor::Digit] {
            let v = rng.random_range(0..10u8);
            let there = counterfactual(inst, f, v).unwrap();
            let back = counterfactual(&there, f, inst.factors.get(f).unwrap()).unwrap();
            assert_eq!(back.image, inst.image);
        }
    }
}

#[test]
fn counterfactual_changes_only_its_factor() {
    let d = train(Variant::Wlm, 0.5, 60, 3);
    for inst in &d.instances {
        for f in [Factor::Digit, Factor::FgTex, Factor::BgTex] {
            let v = (inst.factors.get(f).unwrap() + 3) % 10;
            let cf = counterfactual(inst, f, v).unwrap();
            assert_eq!(cf.origin, Origin::Counterfactual);
            assert_eq!(cf.factors, inst.factors.with(f, v));
            assert_eq!(cf.label, cf.factors.digit);
        }
    }
}

#[test]
fn digit_change_keeps_shared_background() {
    let d = train(Variant::Dcm, 0.5, 30, 4);
    for inst in &d.instances {
        let cf = counterfactual(inst, Factor::Digit, 7).unwrap();
        let z = inst.factors;
        let old = glyph_mask(z.digit, z.thickness, z.morph);
        let new = glyph_mask(7, z.thickness, z.morph);
        let mut shared = 0;
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                if !old[y * WIDTH + x] && !new[y * WIDTH + x] {
                    assert_eq!(inst.image.pixel(x, y), cf.image.pixel(x, y));
                    shared += 1;
                }
            }
        }
        assert!(shared > 600);
    }
}

#[test]
fn filter_selects_the_canonical_cells() {
    let d = train(Variant::Cm, 0.95, 60_000, 5);
    let sel = select_cells(&d, 0.05).unwrap();
    let canon = CanonicalMap::default();
    assert_eq!(sel.len(), 1);
    let expected: Vec<(u8, u8)> = (0..10).map(|k| (k, canon.fg[k as usize])).collect();
    assert_eq!(sel[0].cells, expected);
}

fn loose() -> AugmentConfig {
    AugmentConfig { exclude_current: false, dedup: false, ..Default::default() }
}

#[test]
fn emitted_sets_are_unconfounded() {
    let d = train(Variant::Dcm, 0.95, 20_000, 6);
    for (name, emitted) in [
        ("do-z0", algorithm1_do_z0(&d, &loose()).unwrap()),
        ("do-zcnf", do_zcnf(&d, &loose()).unwrap()),
        ("do-z0-zcnf", do_z0_and_zcnf(&d, &loose()).unwrap()),
    ] {
        assert!(emitted.len() >= 10_000, "{name}: {}", emitted.len());
        for f in [Factor::Fg, Factor::Bg] {
            let mi = pair_mi(&emitted, f);
            assert!(mi < 0.05, "{name} {f}: {mi}");
        }
    }
}

#[test]
fn joint_resampling_is_product_form() {
    let d = train(Variant::Dcm, 0.95, 12_000, 7);
    let emitted = do_z0_and_zcnf(&d, &loose()).unwrap();
    assert!(emitted.len() >= 10_000);
    assert!(pair_mi(&emitted, Factor::Fg) < 0.02);
    assert!(emitted.iter().all(|i| i.factors.thickness == Thickness::train_rule(i.factors.digit)));
}

#[test]
fn default_exclusion_leaves_one_value_out() {
    let d = train(Variant::Cm, 1.0, 20_000, 8);
    let emitted = algorithm1_do_z0(&d, &AugmentConfig::default()).unwrap();
    let mi = pair_mi(&emitted, Factor::Fg);
    assert!((mi - (10.0f64 / 9.0).ln()).abs() < 0.01, "{mi}");
    assert!(emitted.iter().all(|i| i.factors.digit as usize != i.factors.fg.unwrap() as usize));
}

#[test]
fn style_resampling_keeps_digits_and_labels() {
    let d = train(Variant::Dcm, 0.95, 5_000, 9);
    let cfg = AugmentConfig { dedup: false, ..Default::default() };
    let emitted = do_zcnf(&d, &cfg).unwrap();
    let mut want = [0usize; 10];
    for sel in select_cells(&d, cfg.tau).unwrap() {
        for &i in &sel.members {
            want[d.instances[i].factors.digit as usize] += 1;
        }
    }
    let mut got = [0usize; 10];
    for i in &emitted {
        got[i.factors.digit as usize] += 1;
        assert_eq!(i.label, i.factors.digit);
    }
    assert_eq!(got, want);
}

#[test]
fn pooled_confounding_drops_under_digit_interventions() {
    let d = train(Variant::Dcm, 0.95, 20_000, 10);
    let orig = d.provenance_cnf(Factor::Fg).unwrap();
    let z0 = augment(&d, Strategy::DoZ0, &AugmentConfig::default()).unwrap();
    let pooled = z0.provenance_cnf(Factor::Fg).unwrap();
    assert!(pooled < 0.25 * orig, "{pooled} vs {orig}");
    assert!(pooled < 1.0);
    let cnf = augment(&d, Strategy::DoZcnf, &AugmentConfig::default()).unwrap();
    assert!(cnf.provenance_cnf(Factor::Fg).unwrap() < 0.25 * orig);
}

#[test]
fn patch_mixing_keeps_the_source_joint() {
    let d = train(Variant::Dcm, 0.95, 20_000, 11);
    let emitted = do_x_patchmix(&d, &AugmentConfig { seed: 4, ..Default::default() }).unwrap();
    assert_eq!(emitted.len(), d.len());
    let joint = |it: &mut dyn Iterator<Item = (u8, u8)>| {
        let mut m: HashMap<(u8, u8), f64> = HashMap::new();
        let mut n = 0.0;
        for k in it {
            *m.entry(k).or_default() += 1.0;
            n += 1.0;
        }
        m.values_mut().for_each(|v| *v /= n);
        m
    };
    let src = joint(&mut d.instances.iter().map(|i| (i.factors.digit, i.factors.fg.unwrap())));
    let mixed = joint(&mut emitted.iter().flat_map(|i| i.parents()).map(|t| (t.digit, t.fg.unwrap())));
    let keys: std::collections::HashSet<_> = src.keys().chain(mixed.keys()).collect();
    let tv: f64 = 0.5 * keys.iter().map(|k| (src.get(k).unwrap_or(&0.0) - mixed.get(k).unwrap_or(&0.0)).abs()).sum::<f64>();
    assert!(tv < 0.02, "tv {tv}");
    let pooled = augment(&d, Strategy::DoX, &AugmentConfig { seed: 4, ..Default::default() }).unwrap();
    let (a, b) = (d.provenance_cnf(Factor::Fg).unwrap(), pooled.provenance_cnf(Factor::Fg).unwrap());
    assert!((a - b).abs() < 0.05 * a);
    for i in &emitted {
        let s: f32 = i.soft_label.unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert_eq!(i.origin, Origin::Patchmix);
    }
}

#[test]
fn patch_limits() {
    let d = train(Variant::Cm, 0.5, 2, 12);
    let (a, b) = (&d.instances[0], &d.instances[1]);
    let none = mix_pair(a, b, 5, 5, 0, 0);
    assert_eq!(none.image, a.image);
    assert_eq!(none.label, a.label);
    let full = mix_pair(a, b, 0, 0, WIDTH, HEIGHT);
    assert_eq!(full.image, b.image);
    assert_eq!(full.label, b.label);
}

#[test]
fn replication_fills_to_source_size() {
    let d = train(Variant::Dcm, 0.9, 3_001, 13);
    let rep = replicate_unconfounded(&d, &AugmentConfig::default()).unwrap();
    assert_eq!(rep.len(), d.len());
    let subset = cfaug::datagen::unconfounded_subset(&d).unwrap();
    let s = subset.len();
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for (k, inst) in rep.iter().enumerate() {
        assert_eq!(inst.factors, subset[k % s].factors);
        assert_eq!(inst.origin, Origin::Replica);
        *counts.entry(inst.image.pixels().to_vec()).or_default() += 1;
    }
    let fully_confounded = train(Variant::Dcm, 1.0, 100, 13);
    assert!(matches!(replicate_unconfounded(&fully_confounded, &AugmentConfig::default()), Err(Error::EmptySubset)));
}

#[test]
fn replication_counts_are_floor_or_ceil() {
    let d = train(Variant::Cm, 0.5, 1_000, 14);
    let subset_len = cfaug::datagen::unconfounded_indices(&d).unwrap().len();
    let rep = replicate_unconfounded(&d, &AugmentConfig::default()).unwrap();
    let (lo, hi) = (d.len() / subset_len, d.len().div_ceil(subset_len));
    let mut per_source = vec![0usize; subset_len];
    for k in 0..rep.len() {
        per_source[k % subset_len] += 1;
    }
    assert!(per_source.iter().all(|&c| c == lo || c == hi));
}

#[test]
fn augment_is_union_and_deterministic() {
    let d = train(Variant::Dcm, 0.95, 2_000, 15);
    assert_eq!(augment(&d, Strategy::None, &AugmentConfig::default()).unwrap(), d);
    for s in [Strategy::DoZ0, Strategy::DoZcnf, Strategy::DoZ0AndZcnf, Strategy::DoX, Strategy::ReplicateUnconfounded] {
        let cfg = AugmentConfig { seed: 21, ..Default::default() };
        let a = augment(&d, s, &cfg).unwrap();
        let b = augment(&d, s, &cfg).unwrap();
        assert_eq!(a, b, "{s}");
        assert_eq!(&a.instances[..d.len()], &d.instances[..]);
        assert_eq!(a.augmentation.as_ref().unwrap().n_added, a.len() - d.len());
    }
}

#[test]
fn cap_truncates_keeping_order() {
    let d = train(Variant::Dcm, 0.95, 4_000, 16);
    let full = algorithm1_do_z0(&d, &AugmentConfig::default()).unwrap();
    let capped = algorithm1_do_z0(&d, &AugmentConfig { alpha_cap: Some(1000), ..Default::default() }).unwrap();
    assert!(full.len() > 1000);
    assert_eq!(capped.len(), 1000);
    let mut it = full.iter();
    for c in &capped {
        assert!(it.any(|f| f == c), "capped output is not an ordered subsequence");
    }
}

#[test]
fn dedup_removes_tuples_present_in_source() {
    let d = train(Variant::Cm, 0.95, 4_000, 17);
    let seen: std::collections::HashSet<_> = d.instances.iter().map(|i| i.factors.key()).collect();
    let emitted = algorithm1_do_z0(&d, &AugmentConfig::default()).unwrap();
    assert!(emitted.iter().all(|i| !seen.contains(&i.factors.key())));
}
