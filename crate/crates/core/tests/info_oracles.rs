use cfaug::datagen::{build_scm, DatasetSpec, Variant};
use cfaug::info::{
    cnf_exact, conditional_mi, entropy, invariance_decomposition, mutual_information, write_measure_csv, MeasureRow,
};
use cfaug::rng::substream;
use cfaug::scm::random::positive_dist;
use cfaug::Table;
use proptest::prelude::*;

/// `sum p ln(p / q)` written out directly.
fn oracle_mi(p: &[f64], ka: usize, kb: usize) -> f64 {
    let pa: Vec<f64> = (0..ka).map(|a| (0..kb).map(|b| p[a * kb + b]).sum()).collect();
    let pb: Vec<f64> = (0..kb).map(|b| (0..ka).map(|a| p[a * kb + b]).sum()).collect();
    let mut s = 0.0;
    for a in 0..ka {
        for b in 0..kb {
            let v = p[a * kb + b];
            if v > 0.0 {
                s += v * (v / (pa[a] * pb[b])).ln();
            }
        }
    }
    s
}

/// `H(A,C) + H(B,C) - H(A,B,C) - H(C)`.
fn oracle_cmi(p: &[f64], ka: usize, kb: usize, kc: usize) -> f64 {
    let h = |v: &[f64]| -v.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    let mut ac = vec![0.0; ka * kc];
    let mut bc = vec![0.0; kb * kc];
    let mut c = vec![0.0; kc];
    for a in 0..ka {
        for b in 0..kb {
            for k in 0..kc {
                let v = p[(a * kb + b) * kc + k];
                ac[a * kc + k] += v;
                bc[b * kc + k] += v;
                c[k] += v;
            }
        }
    }
    h(&ac) + h(&bc) - h(p) - h(&c)
}

fn random_table(seed: u64, cards: &[usize]) -> Table {
    let n: usize = cards.iter().product();
    let names = ["a", "b", "c"][..cards.len()].iter().map(|s| s.to_string()).collect();
    Table::new(names, cards.to_vec(), positive_dist(&mut substream(seed, &[1]), n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mutual_information_matches_definition(seed in any::<u64>(), ka in 2usize..5, kb in 2usize..5) {
        let t = random_table(seed, &[ka, kb]);
        prop_assert!((mutual_information(&t).unwrap() - oracle_mi(t.probs(), ka, kb)).abs() < 1e-12);
    }

    #[test]
    fn conditional_mi_matches_entropy_form(seed in any::<u64>(), ka in 2usize..4, kb in 2usize..4, kc in 2usize..4) {
        let t = random_table(seed, &[ka, kb, kc]);
        prop_assert!((conditional_mi(&t).unwrap() - oracle_cmi(t.probs(), ka, kb, kc)).abs() < 1e-12);
    }

    #[test]
    fn decomposition_identity(seed in any::<u64>(), ki in 2usize..5, k0 in 2usize..5, ky in 2usize..5) {
        let t = random_table(seed, &[ki, k0, ky]);
        let d = invariance_decomposition(&t).unwrap();
        prop_assert!(d.residual() <= 1e-9);
        // I(Zi; Z0, Yhat) by flattening (Z0, Yhat) into one variable.
        prop_assert!((d.term1 - oracle_mi(t.probs(), ki, k0 * ky)).abs() < 1e-12);
        prop_assert!((d.mi - oracle_mi(t.marginal(&["a", "b"]).unwrap().probs(), ki, k0)).abs() < 1e-12);
        prop_assert!(d.term1 >= -1e-15);
    }
}

#[test]
fn uniform_entropy_is_log_cardinality() {
    let t = Table::new(vec!["x".into()], vec![7], vec![1.0 / 7.0; 7]).unwrap();
    assert!((entropy(&t) - 7f64.ln()).abs() < 1e-12);
}

#[test]
fn gate_model_confounding_closed_form() {
    let k = 10.0f64;
    for r in [0.0, 0.1, 0.2, 0.5, 0.9, 0.95, 1.0] {
        let pm = r + (1.0 - r) / k;
        let po = (1.0 - r) / k;
        let xl = |p: f64| if p > 0.0 { p * p.ln() } else { 0.0 };
        let closed = 2.0 * (k.ln() + xl(pm) + (k - 1.0) * xl(po));
        let scm = build_scm(&DatasetSpec::new(Variant::Dcm, r, 1, 1, 0).unwrap()).unwrap();
        for style in ["fg", "bg"] {
            let exact = cnf_exact(&scm, "digit", style).unwrap();
            assert!((exact - closed).abs() <= 1e-9, "r={r}: {exact} vs {closed}");
        }
    }
}

#[test]
fn closed_form_is_near_published_table() {
    let published = [(0.10, 0.072), (0.20, 0.249), (0.50, 1.244), (0.90, 3.585), (0.95, 4.041)];
    for (r, value) in published {
        let closed = cfaug::datagen::gate_cnf_closed_form(r, 10);
        assert!((closed - value).abs() <= 0.03, "r={r}: {closed} vs {value}");
    }
}

#[test]
fn measure_csv_header_is_stable() {
    let rows = vec![MeasureRow {
        variant: "cm".into(),
        r: 0.5,
        n_samples: 10,
        pair: "digit:fg".into(),
        cnf_empirical: 1.0,
        cnf_exact: 1.25,
        mi: 0.5,
    }];
    let mut out = Vec::new();
    write_measure_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "variant,r,n_samples,pair,cnf_empirical,cnf_exact,mi");
    assert_eq!(text.lines().count(), 2);
}
