use cfaug::info::{cnf_exact, conditional_mi, mutual_information};
use cfaug::rng::substream;
use cfaug::scm::random::{confounded_factors, confounded_triple, random_dag_scm};
use cfaug::scm::DEFAULT_CELL_CAP;
use cfaug::{Assignment, Error, Scm};
use proptest::prelude::*;

fn factor_names(scm: &Scm) -> Vec<String> {
    let r = scm.roles();
    r.causal.iter().chain(&r.confounded).cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn interventions_leave_other_factors_alone(seed in any::<u64>(), n_style in 2usize..=4) {
        let scm = confounded_factors(&mut substream(seed, &[1]), n_style, 5).unwrap();
        let names = factor_names(&scm);
        for zi in &names {
            let base = scm.exact_joint(&[zi]).unwrap();
            for zj in names.iter().filter(|z| *z != zi) {
                for v in 0..scm.cardinality(zj).unwrap() {
                    let p = scm.interventional_dist(&[zi], &Assignment::of([(zj.as_str(), v)])).unwrap();
                    prop_assert!(p.max_abs_diff(&base).unwrap() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn confounding_is_twice_mutual_information(seed in any::<u64>(), n_style in 2usize..=4) {
        let scm = confounded_factors(&mut substream(seed, &[2]), n_style, 5).unwrap();
        let names = factor_names(&scm);
        for (a, zi) in names.iter().enumerate() {
            for zj in &names[a + 1..] {
                let mi = mutual_information(&scm.exact_joint(&[zi, zj]).unwrap()).unwrap();
                let cnf = cnf_exact(&scm, zi, zj).unwrap();
                prop_assert!((cnf - 2.0 * mi).abs() <= 1e-9, "{cnf} vs 2*{mi}");
            }
        }
    }

    #[test]
    fn intervening_removes_confounding(seed in any::<u64>(), n_style in 2usize..=4) {
        let scm = confounded_factors(&mut substream(seed, &[3]), n_style, 5).unwrap();
        let styles = scm.roles().confounded.clone();
        let on_z0 = scm.intervene(&Assignment::of([("z0", 0)])).unwrap();
        let on_styles = scm.intervene(&Assignment::of(styles.iter().map(|s| (s.as_str(), 1)))).unwrap();
        for zi in &styles {
            prop_assert!(cnf_exact(&on_z0, "z0", zi).unwrap().abs() <= 1e-9);
            prop_assert!(cnf_exact(&on_styles, "z0", zi).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn adjustment_matches_surgery(seed in any::<u64>()) {
        let scm = confounded_triple(&mut substream(seed, &[4]), 4).unwrap();
        let kx = scm.cardinality("x").unwrap();
        for xv in 0..kx {
            for xb in 0..kx {
                let adj = scm.ace("x", xv, xb, "y", &["u"]).unwrap();
                let cut = scm.ace_by_surgery("x", xv, xb, "y").unwrap();
                prop_assert!((adj - cut).abs() <= 1e-9);
                if xv == xb {
                    prop_assert_eq!(adj, 0.0);
                }
            }
        }
    }

    #[test]
    fn d_separation_implies_numerical_independence(seed in any::<u64>()) {
        let mut rng = substream(seed, &[5]);
        let scm = random_dag_scm(&mut rng, 5, 3, 0.4).unwrap();
        let nodes: Vec<String> = scm.dag().nodes().to_vec();
        for x in &nodes {
            for y in nodes.iter().filter(|y| *y > x) {
                for s in nodes.iter().filter(|s| *s != x && *s != y) {
                    if scm.dag().d_separated(x, y, &[s]).unwrap() {
                        let cmi = conditional_mi(&scm.exact_joint(&[x, y, s]).unwrap()).unwrap();
                        prop_assert!(cmi <= 1e-9, "{x} _||_ {y} | {s} but I = {cmi}");
                    }
                }
                if scm.dag().d_separated(x, y, &[]).unwrap() {
                    prop_assert!(mutual_information(&scm.exact_joint(&[x, y]).unwrap()).unwrap() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>()) {
        let scm = random_dag_scm(&mut substream(seed, &[6]), 5, 4, 0.5).unwrap();
        let back = Scm::from_json(&scm.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &scm);
        prop_assert_eq!(back.to_json().unwrap(), scm.to_json().unwrap());
    }
}

#[test]
fn parents_of_treatment_are_admissible_on_random_graphs() {
    let mut checked = 0;
    for seed in 0..200u64 {
        let scm = random_dag_scm(&mut substream(seed, &[7]), 5, 3, 0.5).unwrap();
        let dag = scm.dag();
        let (x, y) = ("v1", "v4");
        let parents: Vec<&str> = dag.parents_of(dag.index_of(x).unwrap()).iter().map(|&i| dag.name(i)).collect();
        if !dag.backdoor_admissible(x, y, &parents).unwrap() {
            continue;
        }
        let kx = scm.cardinality(x).unwrap();
        let adj = scm.ace(x, kx - 1, 0, y, &parents).unwrap();
        let cut = scm.ace_by_surgery(x, kx - 1, 0, y).unwrap();
        assert!((adj - cut).abs() <= 1e-9);
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn inadmissible_set_is_refused() {
    let scm = confounded_triple(&mut substream(0, &[8]), 3).unwrap();
    assert!(matches!(scm.ace("x", 1, 0, "y", &[]), Err(Error::Inadmissible { .. })));
}

#[test]
fn sampling_frequencies_approach_the_exact_joint() {
    let scm = random_dag_scm(&mut substream(11, &[9]), 4, 3, 0.6).unwrap();
    let n = 40_000;
    let samples = scm.sample(n, 5);
    let exact = scm.exact_joint(&["v0", "v3"]).unwrap();
    let (k0, k3) = (exact.cards()[0], exact.cards()[1]);
    let mut freq = vec![0.0; k0 * k3];
    for s in &samples {
        freq[s.get("v0").unwrap() * k3 + s.get("v3").unwrap()] += 1.0 / n as f64;
    }
    let tv: f64 = 0.5 * freq.iter().zip(exact.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn oversized_joint_reports_its_size() {
    let scm = random_dag_scm(&mut substream(3, &[10]), 4, 3, 0.3).unwrap();
    let names: Vec<&str> = scm.dag().nodes().iter().map(String::as_str).collect();
    let cells: u128 = names.iter().map(|n| scm.cardinality(n).unwrap() as u128).product();
    match scm.exact_joint_capped(&names, cells - 1) {
        Err(Error::CapExceeded { cells: c, cap }) => {
            assert_eq!(cap, cells - 1);
            assert!(c >= cells);
        }
        other => panic!("expected cap error, got {other:?}"),
    }
    assert!(scm.exact_joint_capped(&names, DEFAULT_CELL_CAP).is_ok());
}
