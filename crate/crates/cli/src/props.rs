//! `cfaug props`: the invariant suite over random models and instances.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use anyhow::{Context, Result};
use cfaug::augment::{counterfactual, relabeled_counterfactual};
use cfaug::classifier::gradient_check;
use cfaug::datagen::{invert, render, Relabeling, Renderer, Variant};
use cfaug::info::{cnf_exact, conditional_mi, invariance_decomposition, mutual_information};
use cfaug::rng::{substream, tag, StreamRng};
use cfaug::scm::random::{confounded_factors, confounded_triple, positive_dist, random_dag_scm};
use cfaug::{Assignment, Instance, Mlp64, Scm, Table};
use rand::Rng;
use serde::Serialize;

use crate::exit::CliError;
use crate::manifest::{create_dir, Invocation, RunManifest};

pub const SCHEMA: &str = "props/1";
pub const FILE: &str = "props.csv";

/// A deliberate defect for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Make the first style factor's table depend on the causal feature.
    CptPerturbation,
}

impl FromStr for Fault {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "cpt-perturbation" => Ok(Fault::CptPerturbation),
            _ => Err(CliError::Validation(format!("unknown fault `{s}` (cpt-perturbation)"))),
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("cpt-perturbation")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: &'static str,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(property: &'static str, tolerance: f64, trials: usize, mut residual: impl FnMut(usize) -> Result<f64>) -> Result<PropertyResult> {
    let mut max = 0.0f64;
    for t in 0..trials {
        let r = residual(t).with_context(|| format!("{property}, trial {t}"))?;
        if r.is_nan() || r > max {
            max = r;
        }
        if max.is_nan() {
            break;
        }
    }
    Ok(PropertyResult { property, trials, max_residual: max, tolerance, passed: max <= tolerance })
}

/// Add an edge `parent -> child` whose effect shifts `eps` of the child's
/// mass onto a value chosen by the parent.
pub fn perturb_cpt(scm: &Scm, child: &str, parent: &str, eps: f64) -> Result<Scm> {
    let kc = scm.cardinality(child)?;
    let kp = scm.cardinality(parent)?;
    let mut edges = scm.dag().edges().to_vec();
    edges.push((parent.to_string(), child.to_string()));
    let mut mechanisms = scm.mechanisms().to_vec();
    let m = mechanisms.iter_mut().find(|m| m.child == child).expect("every node has a mechanism");
    let mut table = Vec::with_capacity(m.table.len() * kp);
    for row in m.table.chunks(kc) {
        for v in 0..kp {
            let mut shifted: Vec<f64> = row.iter().map(|p| (1.0 - eps) * p).collect();
            shifted[v % kc] += eps;
            let s: f64 = shifted.iter().sum();
            table.extend(shifted.iter().map(|p| p / s));
        }
    }
    m.parents.push(parent.to_string());
    m.table = table;
    Ok(Scm::new(scm.specs(), edges, mechanisms, scm.roles().clone())?)
}

fn stream(seed: u64, property: u64, trial: usize) -> StreamRng {
    substream(seed, &[tag::RANDOM_MODEL, property, trial as u64])
}

fn corpus_model(seed: u64, trial: usize, fault: Option<Fault>) -> Result<Scm> {
    let mut rng = stream(seed, 0, trial);
    let n_style = rng.random_range(2..=4);
    let scm = confounded_factors(&mut rng, n_style, 5)?;
    Ok(match fault {
        Some(Fault::CptPerturbation) => perturb_cpt(&scm, "z1", "z0", 0.3)?,
        None => scm,
    })
}

fn factor_names(scm: &Scm) -> Vec<String> {
    let r = scm.roles();
    r.causal.iter().chain(&r.confounded).cloned().collect()
}

/// `max |p(zi | do(zj = v)) - p(zi)|` over ordered factor pairs and values.
pub fn do_invariance_residual(scm: &Scm) -> Result<f64> {
    let names = factor_names(scm);
    let mut worst = 0.0f64;
    for zi in &names {
        let base = scm.exact_joint(&[zi])?;
        for zj in names.iter().filter(|z| *z != zi) {
            for v in 0..scm.cardinality(zj)? {
                let p = scm.interventional_dist(&[zi], &Assignment::of([(zj.as_str(), v)]))?;
                worst = worst.max(p.max_abs_diff(&base)?);
            }
        }
    }
    Ok(worst)
}

/// `max |CNF(zi, zj) - 2 I(zi; zj)|` over factor pairs.
pub fn cnf_mi_residual(scm: &Scm) -> Result<f64> {
    let names = factor_names(scm);
    let mut worst = 0.0f64;
    for (a, zi) in names.iter().enumerate() {
        for zj in &names[a + 1..] {
            let mi = mutual_information(&scm.exact_joint(&[zi, zj])?)?;
            worst = worst.max((cnf_exact(scm, zi, zj)? - 2.0 * mi).abs());
        }
    }
    Ok(worst)
}

/// Largest CNF between the causal feature and any style factor after `do`.
pub fn residual_confounding(scm: &Scm, intervention: &Assignment) -> Result<f64> {
    let done = scm.intervene(intervention)?;
    let z0 = scm.roles().causal.clone().context("model has no causal feature")?;
    let mut worst = 0.0f64;
    for zi in &scm.roles().confounded {
        worst = worst.max(cnf_exact(&done, &z0, zi)?.abs());
    }
    Ok(worst)
}

pub fn do_z0(scm: &Scm) -> Assignment {
    Assignment::of(scm.roles().causal.iter().map(|z| (z.as_str(), 0)))
}

pub fn do_zcnf(scm: &Scm) -> Assignment {
    Assignment::of(scm.roles().confounded.iter().map(|z| (z.as_str(), 0)))
}

fn random_table(rng: &mut StreamRng) -> Result<Table> {
    let cards: Vec<usize> = (0..3).map(|_| rng.random_range(2..=5)).collect();
    let p = positive_dist(rng, cards.iter().product());
    Ok(Table::new(vec!["zi".into(), "z0".into(), "y".into()], cards, p)?)
}

fn random_instance(rng: &mut StreamRng, variants: &[Variant]) -> Instance {
    let variant = variants[rng.random_range(0..variants.len())];
    let grid = Renderer::grid(variant);
    Instance::real(grid[rng.random_range(0..grid.len())])
}

fn gradient_residual(rng: &mut StreamRng, net: u64) -> Result<f64> {
    let dims = [rng.random_range(3..9), rng.random_range(2..7), rng.random_range(2..6), rng.random_range(2..5)];
    let mut model = Mlp64::new(&dims, net)?;
    for p in model.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let n = 4;
    let x: Vec<f64> = (0..n * dims[0]).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut t = vec![0.0; n * dims[3]];
    for i in 0..n {
        let a = rng.random_range(0.0..1.0);
        t[i * dims[3]] = a;
        t[i * dims[3] + rng.random_range(1..dims[3])] = 1.0 - a;
    }
    Ok(gradient_check(&model, &x, &t, n, 1e-5)?.max_rel_error)
}

/// Run every property on `trials` random cases each. `trials == 0` gives an
/// empty report.
pub fn run_suite(seed: u64, trials: usize, fault: Option<Fault>) -> Result<Vec<PropertyResult>> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let model = |t| corpus_model(seed, t, fault);
    Ok(vec![
        check("prop1_do_invariance", 1e-9, trials, |t| do_invariance_residual(&model(t)?))?,
        check("prop2_cnf_twice_mi", 1e-9, trials, |t| cnf_mi_residual(&model(t)?))?,
        check("prop3_do_z0_removes_cnf", 1e-9, trials, |t| {
            let m = model(t)?;
            residual_confounding(&m, &do_z0(&m))
        })?,
        check("prop3_do_zcnf_removes_cnf", 1e-9, trials, |t| {
            let m = model(t)?;
            residual_confounding(&m, &do_zcnf(&m))
        })?,
        check("ace_adjustment_equals_surgery", 1e-9, trials, |t| {
            let scm = confounded_triple(&mut stream(seed, 1, t), 4)?;
            let k = scm.cardinality("x")?;
            let mut worst = 0.0f64;
            for xv in 0..k {
                for xb in 0..k {
                    worst = worst.max((scm.ace("x", xv, xb, "y", &["u"])? - scm.ace_by_surgery("x", xv, xb, "y")?).abs());
                }
            }
            Ok(worst)
        })?,
        check("ace_null_contrast_is_zero", 0.0, trials, |t| {
            let scm = confounded_triple(&mut stream(seed, 1, t), 4)?;
            let mut worst = 0.0f64;
            for v in 0..scm.cardinality("x")? {
                worst = worst.max(scm.ace("x", v, v, "y", &["u"])?.abs());
            }
            Ok(worst)
        })?,
        check("d_separation_implies_independence", 1e-9, trials, |t| {
            let scm = random_dag_scm(&mut stream(seed, 2, t), 5, 3, 0.4)?;
            let nodes = scm.dag().nodes().to_vec();
            let mut worst = 0.0f64;
            for x in &nodes {
                for y in nodes.iter().filter(|y| *y > x) {
                    if scm.dag().d_separated(x, y, &[])? {
                        worst = worst.max(mutual_information(&scm.exact_joint(&[x, y])?)?);
                    }
                    for s in nodes.iter().filter(|s| *s != x && *s != y) {
                        if scm.dag().d_separated(x, y, &[s])? {
                            worst = worst.max(conditional_mi(&scm.exact_joint(&[x, y, s])?)?);
                        }
                    }
                }
            }
            Ok(worst)
        })?,
        check("decomposition_identity", 1e-9, trials, |t| {
            Ok(invariance_decomposition(&random_table(&mut stream(seed, 3, t))?)?.residual())
        })?,
        check("invert_render_identity", 0.0, trials, |t| {
            let inst = random_instance(&mut stream(seed, 4, t), &Variant::ALL);
            let variant = inst.factors.variant()?;
            Ok(if invert(&render(&inst.factors), variant)? == inst.factors { 0.0 } else { 1.0 })
        })?,
        check("relabeled_counterfactuals_commute", 0.0, trials, |t| {
            let mut rng = stream(seed, 5, t);
            let inst = random_instance(&mut rng, &[Variant::Dcm, Variant::Wlm]);
            let h = Relabeling::random(&mut rng);
            let variant = inst.factors.variant()?;
            let factors = variant.style_factors();
            let f = factors[rng.random_range(0..factors.len())];
            let v = rng.random_range(0..f.cardinality()) as u8;
            let direct = counterfactual(&inst, f, v)?.image;
            let via_h = relabeled_counterfactual(&inst, &h, f, v)?;
            Ok(direct.pixels().iter().zip(via_h.pixels()).filter(|(a, b)| a != b).count() as f64)
        })?,
        check("gradient_matches_finite_differences", 1e-4, trials, |t| gradient_residual(&mut stream(seed, 6, t), t as u64))?,
    ])
}

pub fn report(results: &[PropertyResult]) -> String {
    if results.is_empty() {
        return String::new();
    }
    let mut s = format!("{:<36} {:>6} {:>13} {:>10}  status\n", "property", "trials", "max_residual", "tolerance");
    for r in results {
        s += &format!(
            "{:<36} {:>6} {:>13.3e} {:>10.0e}  {}\n",
            r.property,
            r.trials,
            r.max_residual,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    s
}

pub fn write_csv<W: Write>(results: &[PropertyResult], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["property", "trials", "max_residual", "tolerance", "passed"])?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Print the report and fail with a property error if anything failed.
pub fn run(args: &crate::args::PropsArgs, inv: &Invocation) -> Result<Vec<PropertyResult>> {
    let results = run_suite(args.seed, args.trials, args.inject_fault)?;
    print!("{}", report(&results));
    if let Some(out) = &args.out {
        let dir = inv.resolve(out);
        create_dir(&dir)?;
        let path = dir.join(FILE);
        write_csv(&results, std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
        let params = serde_json::json!({"seed": args.seed, "trials": args.trials, "inject_fault": args.inject_fault});
        let mut m = RunManifest::new("props", inv, &[args.seed], params);
        m.add_output(&dir, FILE, SCHEMA)?;
        m.write(&dir)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::PropertyFailure { failed, checked: results.len() }.into());
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let results = run_suite(1, 5, None).unwrap();
        assert_eq!(results.len(), 11);
        for r in &results {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn perturbed_tables_break_do_invariance() {
        let results = run_suite(1, 3, Some(Fault::CptPerturbation)).unwrap();
        let p1 = results.iter().find(|r| r.property == "prop1_do_invariance").unwrap();
        assert!(!p1.passed && p1.max_residual > 1e-3, "{p1:?}");
    }

    #[test]
    fn perturbation_keeps_rows_normalized() {
        let scm = corpus_model(4, 0, None).unwrap();
        let bent = perturb_cpt(&scm, "z1", "z0", 0.3).unwrap();
        assert!(bent.dag().parents_of(bent.dag().index_of("z1").unwrap()).contains(&bent.dag().index_of("z0").unwrap()));
        assert!(do_invariance_residual(&bent).unwrap() > 1e-3);
        assert!(do_invariance_residual(&scm).unwrap() <= 1e-9);
    }

    #[test]
    fn zero_trials_is_empty() {
        assert!(run_suite(0, 0, Some(Fault::CptPerturbation)).unwrap().is_empty());
        assert_eq!(report(&[]), "");
    }

    #[test]
    fn nan_residual_fails() {
        let r = check("x", 1.0, 3, |t| Ok(if t == 1 { f64::NAN } else { 0.0 })).unwrap();
        assert!(!r.passed && r.max_residual.is_nan());
    }
}
