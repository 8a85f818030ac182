//! `cfaug experiment`: train one classifier per method and seed and report
//! test accuracy, training-set confounding and the invariance penalty.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use cfaug::augment::augment;
use cfaug::classifier::{evaluate, predicted_joint, train};
use cfaug::datagen::{generate_dataset, unconfounded_subset, Factor};
use cfaug::info::invariance_decomposition;
use cfaug::{AugmentConfig, Dataset, DatasetSpec, Mlp, Strategy, Table, TrainConfig, Variant};
use serde::Serialize;

use crate::exit::CliError;
use crate::manifest::{create_dir, Invocation, RunManifest};
use crate::par::{default_jobs, ordered_map};
use crate::stats::mean_sd;

pub const RUNS_SCHEMA: &str = "experiment-runs/1";
pub const SUMMARY_SCHEMA: &str = "experiment-summary/1";
pub const TABLE_SCHEMA: &str = "experiment-table/1";

/// A training method. Declaration order is the reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Erm,
    ErmUc,
    ErmRw,
    DoX,
    DoZ0Zcnf,
    DoZcnf,
    DoZ0,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Erm, Method::ErmUc, Method::ErmRw, Method::DoX, Method::DoZ0Zcnf, Method::DoZcnf, Method::DoZ0];

    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::ErmUc => "erm-uc",
            Method::ErmRw => "erm-rw",
            Method::DoX => "do-x",
            Method::DoZ0Zcnf => "do-z0-zcnf",
            Method::DoZcnf => "do-zcnf",
            Method::DoZ0 => "do-z0",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Erm => "ERM",
            Method::ErmUc => "ERM-UC",
            Method::ErmRw => "ERM-RW",
            Method::DoX => "DoX",
            Method::DoZ0Zcnf => "DoZ0Zcnf",
            Method::DoZcnf => "DoZcnf",
            Method::DoZ0 => "DoZ0",
        }
    }

    /// The simulated intervention the method stands for.
    pub fn group(self) -> &'static str {
        match self {
            Method::Erm | Method::ErmUc | Method::ErmRw => "None",
            Method::DoX => "do(X)",
            Method::DoZ0Zcnf => "do(Z0 ∪ Zcnf)",
            Method::DoZcnf => "do(Zcnf)",
            Method::DoZ0 => "do(Z0)",
        }
    }

    fn strategy(self) -> Strategy {
        match self {
            Method::Erm | Method::ErmUc => Strategy::None,
            Method::ErmRw => Strategy::ReplicateUnconfounded,
            Method::DoX => Strategy::DoX,
            Method::DoZ0Zcnf => Strategy::DoZ0AndZcnf,
            Method::DoZcnf => Strategy::DoZcnf,
            Method::DoZ0 => Strategy::DoZ0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "none" => return Ok(Method::Erm),
            "replicate-uc" => return Ok(Method::ErmRw),
            "do-z0-and-zcnf" => return Ok(Method::DoZ0Zcnf),
            _ => {}
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Validation(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub variant: Variant,
    pub r: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentParams {
    fn validate(&self) -> Result<()> {
        DatasetSpec::new(self.variant, self.r, self.n_train, self.n_test, 0)?;
        self.augment.validate()?;
        self.train.validate()?;
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Validation("need at least one strategy and one seed".into()).into());
        }
        Ok(())
    }
}

/// Measurements for one style factor of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorResult {
    pub factor: Factor,
    pub pooled_cnf: f64,
    pub cond_mi: f64,
    pub term1: f64,
    pub mi_factor_digit: f64,
    pub decomposition_residual: f64,
    /// Test-split joint over (factor, digit, prediction).
    #[serde(skip)]
    pub joint: Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub n_train: usize,
    pub n_added: usize,
    pub test_accuracy: f64,
    pub factors: Vec<FactorResult>,
    pub seconds: f64,
}

fn training_set(train: &Dataset, method: Method, cfg: &AugmentConfig) -> Result<Dataset> {
    Ok(match method {
        Method::ErmUc => Dataset {
            spec: train.spec,
            split: train.split,
            instances: unconfounded_subset(train)?,
            canonical: train.canonical.clone(),
            augmentation: None,
        },
        m => augment(train, m.strategy(), cfg)?,
    })
}

/// Train and score one method on one seed's splits.
pub fn run_method(train_split: &Dataset, test: &Dataset, method: Method, params: &ExperimentParams, seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let aug_cfg = AugmentConfig { seed, ..params.augment.clone() };
    let data = training_set(train_split, method, &aug_cfg).with_context(|| format!("building the {method} training set"))?;
    let mut model = Mlp::standard(seed)?;
    train(&mut model, &data.instances, &TrainConfig { seed, ..params.train.clone() })
        .with_context(|| format!("training {method} (seed {seed})"))?;
    let metrics = evaluate(&model, &test.instances)?;
    let factors = params
        .variant
        .style_factors()
        .iter()
        .map(|&f| {
            let joint = predicted_joint(&model, &test.instances, f)?;
            let d = invariance_decomposition(&joint)?;
            Ok(FactorResult {
                factor: f,
                pooled_cnf: data.provenance_cnf(f)?,
                cond_mi: d.lhs,
                term1: d.term1,
                mi_factor_digit: d.mi,
                decomposition_residual: d.residual(),
                joint,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        method,
        seed,
        n_train: data.len(),
        n_added: data.augmentation.as_ref().map_or(0, |a| a.n_added),
        test_accuracy: metrics.accuracy,
        factors,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Every (method, seed) run, seeds in parallel, results in seed order and
/// then method order.
pub fn run_experiment(params: &ExperimentParams, jobs: usize, progress: bool) -> Result<Vec<RunResult>> {
    params.validate()?;
    let mut methods = params.methods.clone();
    methods.sort();
    methods.dedup();
    let per_seed = ordered_map(&params.seeds, jobs, |&seed| -> Result<Vec<RunResult>> {
        let spec = DatasetSpec::new(params.variant, params.r, params.n_train, params.n_test, seed)?;
        let (train_split, test) = generate_dataset(&spec)?;
        methods
            .iter()
            .map(|&m| {
                let run = run_method(&train_split, &test, m, params, seed)?;
                if progress {
                    eprintln!("seed {seed} {:<10} acc {:.4} ({:.1} s)", m.name(), run.test_accuracy, run.seconds);
                }
                Ok(run)
            })
            .collect()
    })?;
    let mut runs: Vec<RunResult> = per_seed.into_iter().flatten().collect();
    runs.sort_by_key(|r| (r.method, params.seeds.iter().position(|&s| s == r.seed)));
    Ok(runs)
}

#[derive(Debug, Serialize)]
struct RunRow<'a> {
    method: &'a str,
    group: &'a str,
    seed: u64,
    factor: &'a str,
    n_train: usize,
    n_added: usize,
    test_accuracy: f64,
    pooled_cnf: f64,
    cond_mi: f64,
    term1: f64,
    mi_factor_digit: f64,
    decomposition_residual: f64,
}

pub fn write_runs_csv<W: Write>(runs: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in runs {
        for f in &r.factors {
            w.serialize(RunRow {
                method: r.method.name(),
                group: r.method.group(),
                seed: r.seed,
                factor: f.factor.name(),
                n_train: r.n_train,
                n_added: r.n_added,
                test_accuracy: r.test_accuracy,
                pooled_cnf: f.pooled_cnf,
                cond_mi: f.cond_mi,
                term1: f.term1,
                mi_factor_digit: f.mi_factor_digit,
                decomposition_residual: f.decomposition_residual,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub group: String,
    pub factor: Factor,
    pub n_seeds: usize,
    pub test_accuracy_mean: f64,
    pub test_accuracy_sd: Option<f64>,
    pub pooled_cnf_mean: f64,
    pub pooled_cnf_sd: Option<f64>,
    pub cond_mi_mean: f64,
    pub cond_mi_sd: Option<f64>,
}

/// Aggregate over seeds, one row per (method, style factor).
pub fn summarize(runs: &[RunResult]) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = runs.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut out = Vec::new();
    for m in methods {
        let mine: Vec<&RunResult> = runs.iter().filter(|r| r.method == m).collect();
        let acc: Vec<f64> = mine.iter().map(|r| r.test_accuracy).collect();
        let (acc_mean, acc_sd) = mean_sd(&acc);
        for (k, fr) in mine[0].factors.iter().enumerate() {
            let col = |g: fn(&FactorResult) -> f64| mean_sd(&mine.iter().map(|r| g(&r.factors[k])).collect::<Vec<_>>());
            let (cnf_mean, cnf_sd) = col(|f| f.pooled_cnf);
            let (mi_mean, mi_sd) = col(|f| f.cond_mi);
            out.push(SummaryRow {
                method: m,
                group: m.group().into(),
                factor: fr.factor,
                n_seeds: mine.len(),
                test_accuracy_mean: acc_mean,
                test_accuracy_sd: acc_sd,
                pooled_cnf_mean: cnf_mean,
                pooled_cnf_sd: cnf_sd,
                cond_mi_mean: mi_mean,
                cond_mi_sd: mi_sd,
            });
        }
    }
    out
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn pm(mean: f64, sd: Option<f64>, scale: f64, digits: usize) -> String {
    match sd {
        Some(sd) => format!("{:.*} ± {:.*}", digits, mean * scale, digits, sd * scale),
        None => format!("{:.*}", digits, mean * scale),
    }
}

/// A Markdown table grouped by simulated intervention.
pub fn markdown(rows: &[SummaryRow]) -> String {
    let mut factors: Vec<Factor> = Vec::new();
    for r in rows {
        if !factors.contains(&r.factor) {
            factors.push(r.factor);
        }
    }
    let mut s = String::from("| Sim. Interv. | Method | Test acc. (%) |");
    for f in &factors {
        s += &format!(" CNF(digit, {f}) |");
    }
    for f in &factors {
        s += &format!(" I({f}; Ŷ \\| digit) |");
    }
    s += "\n|---|---|---|";
    s += &"---|".repeat(2 * factors.len());
    s += "\n";
    let mut last_group = "";
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.dedup();
    for m in methods {
        let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.method == m).collect();
        let group = if m.group() == last_group { "" } else { m.group() };
        last_group = m.group();
        s += &format!("| {group} | {} | {} |", m.label(), pm(mine[0].test_accuracy_mean, mine[0].test_accuracy_sd, 100.0, 2));
        for f in &factors {
            let r = mine.iter().find(|r| r.factor == *f).expect("factor row");
            s += &format!(" {} |", pm(r.pooled_cnf_mean, r.pooled_cnf_sd, 1.0, 3));
        }
        for f in &factors {
            let r = mine.iter().find(|r| r.factor == *f).expect("factor row");
            s += &format!(" {} |", pm(r.cond_mi_mean, r.cond_mi_sd, 1.0, 4));
        }
        s += "\n";
    }
    s
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    f(file).with_context(|| format!("writing {}", path.display()))
}

pub fn params_from_args(args: &crate::args::ExperimentArgs) -> ExperimentParams {
    ExperimentParams {
        variant: args.variant,
        r: args.r,
        n_train: args.n_train,
        n_test: args.n_test,
        methods: args.strategies.clone(),
        augment: AugmentConfig {
            tau: args.tau,
            per_instance: args.per_instance,
            alpha_cap: args.alpha,
            exclude_current: !args.include_current,
            dedup: !args.no_dedup,
            ..AugmentConfig::default()
        },
        train: TrainConfig { epochs: args.epochs, batch_size: args.batch_size, lr: args.lr, ..TrainConfig::default() },
        seeds: args.seeds.clone(),
    }
}

pub fn run(args: &crate::args::ExperimentArgs, inv: &Invocation) -> Result<Vec<SummaryRow>> {
    let params = params_from_args(args);
    let jobs = args.jobs.unwrap_or_else(|| default_jobs(params.seeds.len()));
    let dir = inv.resolve(&args.out);
    let runs = run_experiment(&params, jobs, true)?;
    let summary = summarize(&runs);
    create_dir(&dir)?;
    write_file(&dir, "runs.csv", |f| write_runs_csv(&runs, f))?;
    write_file(&dir, "summary.csv", |f| write_summary_csv(&summary, f))?;
    let table = markdown(&summary);
    write_file(&dir, "table.md", |mut f| Ok(f.write_all(table.as_bytes())?))?;
    let mut m = RunManifest::new("experiment", inv, &params.seeds, serde_json::to_value(&params)?);
    m.add_output(&dir, "runs.csv", RUNS_SCHEMA)?;
    m.add_output(&dir, "summary.csv", SUMMARY_SCHEMA)?;
    m.add_output(&dir, "table.md", TABLE_SCHEMA)?;
    m.write(&dir)?;
    print!("{table}");
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(method: Method, seed: u64, acc: f64) -> RunResult {
        let fr = |factor, v: f64| FactorResult {
            factor,
            pooled_cnf: v,
            cond_mi: v / 10.0,
            term1: v,
            mi_factor_digit: 0.9 * v,
            decomposition_residual: 0.0,
            joint: Table::new(vec!["a".into()], vec![1], vec![1.0]).unwrap(),
        };
        RunResult {
            method,
            seed,
            n_train: 10,
            n_added: 0,
            test_accuracy: acc,
            factors: vec![fr(Factor::Fg, 1.0 + seed as f64), fr(Factor::Bg, 2.0)],
            seconds: 0.0,
        }
    }

    #[test]
    fn names_round_trip_with_aliases() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("none".parse::<Method>().unwrap(), Method::Erm);
        assert_eq!("replicate-uc".parse::<Method>().unwrap(), Method::ErmRw);
        assert!("adam".parse::<Method>().is_err());
    }

    #[test]
    fn groups_follow_reporting_order() {
        let groups: Vec<&str> = Method::ALL.iter().map(|m| m.group()).collect();
        assert_eq!(groups, ["None", "None", "None", "do(X)", "do(Z0 ∪ Zcnf)", "do(Zcnf)", "do(Z0)"]);
    }

    #[test]
    fn summary_statistics() {
        let runs = [fake(Method::DoZ0, 0, 0.8), fake(Method::Erm, 0, 0.5), fake(Method::Erm, 1, 0.7)];
        let s = summarize(&runs);
        assert_eq!(s.len(), 4);
        assert_eq!((s[0].method, s[0].factor), (Method::Erm, Factor::Fg));
        assert!((s[0].test_accuracy_mean - 0.6).abs() < 1e-12);
        assert!((s[0].test_accuracy_sd.unwrap() - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((s[0].pooled_cnf_mean - 1.5).abs() < 1e-12);
        assert_eq!(s[2].method, Method::DoZ0);
        assert_eq!(s[2].test_accuracy_sd, None);
    }

    #[test]
    fn single_seed_csv_has_empty_sd() {
        let s = summarize(&[fake(Method::Erm, 0, 0.5)]);
        let mut buf = Vec::new();
        write_summary_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "method,group,factor,n_seeds,test_accuracy_mean,test_accuracy_sd,pooled_cnf_mean,pooled_cnf_sd,cond_mi_mean,cond_mi_sd\n"
        ));
        assert!(text.lines().nth(1).unwrap().starts_with("erm,None,fg,1,0.5,,1.0,,0.1,"));
    }

    #[test]
    fn markdown_groups_rows() {
        let runs = [fake(Method::DoZ0, 0, 0.8), fake(Method::ErmUc, 0, 0.6), fake(Method::Erm, 0, 0.5), fake(Method::DoX, 0, 0.55)];
        let md = markdown(&summarize(&runs));
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("| Sim. Interv. | Method | Test acc. (%) | CNF(digit, fg) | CNF(digit, bg) |"));
        assert!(lines[2].starts_with("| None | ERM | 50.00 |"));
        assert!(lines[3].starts_with("|  | ERM-UC | 60.00 |"));
        assert!(lines[4].starts_with("| do(X) | DoX |"));
        assert!(lines[5].starts_with("| do(Z0) | DoZ0 | 80.00 |"));
    }
}
