//! `cfaug cnf-table`: confounding between the digit and a style factor as
//! the gate probability varies.

use std::io::Write;

use anyhow::{Context, Result};
use cfaug::datagen::{build_scm, gate_cnf_closed_form, Factor, NUM_CLASSES, NUM_STYLES};
use cfaug::info::{cnf_exact, cnf_from_counts, JointCounts};
use cfaug::rng::{derive, tag};
use cfaug::{DatasetSpec, Variant};
use serde::Serialize;

use crate::exit::CliError;
use crate::manifest::{create_dir, Invocation, RunManifest};
use crate::par::{default_jobs, ordered_map};
use crate::stats::mean_sd;

pub const SCHEMA: &str = "cnf-table/1";
pub const FILE: &str = "cnf_table.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CnfRow {
    pub variant: String,
    pub factor: String,
    pub r: f64,
    pub n: usize,
    pub n_seeds: usize,
    pub cnf_empirical_mean: f64,
    pub cnf_empirical_sd: Option<f64>,
    pub cnf_exact: f64,
    pub closed_form: f64,
}

/// Plug-in CNF over the provenance of the training split that `gen` would
/// produce for the same flags.
pub fn empirical_cnf(variant: Variant, factor: Factor, r: f64, n: usize, seed: u64) -> Result<f64> {
    let spec = DatasetSpec::new(variant, r, n, 1, seed)?;
    let scm = build_scm(&spec)?;
    let (d, f) = (scm.dag().index_of("digit")?, scm.dag().index_of(factor.name())?);
    let mut counts = JointCounts::new(&["digit", factor.name()], &[NUM_CLASSES, NUM_STYLES])?;
    for row in scm.sample_rows(n, derive(seed, &[tag::TRAIN_SPLIT])) {
        counts.add(&[row[d], row[f]]);
    }
    Ok(cnf_from_counts(&counts)?)
}

pub fn table(variant: Variant, factor: Factor, rs: &[f64], n: usize, seeds: &[u64], jobs: usize) -> Result<Vec<CnfRow>> {
    if seeds.is_empty() {
        return Err(CliError::Validation("at least one seed is required".into()).into());
    }
    if !variant.style_factors().contains(&factor) {
        return Err(CliError::Validation(format!("{variant} has no style factor `{factor}`")).into());
    }
    let cells: Vec<(f64, u64)> = rs.iter().flat_map(|&r| seeds.iter().map(move |&s| (r, s))).collect();
    let values = ordered_map(&cells, jobs, |&(r, s)| empirical_cnf(variant, factor, r, n, s))?;
    rs.iter()
        .zip(values.chunks(seeds.len()))
        .map(|(&r, vals)| {
            let scm = build_scm(&DatasetSpec::new(variant, r, n, 1, 0)?)?;
            let (mean, sd) = mean_sd(vals);
            Ok(CnfRow {
                variant: variant.to_string(),
                factor: factor.to_string(),
                r,
                n,
                n_seeds: seeds.len(),
                cnf_empirical_mean: mean,
                cnf_empirical_sd: sd,
                cnf_exact: cnf_exact(&scm, "digit", factor.name())?,
                closed_form: gate_cnf_closed_form(r, NUM_STYLES),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[CnfRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &crate::args::CnfTableArgs, inv: &Invocation) -> Result<Vec<CnfRow>> {
    let factor = args.factor.unwrap_or(args.variant.style_factors()[0]);
    let jobs = args.jobs.unwrap_or_else(|| default_jobs(args.r.len() * args.seeds.len()));
    let rows = table(args.variant, factor, &args.r, args.n, &args.seeds, jobs)?;
    match &args.out {
        None => write_csv(&rows, std::io::stdout().lock())?,
        Some(out) => {
            let dir = inv.resolve(out);
            create_dir(&dir)?;
            let path = dir.join(FILE);
            let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&rows, file)?;
            let params = serde_json::json!({
                "variant": args.variant, "factor": factor, "r": args.r, "n": args.n, "seeds": args.seeds,
            });
            let mut m = RunManifest::new("cnf-table", inv, &args.seeds, params);
            m.add_output(&dir, FILE, SCHEMA)?;
            m.write(&dir)?;
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gate_row_is_near_zero() {
        let rows = table(Variant::Cm, Factor::Fg, &[0.0], 20_000, &[0, 1], 1).unwrap();
        assert!(rows[0].cnf_empirical_mean < 0.02);
        assert!(rows[0].cnf_exact.abs() < 1e-12);
        assert!(rows[0].closed_form.abs() < 1e-12);
    }

    #[test]
    fn single_seed_leaves_sd_empty() {
        let rows = table(Variant::Cm, Factor::Fg, &[0.5], 1000, &[3], 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "variant,factor,r,n,n_seeds,cnf_empirical_mean,cnf_empirical_sd,cnf_exact,closed_form"
        );
        assert!(lines.next().unwrap().starts_with("cm,fg,0.5,1000,1,") && text.contains(",,"));
    }

    #[test]
    fn exact_matches_closed_form() {
        for r in [0.1, 0.2, 0.5, 0.9, 0.95, 1.0] {
            let row = &table(Variant::Dcm, Factor::Bg, &[r], 10, &[0], 1).unwrap()[0];
            assert!((row.cnf_exact - row.closed_form).abs() <= 1e-9, "r={r}");
        }
    }

    #[test]
    fn factor_must_belong_to_variant() {
        assert!(table(Variant::Cm, Factor::Bg, &[0.5], 10, &[0], 1).is_err());
        assert!(table(Variant::Cm, Factor::Fg, &[0.5], 10, &[], 1).is_err());
    }
}
