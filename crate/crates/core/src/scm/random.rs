//! Random model generators for property checks.

use rand::Rng;

use super::model::{Scm, ScmBuilder};
use crate::Result;

/// A strictly positive random distribution over `k` values.
pub fn positive_dist<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    // Dirichlet(1) via normalized exponentials, floored away from zero.
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    // put rounding residue on the largest entry so the row sums to 1 tightly
    let resid = 1.0 - p.iter().sum::<f64>();
    let imax = (0..k).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0);
    p[imax] += resid;
    p
}

fn nonempty_subset<R: Rng>(rng: &mut R, from: &[String]) -> Vec<String> {
    loop {
        let pick: Vec<String> = from.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        if !pick.is_empty() {
            return pick;
        }
    }
}

/// A model in the confounded-generation class: confounders are roots, the
/// causal feature `z0` and style factors `z1..zn` each depend only on a
/// non-empty subset of confounders, and no factor causes another.
///
/// Style factors share at least one confounder with `z0`.
pub fn confounded_factors<R: Rng>(rng: &mut R, n_style: usize, max_card: usize) -> Result<Scm> {
    let max_card = max_card.max(2);
    let n_conf = rng.random_range(1..=3usize);
    let conf: Vec<String> = (0..n_conf).map(|i| format!("u{i}")).collect();
    let mut b = ScmBuilder::new();
    let mut ucards = Vec::new();
    for u in &conf {
        let k = rng.random_range(2..=max_card);
        ucards.push(k);
        let p = positive_dist(rng, k);
        b.root(u, p).confounder(u);
    }
    let z0_parents = nonempty_subset(rng, &conf);
    let k0 = rng.random_range(2..=max_card);
    let refs: Vec<&str> = z0_parents.iter().map(String::as_str).collect();
    b.child("z0", k0, &refs, |_| positive_dist(rng, k0)).causal("z0");
    for i in 1..=n_style {
        let mut pa = nonempty_subset(rng, &conf);
        if !pa.iter().any(|p| z0_parents.contains(p)) {
            pa.push(z0_parents[rng.random_range(0..z0_parents.len())].clone());
            pa.sort();
        }
        let k = rng.random_range(2..=max_card);
        let refs: Vec<&str> = pa.iter().map(String::as_str).collect();
        let name = format!("z{i}");
        b.child(&name, k, &refs, |_| positive_dist(rng, k)).confounded(&name);
    }
    b.build()
}

/// A random DAG over `v0..v{n-1}` (edges only from lower to higher index)
/// with strictly positive tables.
pub fn random_dag_scm<R: Rng>(rng: &mut R, n: usize, max_card: usize, edge_prob: f64) -> Result<Scm> {
    let mut b = ScmBuilder::new();
    for j in 0..n {
        let name = format!("v{j}");
        let k = rng.random_range(2..=max_card.max(2));
        let parents: Vec<String> = (0..j).filter(|_| rng.random_bool(edge_prob)).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
        b.child(&name, k, &refs, |_| positive_dist(rng, k));
    }
    b.build()
}

/// `u -> x`, `u -> y`, `x -> y` with random positive tables.
pub fn confounded_triple<R: Rng>(rng: &mut R, max_card: usize) -> Result<Scm> {
    let (ku, kx, ky) = (
        rng.random_range(2..=max_card.max(2)),
        rng.random_range(2..=max_card.max(2)),
        rng.random_range(2..=max_card.max(2)),
    );
    let pu = positive_dist(rng, ku);
    ScmBuilder::new()
        .root("u", pu)
        .child("x", kx, &["u"], |_| positive_dist(rng, kx))
        .child("y", ky, &["x", "u"], |_| positive_dist(rng, ky))
        .confounder("u")
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn generated_models_are_valid() {
        let mut rng = substream(5, &[]);
        for _ in 0..20 {
            let m = confounded_factors(&mut rng, 3, 5).unwrap();
            assert_eq!(m.roles().confounded.len(), 3);
            assert!(m.cards().iter().all(|&c| (2..=5).contains(&c)));
            random_dag_scm(&mut rng, 6, 3, 0.4).unwrap();
            confounded_triple(&mut rng, 3).unwrap();
        }
    }

    #[test]
    fn positive_rows_sum_to_one() {
        let mut rng = substream(9, &[]);
        for k in 1..8 {
            let p = positive_dist(&mut rng, k);
            assert!(p.iter().all(|&x| x > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
