//! Entropy, mutual information and the directed-information confounding
//! measure, both exact (on tables) and plug-in (on samples).
//!
//! Everything is in nats. Cells with zero probability contribute zero.

mod counts;
mod sweep;

pub use counts::JointCounts;
pub use sweep::{write_measure_csv, MeasureRow, MEASURE_CSV_VERSION};

use crate::scm::{Assignment, DistTable, Scm};
use crate::{Error, Real, Result};

fn xlogx_ratio<T: Real>(p: T, num: T, den: T) -> T {
    if p > T::zero() {
        p * (num / den).ln()
    } else {
        T::zero()
    }
}

fn expect_arity<T: Real>(t: &DistTable<T>, n: usize) -> Result<()> {
    if t.variables().len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected a {n}-variable table, got {}",
            t.variables().len()
        )));
    }
    Ok(())
}

/// Shannon entropy `-sum p ln p`.
pub fn entropy<T: Real>(p: &DistTable<T>) -> T {
    p.probs().iter().filter(|&&x| x > T::zero()).map(|&x| -x * x.ln()).sum()
}

/// `I(A; B)` of a two-variable table.
pub fn mutual_information<T: Real>(joint: &DistTable<T>) -> Result<T> {
    expect_arity(joint, 2)?;
    let (ka, kb) = (joint.cards()[0], joint.cards()[1]);
    let p = joint.probs();
    let mut pa = vec![T::zero(); ka];
    let mut pb = vec![T::zero(); kb];
    for a in 0..ka {
        for b in 0..kb {
            pa[a] += p[a * kb + b];
            pb[b] += p[a * kb + b];
        }
    }
    let mut mi = T::zero();
    for a in 0..ka {
        for b in 0..kb {
            let pab = p[a * kb + b];
            mi += xlogx_ratio(pab, pab, pa[a] * pb[b]);
        }
    }
    Ok(mi.max(T::zero()))
}

/// `I(A; B | C)` of a table over `(A, B, C)`.
pub fn conditional_mi<T: Real>(joint: &DistTable<T>) -> Result<T> {
    expect_arity(joint, 3)?;
    let (ka, kb, kc) = (joint.cards()[0], joint.cards()[1], joint.cards()[2]);
    let p = joint.probs();
    let at = |a: usize, b: usize, c: usize| p[(a * kb + b) * kc + c];
    let mut pac = vec![T::zero(); ka * kc];
    let mut pbc = vec![T::zero(); kb * kc];
    let mut pc = vec![T::zero(); kc];
    for a in 0..ka {
        for b in 0..kb {
            for c in 0..kc {
                let v = at(a, b, c);
                pac[a * kc + c] += v;
                pbc[b * kc + c] += v;
                pc[c] += v;
            }
        }
    }
    let mut cmi = T::zero();
    for a in 0..ka {
        for b in 0..kb {
            for c in 0..kc {
                let v = at(a, b, c);
                cmi += xlogx_ratio(v, v * pc[c], pac[a * kc + c] * pbc[b * kc + c]);
            }
        }
    }
    Ok(cmi.max(T::zero()))
}

fn check_pair(scm: &Scm, zi: &str, zj: &str) -> Result<()> {
    scm.dag().index_of(zi)?;
    scm.dag().index_of(zj)?;
    if zi == zj {
        return Err(Error::InvalidArgument(format!("directed information needs two distinct nodes, got `{zi}` twice")));
    }
    Ok(())
}

/// `I(zi -> zj) = E_{p(zi, zj)} ln [ p(zi | zj) / p(zi | do(zj)) ]`.
///
/// Returns `+inf` when the interventional conditional puts zero mass on a
/// cell the observational joint supports.
pub fn directed_information(scm: &Scm, zi: &str, zj: &str) -> Result<f64> {
    check_pair(scm, zi, zj)?;
    let joint = scm.exact_joint(&[zi, zj])?;
    let (ki, kj) = (joint.cards()[0], joint.cards()[1]);
    let mut total = 0.0;
    for vj in 0..kj {
        let pj: f64 = (0..ki).map(|vi| joint.get(&[vi, vj])).sum();
        if pj <= 0.0 {
            continue;
        }
        let doj = scm.interventional_dist(&[zi], &Assignment::of([(zj, vj)]))?;
        for vi in 0..ki {
            let pij = joint.get(&[vi, vj]);
            if pij > 0.0 {
                let q = doj.get(&[vi]);
                if q <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                total += pij * ((pij / pj) / q).ln();
            }
        }
    }
    Ok(total)
}

/// `CNF(zi; zj) = I(zi -> zj) + I(zj -> zi)`.
pub fn cnf_exact(scm: &Scm, zi: &str, zj: &str) -> Result<f64> {
    Ok(directed_information(scm, zi, zj)? + directed_information(scm, zj, zi)?)
}

/// Plug-in confounding between two columns of counts: twice the empirical
/// mutual information, which equals CNF when factors depend only on root
/// confounders.
pub fn cnf_from_counts(counts: &JointCounts) -> Result<f64> {
    expect_arity_counts(counts)?;
    Ok(2.0 * mutual_information(&counts.to_table::<f64>()?)?)
}

fn expect_arity_counts(c: &JointCounts) -> Result<()> {
    if c.variables().len() != 2 {
        return Err(Error::InvalidArgument("CNF needs a two-variable count table".into()));
    }
    Ok(())
}

/// Plug-in CNF over sampled assignments.
pub fn cnf_empirical(samples: &[Assignment], zi: &str, zj: &str) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let pairs = samples
        .iter()
        .map(|s| {
            let a = s.get(zi).ok_or_else(|| Error::UnknownNode(zi.into()))?;
            let b = s.get(zj).ok_or_else(|| Error::UnknownNode(zj.into()))?;
            Ok([a, b])
        })
        .collect::<Result<Vec<_>>>()?;
    let ka = pairs.iter().map(|p| p[0]).max().unwrap_or(0) + 1;
    let kb = pairs.iter().map(|p| p[1]).max().unwrap_or(0) + 1;
    let mut counts = JointCounts::new(&[zi, zj], &[ka, kb])?;
    for p in &pairs {
        counts.add(p);
    }
    cnf_from_counts(&counts)
}

/// Terms of `I(Zi; Yhat | Z0) = term1 - I(Zi; Z0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition<T> {
    /// `I(Zi; Yhat | Z0)`.
    pub lhs: T,
    /// `E ln [ p(Z0 | Zi) p(Yhat | Z0, Zi) / (p(Z0) p(Yhat | Z0)) ]`, i.e. `I(Zi; Yhat, Z0)`.
    pub term1: T,
    /// `I(Zi; Z0)`, half the confounding between them.
    pub mi: T,
}

impl<T: Real> Decomposition<T> {
    pub fn residual(&self) -> T {
        (self.lhs - (self.term1 - self.mi)).abs()
    }
}

/// Split the invariance penalty for a table over `(Zi, Z0, Yhat)`.
pub fn invariance_decomposition<T: Real>(joint: &DistTable<T>) -> Result<Decomposition<T>> {
    expect_arity(joint, 3)?;
    let (ki, k0, ky) = (joint.cards()[0], joint.cards()[1], joint.cards()[2]);
    let p = joint.probs();
    let at = |i: usize, z: usize, y: usize| p[(i * k0 + z) * ky + y];
    let mut pi = vec![T::zero(); ki];
    let mut p0 = vec![T::zero(); k0];
    let mut pi0 = vec![T::zero(); ki * k0];
    let mut p0y = vec![T::zero(); k0 * ky];
    for i in 0..ki {
        for z in 0..k0 {
            for y in 0..ky {
                let v = at(i, z, y);
                pi[i] += v;
                p0[z] += v;
                pi0[i * k0 + z] += v;
                p0y[z * ky + y] += v;
            }
        }
    }
    let mut term1 = T::zero();
    for i in 0..ki {
        for z in 0..k0 {
            for y in 0..ky {
                let v = at(i, z, y);
                if v > T::zero() {
                    let num = (pi0[i * k0 + z] / pi[i]) * (v / pi0[i * k0 + z]);
                    let den = p0[z] * (p0y[z * ky + y] / p0[z]);
                    term1 += v * (num / den).ln();
                }
            }
        }
    }
    // (Zi, Z0, Yhat) -> reorder to (Zi, Yhat, Z0) for the conditional MI
    let names: Vec<&str> = joint.variables().iter().map(String::as_str).collect();
    let lhs = conditional_mi(&joint.marginal(&[names[0], names[2], names[1]])?)?;
    let mi = mutual_information(&joint.marginal(&[names[0], names[1]])?)?;
    Ok(Decomposition { lhs, term1, mi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ScmBuilder;

    fn table(vars: &[&str], cards: &[usize], p: Vec<f64>) -> DistTable<f64> {
        DistTable::new(vars.iter().map(|s| s.to_string()).collect(), cards.to_vec(), p).unwrap()
    }

    #[test]
    fn entropy_basics() {
        assert_eq!(entropy(&table(&["a"], &[3], vec![0.0, 1.0, 0.0])), 0.0);
        let h = entropy(&table(&["a"], &[10], vec![0.1; 10]));
        assert!((h - 10f64.ln()).abs() < 1e-12);
        // hand summation: -(.1 ln .1 + .2 ln .2 + .3 ln .3 + .4 ln .4)
        let h4 = entropy(&table(&["a", "b"], &[2, 2], vec![0.1, 0.2, 0.3, 0.4]));
        assert!((h4 - 1.279_854_225_833_069_2).abs() < 1e-12);
    }

    #[test]
    fn mi_extremes() {
        let prod: Vec<f64> = [0.3, 0.7].iter().flat_map(|a| [0.2, 0.8].map(|b| a * b)).collect();
        assert!(mutual_information(&table(&["a", "b"], &[2, 2], prod)).unwrap().abs() < 1e-15);
        let mut diag = vec![0.0; 100];
        for k in 0..10 {
            diag[k * 11] = 0.1;
        }
        let mi = mutual_information(&table(&["a", "b"], &[10, 10], diag)).unwrap();
        assert!((mi - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mi_is_symmetric() {
        let t = table(&["a", "b"], &[2, 3], vec![0.05, 0.25, 0.1, 0.3, 0.2, 0.1]);
        let swapped = t.marginal(&["b", "a"]).unwrap();
        let (x, y) = (mutual_information(&t).unwrap(), mutual_information(&swapped).unwrap());
        assert!((x - y).abs() < 1e-15);
    }

    #[test]
    fn cmi_vacuous_and_independent() {
        // C constant: I(A;B|C) = I(A;B)
        let ab = vec![0.1, 0.2, 0.3, 0.4];
        let t = table(&["a", "b", "c"], &[2, 2, 1], ab.clone());
        let mi = mutual_information(&table(&["a", "b"], &[2, 2], ab)).unwrap();
        assert!((conditional_mi(&t).unwrap() - mi).abs() < 1e-15);
        // A and B independent given C
        let mut p = Vec::new();
        let pc = [0.4, 0.6];
        let pa_c = [[0.2, 0.8], [0.7, 0.3]];
        let pb_c = [[0.5, 0.5], [0.1, 0.9]];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    p.push(pc[c] * pa_c[c][a] * pb_c[c][b]);
                }
            }
        }
        assert!(conditional_mi(&table(&["a", "b", "c"], &[2, 2, 2], p)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn arity_is_checked() {
        let t = table(&["a"], &[2], vec![0.5, 0.5]);
        assert!(mutual_information(&t).is_err());
        assert!(conditional_mi(&t).is_err());
        assert!(invariance_decomposition(&t).is_err());
    }

    #[test]
    fn unconfounded_pair_has_no_directed_information() {
        let scm = ScmBuilder::new()
            .root("u", vec![0.5, 0.5])
            .root("w", vec![0.3, 0.7])
            .child("a", 2, &["u"], |pa| if pa[0] == 0 { vec![0.9, 0.1] } else { vec![0.4, 0.6] })
            .child("b", 2, &["w"], |pa| if pa[0] == 0 { vec![0.2, 0.8] } else { vec![0.6, 0.4] })
            .build()
            .unwrap();
        assert!(directed_information(&scm, "a", "b").unwrap().abs() < 1e-15);
        assert!(cnf_exact(&scm, "a", "b").unwrap().abs() < 1e-15);
        assert!(cnf_exact(&scm, "a", "a").is_err());
    }

    #[test]
    fn degenerate_samples_have_zero_cnf() {
        let s = vec![Assignment::of([("a", 3), ("b", 1)]); 50];
        assert_eq!(cnf_empirical(&s, "a", "b").unwrap(), 0.0);
        assert!(cnf_empirical(&[], "a", "b").is_err());
        assert!(matches!(cnf_empirical(&s, "a", "q"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn decomposition_minimum_conditions() {
        // Yhat = Z0, Zi independent of Z0
        let pi = [0.25, 0.75];
        let p0 = [0.4, 0.6];
        let mut p = Vec::new();
        for i in 0..2 {
            for z in 0..2 {
                for y in 0..2 {
                    p.push(if y == z { pi[i] * p0[z] } else { 0.0 });
                }
            }
        }
        let d = invariance_decomposition(&table(&["zi", "z0", "y"], &[2, 2, 2], p)).unwrap();
        assert!(d.lhs.abs() < 1e-15 && d.term1.abs() < 1e-15 && d.mi.abs() < 1e-15);
    }
}
