use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::dag::{Dag, NodeId};
use super::table::DistTable;
use crate::rng::{substream, tag};
use crate::{Error, Result};

/// Default limit on the number of cells any intermediate factor may hold.
pub const DEFAULT_CELL_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorSpec {
    pub name: NodeId,
    pub cardinality: usize,
}

/// Conditional probability table of one node given its ordered parents.
///
/// `table` holds one row of `cardinality(child)` probabilities per parent
/// assignment, rows ordered with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub child: NodeId,
    pub parents: Vec<NodeId>,
    pub table: Vec<f64>,
}

impl Mechanism {
    pub fn row(&self, row: usize, card: usize) -> &[f64] {
        &self.table[row * card..(row + 1) * card]
    }
}

/// Designated roles: the causal feature, the confounded style factors and
/// the confounders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roles {
    pub causal: Option<NodeId>,
    pub confounded: Vec<NodeId>,
    pub confounders: Vec<NodeId>,
}

/// A map from node name to value index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(BTreeMap<NodeId, usize>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn insert(&mut self, node: impl Into<NodeId>, value: usize) {
        self.0.insert(node.into(), value);
    }

    pub fn get(&self, node: &str) -> Option<usize> {
        self.0.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A discrete structural causal model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    cards: Vec<usize>,
    mechanisms: Vec<Mechanism>,
    roles: Roles,
}

/// A factor over node indices used during exact inference.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar() -> Self {
        Self { vars: vec![], cards: vec![], values: vec![1.0] }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.cards.len()];
        for d in (0..self.cards.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.cards[d + 1];
        }
        s
    }

    fn product(&self, other: &Factor, cap: u128) -> Result<Factor> {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let cells: u128 = cards.iter().map(|&c| c as u128).product();
        if cells > cap {
            return Err(Error::CapExceeded { cells, cap });
        }
        let map = |f: &Factor| -> Vec<usize> {
            let fs = f.strides();
            vars.iter()
                .map(|v| f.vars.iter().position(|w| w == v).map_or(0, |p| fs[p]))
                .collect()
        };
        let (sa, sb) = (map(self), map(other));
        let mut values = Vec::with_capacity(cells as usize);
        let mut idx = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..cells {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if idx[d] < cards[d] {
                    break;
                }
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
                idx[d] = 0;
            }
        }
        Ok(Factor { vars, cards, values })
    }

    fn sum_out(&self, var: usize) -> Factor {
        let Some(p) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let outer: usize = self.cards[..p].iter().product();
        let inner: usize = self.cards[p + 1..].iter().product();
        let c = self.cards[p];
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..c {
                let base = (o * c + k) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        Factor { vars, cards, values }
    }

    fn permuted(&self, order: &[usize]) -> Factor {
        let pos: Vec<usize> =
            order.iter().map(|v| self.vars.iter().position(|w| w == v).expect("var present")).collect();
        let strides = self.strides();
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let n: usize = cards.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut idx = vec![0usize; order.len()];
        for _ in 0..n {
            let src: usize = idx.iter().zip(&pos).map(|(&i, &p)| i * strides[p]).sum();
            values.push(self.values[src]);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < cards[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Factor { vars: order.to_vec(), cards, values }
    }
}

impl Scm {
    /// Assemble and validate a model. Mechanism parent lists must match
    /// the DAG's parent sets exactly.
    pub fn new(specs: Vec<FactorSpec>, edges: Vec<(NodeId, NodeId)>, mechanisms: Vec<Mechanism>, roles: Roles) -> Result<Self> {
        let dag = Dag::new(specs.iter().map(|s| s.name.clone()).collect(), edges)?;
        let cards: Vec<usize> = specs.iter().map(|s| s.cardinality).collect();
        if let Some(s) = specs.iter().find(|s| s.cardinality == 0) {
            return Err(Error::InvalidModel(format!("node `{}` has cardinality 0", s.name)));
        }
        let mut by_node: Vec<Option<Mechanism>> = vec![None; specs.len()];
        for m in mechanisms {
            let i = dag.index_of(&m.child)?;
            if by_node[i].is_some() {
                return Err(Error::InvalidModel(format!("two mechanisms for `{}`", m.child)));
            }
            by_node[i] = Some(m);
        }
        let mut mechs = Vec::with_capacity(specs.len());
        for (i, m) in by_node.into_iter().enumerate() {
            let m = m.ok_or_else(|| Error::InvalidModel(format!("no mechanism for `{}`", dag.name(i))))?;
            let declared: BTreeSet<usize> = dag.parents_of(i).iter().copied().collect();
            let listed = m.parents.iter().map(|p| dag.index_of(p)).collect::<Result<Vec<_>>>()?;
            let listed_set: BTreeSet<usize> = listed.iter().copied().collect();
            if listed_set != declared || listed.len() != listed_set.len() {
                return Err(Error::InvalidModel(format!("mechanism parents of `{}` disagree with the graph", m.child)));
            }
            let rows: usize = listed.iter().map(|&p| cards[p]).product();
            if m.table.len() != rows * cards[i] {
                return Err(Error::InvalidModel(format!(
                    "table of `{}` has {} entries, expected {}",
                    m.child,
                    m.table.len(),
                    rows * cards[i]
                )));
            }
            for r in 0..rows {
                let row = m.row(r, cards[i]);
                let s: f64 = row.iter().sum();
                if row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!("row {r} of `{}` is not a distribution", m.child)));
                }
            }
            mechs.push(m);
        }
        for n in roles.causal.iter().chain(&roles.confounded).chain(&roles.confounders) {
            dag.index_of(n)?;
        }
        if let Some(c) = &roles.causal {
            if roles.confounded.contains(c) {
                return Err(Error::InvalidModel(format!("causal feature `{c}` is also marked confounded")));
            }
        }
        Ok(Self { dag, cards, mechanisms: mechs, roles })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn specs(&self) -> Vec<FactorSpec> {
        self.dag
            .nodes()
            .iter()
            .zip(&self.cards)
            .map(|(n, &c)| FactorSpec { name: n.clone(), cardinality: c })
            .collect()
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, node: &str) -> Result<&Mechanism> {
        Ok(&self.mechanisms[self.dag.index_of(node)?])
    }

    pub fn cardinality(&self, node: &str) -> Result<usize> {
        Ok(self.cards[self.dag.index_of(node)?])
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    fn parent_indices(&self, i: usize) -> Vec<usize> {
        self.mechanisms[i].parents.iter().map(|p| self.dag.index_of(p).expect("validated")).collect()
    }

    /// Ancestral sampling. Draw `k` uses its own substream keyed by
    /// `(seed, k)`, so any subrange can be regenerated independently.
    ///
    /// Rows hold one value per node in declaration order.
    pub fn sample_rows(&self, n: usize, seed: u64) -> Vec<Vec<usize>> {
        let parents: Vec<Vec<usize>> = (0..self.cards.len()).map(|i| self.parent_indices(i)).collect();
        (0..n)
            .map(|k| {
                let mut rng = substream(seed, &[tag::SAMPLE, k as u64]);
                let mut row = vec![0usize; self.cards.len()];
                for &v in self.dag.topological_order() {
                    let r = parents[v].iter().fold(0, |acc, &p| acc * self.cards[p] + row[p]);
                    let probs = self.mechanisms[v].row(r, self.cards[v]);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                    for (j, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc && p > 0.0 {
                            pick = j;
                            break;
                        }
                    }
                    row[v] = pick;
                }
                row
            })
            .collect()
    }

    /// Ancestral sampling returning named assignments.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Assignment> {
        let names = self.dag.nodes();
        self.sample_rows(n, seed)
            .into_iter()
            .map(|row| Assignment(names.iter().cloned().zip(row).collect()))
            .collect()
    }

    pub fn exact_joint(&self, variables: &[&str]) -> Result<DistTable<f64>> {
        self.exact_joint_capped(variables, DEFAULT_CELL_CAP)
    }

    /// Exact marginal joint by variable elimination in topological order.
    pub fn exact_joint_capped(&self, variables: &[&str], cap: u128) -> Result<DistTable<f64>> {
        let wanted = variables.iter().map(|v| self.dag.index_of(v)).collect::<Result<Vec<_>>>()?;
        if wanted.iter().collect::<BTreeSet<_>>().len() != wanted.len() {
            return Err(Error::InvalidArgument("requested variables repeat".into()));
        }
        let requested: u128 = wanted.iter().map(|&v| self.cards[v] as u128).product();
        if requested > cap {
            return Err(Error::CapExceeded { cells: requested, cap });
        }
        let order = self.dag.topological_order();
        // last position (in topological order) at which a node is still needed
        let mut last_use = vec![0usize; self.cards.len()];
        for (pos, &v) in order.iter().enumerate() {
            last_use[v] = last_use[v].max(pos);
            for p in self.parent_indices(v) {
                last_use[p] = last_use[p].max(pos);
            }
        }
        let mut acc = Factor::scalar();
        for (pos, &v) in order.iter().enumerate() {
            let pa = self.parent_indices(v);
            let mut vars = pa.clone();
            vars.push(v);
            let cpt = Factor {
                cards: vars.iter().map(|&x| self.cards[x]).collect(),
                vars,
                values: self.mechanisms[v].table.clone(),
            };
            acc = acc.product(&cpt, cap)?;
            let done: Vec<usize> =
                acc.vars.iter().copied().filter(|&u| !wanted.contains(&u) && last_use[u] <= pos).collect();
            for u in done {
                acc = acc.sum_out(u);
            }
        }
        let acc = acc.permuted(&wanted);
        DistTable::new(variables.iter().map(|s| s.to_string()).collect(), acc.cards, acc.values)
    }

    /// Graph surgery: every intervened node loses its parents and becomes a
    /// point mass on the assigned value.
    pub fn intervene(&self, do_assignment: &Assignment) -> Result<Scm> {
        let mut mechanisms = self.mechanisms.clone();
        let mut cut = BTreeSet::new();
        for (node, value) in do_assignment.iter() {
            let i = self.dag.index_of(node)?;
            if value >= self.cards[i] {
                return Err(Error::InvalidArgument(format!(
                    "do({node} = {value}) outside cardinality {}",
                    self.cards[i]
                )));
            }
            let mut table = vec![0.0; self.cards[i]];
            table[value] = 1.0;
            mechanisms[i] = Mechanism { child: node.to_string(), parents: vec![], table };
            cut.insert(node.to_string());
        }
        let edges = self.dag.edges().iter().filter(|(_, c)| !cut.contains(c)).cloned().collect();
        Scm::new(self.specs(), edges, mechanisms, self.roles.clone())
    }

    /// Joint of `targets` in the intervened model.
    pub fn interventional_dist(&self, targets: &[&str], do_assignment: &Assignment) -> Result<DistTable<f64>> {
        self.intervene(do_assignment)?.exact_joint(targets)
    }

    /// Average causal effect of `x` on `y` (value index used as the value of
    /// `y`) by the adjustment formula over the backdoor set `s`.
    pub fn ace(&self, x: &str, x_val: usize, x_base: usize, y: &str, s: &[&str]) -> Result<f64> {
        if !self.dag.backdoor_admissible(x, y, s)? {
            return Err(Error::Inadmissible {
                x: x.into(),
                y: y.into(),
                set: s.iter().map(|v| v.to_string()).collect(),
            });
        }
        let cx = self.cardinality(x)?;
        if x_val >= cx || x_base >= cx {
            return Err(Error::InvalidArgument(format!("treatment value outside cardinality {cx}")));
        }
        if x_val == x_base {
            return Ok(0.0);
        }
        let mut vars: Vec<&str> = s.to_vec();
        vars.push(x);
        vars.push(y);
        let joint = self.exact_joint(&vars)?;
        let cy = self.cardinality(y)?;
        let ns = s.len();
        let s_cards = &joint.cards()[..ns];
        let s_cells: usize = s_cards.iter().product();
        let expect = |xv: usize| -> Result<f64> {
            let mut total = 0.0;
            let mut cell = vec![0usize; ns + 2];
            for sc in 0..s_cells {
                let mut rem = sc;
                for d in (0..ns).rev() {
                    cell[d] = rem % s_cards[d];
                    rem /= s_cards[d];
                }
                let mut p_s = 0.0;
                let mut p_sx = 0.0;
                let mut ey = 0.0;
                for a in 0..cx {
                    for b in 0..cy {
                        cell[ns] = a;
                        cell[ns + 1] = b;
                        let p = joint.get(&cell);
                        p_s += p;
                        if a == xv {
                            p_sx += p;
                            ey += b as f64 * p;
                        }
                    }
                }
                if p_s > 0.0 {
                    if p_sx <= 0.0 {
                        return Err(Error::Positivity { x: x.into(), value: xv });
                    }
                    total += p_s * ey / p_sx;
                }
            }
            Ok(total)
        };
        Ok(expect(x_val)? - expect(x_base)?)
    }

    /// The same effect computed by surgery: `E[y | do(x = x_val)] - E[y | do(x = x_base)]`.
    pub fn ace_by_surgery(&self, x: &str, x_val: usize, x_base: usize, y: &str) -> Result<f64> {
        let mean = |v: usize| -> Result<f64> {
            let t = self.interventional_dist(&[y], &Assignment::of([(x, v)]))?;
            Ok(t.probs().iter().enumerate().map(|(i, p)| i as f64 * p).sum())
        };
        Ok(mean(x_val)? - mean(x_base)?)
    }
}

/// Incremental construction of an [`Scm`].
#[derive(Debug, Default)]
pub struct ScmBuilder {
    specs: Vec<FactorSpec>,
    edges: Vec<(NodeId, NodeId)>,
    mechanisms: Vec<Mechanism>,
    roles: Roles,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// A root node with marginal `probs`.
    pub fn root(&mut self, name: &str, probs: Vec<f64>) -> &mut Self {
        self.specs.push(FactorSpec { name: name.into(), cardinality: probs.len() });
        self.mechanisms.push(Mechanism { child: name.into(), parents: vec![], table: probs });
        self
    }

    /// A node whose conditional row for each parent assignment is given by
    /// `row(parent_values)`. Parent cardinalities must already be declared.
    pub fn child(
        &mut self,
        name: &str,
        cardinality: usize,
        parents: &[&str],
        mut row: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> &mut Self {
        let pcards: Vec<usize> = parents
            .iter()
            .map(|p| self.specs.iter().find(|s| s.name == *p).map_or(0, |s| s.cardinality))
            .collect();
        let rows: usize = pcards.iter().product();
        let mut table = Vec::with_capacity(rows * cardinality);
        let mut idx = vec![0usize; parents.len()];
        for _ in 0..rows {
            let r = row(&idx);
            table.extend(r);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < pcards[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        self.specs.push(FactorSpec { name: name.into(), cardinality });
        for p in parents {
            self.edges.push((p.to_string(), name.into()));
        }
        self.mechanisms.push(Mechanism {
            child: name.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            table,
        });
        self
    }

    pub fn causal(&mut self, name: &str) -> &mut Self {
        self.roles.causal = Some(name.into());
        self
    }

    pub fn confounded(&mut self, name: &str) -> &mut Self {
        self.roles.confounded.push(name.into());
        self
    }

    pub fn confounder(&mut self, name: &str) -> &mut Self {
        self.roles.confounders.push(name.into());
        self
    }

    pub fn build(&self) -> Result<Scm> {
        Scm::new(self.specs.clone(), self.edges.clone(), self.mechanisms.clone(), self.roles.clone())
    }
}

/// One-hot row helper for deterministic mechanisms.
pub fn point_mass(card: usize, value: usize) -> Vec<f64> {
    let mut v = vec![0.0; card];
    v[value] = 1.0;
    v
}
