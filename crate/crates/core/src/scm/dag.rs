use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::{Error, Result};

pub type NodeId = String;

/// A directed acyclic graph over named nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    index: HashMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn new(nodes: Vec<NodeId>, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate node `{n}`")));
            }
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (p, c) in &edges {
            let pi = *index.get(p).ok_or_else(|| Error::UnknownNode(p.clone()))?;
            let ci = *index.get(c).ok_or_else(|| Error::UnknownNode(c.clone()))?;
            if pi == ci {
                return Err(Error::InvalidModel(format!("self loop on `{p}`")));
            }
            if !seen.insert((pi, ci)) {
                return Err(Error::InvalidModel(format!("duplicate edge {p} -> {c}")));
            }
            parents[ci].push(pi);
            children[pi].push(ci);
        }

        // Kahn's algorithm, lowest index first for a stable order.
        let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(nodes.len());
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            topo.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != nodes.len() {
            return Err(Error::InvalidModel("graph has a cycle".into()));
        }
        Ok(Self { nodes, edges, index, parents, children, topo })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, node: &str) -> Result<usize> {
        self.index.get(node).copied().ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    /// Parent indices in edge-insertion order.
    pub fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Node indices in a topological order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Strict descendants of `i`.
    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = self.children[i].clone();
        while let Some(n) = stack.pop() {
            if out.insert(n) {
                stack.extend_from_slice(&self.children[n]);
            }
        }
        out
    }

    /// `set` together with all of its ancestors.
    fn ancestral_closure(&self, set: &BTreeSet<usize>) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(n) = stack.pop() {
            if !mark[n] {
                mark[n] = true;
                stack.extend_from_slice(&self.parents[n]);
            }
        }
        mark
    }

    fn resolve(&self, x: &str, y: &str, s: &[&str]) -> Result<(usize, usize, BTreeSet<usize>)> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let set = s.iter().map(|n| self.index_of(n)).collect::<Result<BTreeSet<_>>>()?;
        if xi == yi {
            return Err(Error::InvalidArgument(format!("x and y are both `{x}`")));
        }
        if set.contains(&xi) || set.contains(&yi) {
            return Err(Error::InvalidArgument("conditioning set contains x or y".into()));
        }
        Ok((xi, yi, set))
    }

    /// Whether `x` and `y` are d-separated by `s`.
    pub fn d_separated(&self, x: &str, y: &str, s: &[&str]) -> Result<bool> {
        let (xi, yi, set) = self.resolve(x, y, s)?;
        Ok(!self.active_reach(xi, &set, None)[yi])
    }

    /// Whether `s` satisfies the backdoor criterion relative to `(x, y)`.
    pub fn backdoor_admissible(&self, x: &str, y: &str, s: &[&str]) -> Result<bool> {
        let (xi, yi, set) = self.resolve(x, y, s)?;
        let desc = self.descendants(xi);
        if set.iter().any(|n| desc.contains(n)) {
            return Ok(false);
        }
        // Backdoor paths are exactly the paths that survive deleting x's
        // outgoing edges.
        Ok(!self.active_reach(xi, &set, Some(xi))[yi])
    }

    /// Nodes reachable from `source` along paths active given `cond`.
    ///
    /// With `cut = Some(v)` the outgoing edges of `v` are ignored.
    fn active_reach(&self, source: usize, cond: &BTreeSet<usize>, cut: Option<usize>) -> Vec<bool> {
        let anc = self.ancestral_closure(cond);
        let n = self.len();
        // visited[node][dir]: dir 0 = arrived from a child (moving up),
        // dir 1 = arrived from a parent (moving down).
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut queue = VecDeque::from([(source, 0usize)]);
        let children = |v: usize| -> &[usize] {
            if Some(v) == cut {
                &[]
            } else {
                &self.children[v]
            }
        };
        while let Some((v, dir)) = queue.pop_front() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            let observed = cond.contains(&v);
            if !observed {
                reach[v] = true;
            }
            if dir == 0 {
                if !observed {
                    for &p in &self.parents[v] {
                        if Some(p) != cut {
                            queue.push_back((p, 0));
                        }
                    }
                    for &c in children(v) {
                        queue.push_back((c, 1));
                    }
                }
            } else {
                if !observed {
                    for &c in children(v) {
                        queue.push_back((c, 1));
                    }
                }
                if anc[v] {
                    for &p in &self.parents[v] {
                        if Some(p) != cut {
                            queue.push_back((p, 0));
                        }
                    }
                }
            }
        }
        reach
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> Dag {
        Dag::new(
            nodes.iter().map(|s| s.to_string()).collect(),
            edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_cycles_and_bad_edges() {
        let nodes = vec!["a".to_string(), "b".to_string()];
        let cyc = vec![("a".into(), "b".into()), ("b".into(), "a".into())];
        assert!(Dag::new(nodes.clone(), cyc).is_err());
        assert!(matches!(
            Dag::new(nodes.clone(), vec![("a".into(), "c".into())]),
            Err(Error::UnknownNode(_))
        ));
        let dup = vec![("a".into(), "b".into()), ("a".into(), "b".into())];
        assert!(Dag::new(nodes, dup).is_err());
    }

    #[test]
    fn fork_blocked_by_confounder() {
        let g = dag(&["x", "u", "y"], &[("u", "x"), ("u", "y")]);
        assert!(g.d_separated("x", "y", &["u"]).unwrap());
        assert!(!g.d_separated("x", "y", &[]).unwrap());
    }

    #[test]
    fn collider_rule() {
        let g = dag(&["x", "c", "y", "d"], &[("x", "c"), ("y", "c"), ("c", "d")]);
        assert!(g.d_separated("x", "y", &[]).unwrap());
        assert!(!g.d_separated("x", "y", &["c"]).unwrap());
        // a descendant of the collider also opens it
        assert!(!g.d_separated("x", "y", &["d"]).unwrap());
    }

    #[test]
    fn chain_blocked_by_mediator() {
        let g = dag(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert!(!g.d_separated("a", "c", &[]).unwrap());
        assert!(g.d_separated("a", "c", &["b"]).unwrap());
    }

    #[test]
    fn backdoor_rules() {
        let g = dag(&["x", "u", "y", "m"], &[("u", "x"), ("u", "y"), ("x", "m"), ("m", "y")]);
        assert!(!g.backdoor_admissible("x", "y", &[]).unwrap());
        assert!(g.backdoor_admissible("x", "y", &["u"]).unwrap());
        // m is a descendant of x
        assert!(!g.backdoor_admissible("x", "y", &["u", "m"]).unwrap());
        // no backdoor at all: the empty set works
        let chain = dag(&["x", "y"], &[("x", "y")]);
        assert!(chain.backdoor_admissible("x", "y", &[]).unwrap());
    }

    #[test]
    fn precondition_errors() {
        let g = dag(&["x", "y"], &[]);
        assert!(g.d_separated("x", "x", &[]).is_err());
        assert!(g.d_separated("x", "y", &["x"]).is_err());
        assert!(matches!(g.d_separated("x", "q", &[]), Err(Error::UnknownNode(_))));
    }
}
