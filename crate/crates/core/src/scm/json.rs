//! JSON document form of an [`Scm`].
//!
//! ```json
//! {
//!   "format": "cfaug-scm/1",
//!   "nodes": [{"name": "u", "cardinality": 2}, ...],
//!   "edges": [["u", "z"], ...],
//!   "mechanisms": [{"child": "z", "parents": ["u"],
//!                   "rows": [{"given": [0], "probs": [0.9, 0.1]}, ...]}],
//!   "roles": {"causal": "z0", "confounded": ["z1"], "confounders": ["u"]}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{FactorSpec, Mechanism, Roles, Scm};
use crate::{Error, Result};

pub const SCM_FORMAT: &str = "cfaug-scm/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmDocument {
    pub format: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<(String, String)>,
    pub mechanisms: Vec<MechanismDoc>,
    pub roles: RolesDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismDoc {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<RowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDoc {
    pub given: Vec<usize>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolesDoc {
    #[serde(default)]
    pub causal: Option<String>,
    #[serde(default)]
    pub confounded: Vec<String>,
    #[serde(default)]
    pub confounders: Vec<String>,
}

impl From<&Scm> for ScmDocument {
    fn from(scm: &Scm) -> Self {
        let specs = scm.specs();
        let card = |n: &str| specs.iter().find(|s| s.name == n).map_or(0, |s| s.cardinality);
        let mechanisms = scm
            .mechanisms()
            .iter()
            .map(|m| {
                let k = card(&m.child);
                let pcards: Vec<usize> = m.parents.iter().map(|p| card(p)).collect();
                let rows = (0..m.table.len() / k)
                    .map(|r| {
                        let mut given = vec![0; pcards.len()];
                        let mut rem = r;
                        for d in (0..pcards.len()).rev() {
                            given[d] = rem % pcards[d];
                            rem /= pcards[d];
                        }
                        RowDoc { given, probs: m.row(r, k).to_vec() }
                    })
                    .collect();
                MechanismDoc { child: m.child.clone(), parents: m.parents.clone(), rows }
            })
            .collect();
        let roles = scm.roles();
        ScmDocument {
            format: SCM_FORMAT.into(),
            nodes: specs.iter().map(|s| NodeDoc { name: s.name.clone(), cardinality: s.cardinality }).collect(),
            edges: scm.dag().edges().to_vec(),
            mechanisms,
            roles: RolesDoc {
                causal: roles.causal.clone(),
                confounded: roles.confounded.clone(),
                confounders: roles.confounders.clone(),
            },
        }
    }
}

impl TryFrom<ScmDocument> for Scm {
    type Error = Error;

    fn try_from(doc: ScmDocument) -> Result<Scm> {
        if doc.format != SCM_FORMAT {
            return Err(Error::Format(format!("unsupported SCM format `{}`", doc.format)));
        }
        let card = |n: &str| -> Result<usize> {
            doc.nodes
                .iter()
                .find(|s| s.name == n)
                .map(|s| s.cardinality)
                .ok_or_else(|| Error::UnknownNode(n.into()))
        };
        let mut mechanisms = Vec::with_capacity(doc.mechanisms.len());
        for m in &doc.mechanisms {
            let k = card(&m.child)?;
            let pcards = m.parents.iter().map(|p| card(p)).collect::<Result<Vec<_>>>()?;
            let nrows: usize = pcards.iter().product();
            let mut table = vec![f64::NAN; nrows * k];
            let mut filled = vec![false; nrows];
            for row in &m.rows {
                if row.given.len() != pcards.len() || row.probs.len() != k {
                    return Err(Error::Format(format!("malformed row for `{}`", m.child)));
                }
                let mut r = 0;
                for (&g, &c) in row.given.iter().zip(&pcards) {
                    if g >= c {
                        return Err(Error::Format(format!("parent value {g} out of range in `{}`", m.child)));
                    }
                    r = r * c + g;
                }
                if std::mem::replace(&mut filled[r], true) {
                    return Err(Error::Format(format!("row {:?} of `{}` repeated", row.given, m.child)));
                }
                table[r * k..(r + 1) * k].copy_from_slice(&row.probs);
            }
            if filled.iter().any(|f| !f) {
                return Err(Error::Format(format!("table of `{}` does not cover all parent values", m.child)));
            }
            mechanisms.push(Mechanism { child: m.child.clone(), parents: m.parents.clone(), table });
        }
        Scm::new(
            doc.nodes.iter().map(|n| FactorSpec { name: n.name.clone(), cardinality: n.cardinality }).collect(),
            doc.edges,
            mechanisms,
            Roles {
                causal: doc.roles.causal,
                confounded: doc.roles.confounded,
                confounders: doc.roles.confounders,
            },
        )
    }
}

impl Scm {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScmDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Scm> {
        Scm::try_from(serde_json::from_str::<ScmDocument>(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scm> {
        Scm::from_json(&std::fs::read_to_string(path)?)
    }
}
