//! Discrete structural causal models.
//!
//! A [`Scm`] is a DAG over finite-valued nodes with one conditional
//! probability table per node. Exogenous variables are ordinary root nodes.
//! The module answers observational and interventional queries exactly and
//! implements the graphical criteria (d-separation, backdoor) used to
//! justify adjustment.

mod dag;
mod json;
mod model;
pub mod random;
mod table;

pub use dag::{Dag, NodeId};
pub use json::ScmDocument;
pub use model::{point_mass, Assignment, FactorSpec, Mechanism, Roles, Scm, ScmBuilder, DEFAULT_CELL_CAP};
pub use table::DistTable;
