//! Confounded image datasets with a known, exactly invertible renderer.
//!
//! Three families are supported: a single glyph colour ([`Variant::Cm`]),
//! glyph plus background colour ([`Variant::Dcm`]) and glyph plus
//! background texture ([`Variant::Wlm`]). Glyphs are seven-segment digits
//! whose stroke width encodes the thin/thick factor.

mod dataset;
mod factors;
mod io;
mod render;

pub use dataset::{
    build_scm, gate_cnf_closed_form, generate_dataset, unconfounded_indices, unconfounded_subset, AugmentationRecord,
    Dataset, DatasetSpec, Instance, Split, CONFOUNDER_NODE, TEST_MORPH_MEAN, TEST_MORPH_SD, TRAIN_MORPH,
};
pub use factors::{CanonicalMap, Factor, FactorTuple, Origin, Thickness, Variant, NUM_CLASSES, NUM_STYLES};
pub use io::{read_dataset, write_dataset, Manifest, DATASET_FORMAT, RECORD_BYTES};
pub use render::{glyph_mask, invert, render, Image, Relabeling, Renderer, CHANNELS, HEIGHT, PIXELS, WIDTH};
