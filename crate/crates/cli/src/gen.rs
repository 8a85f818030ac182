//! `cfaug gen`: write both splits of a dataset.

use anyhow::{Context, Result};
use cfaug::datagen::{generate_dataset, write_dataset, Manifest};
use cfaug::DatasetSpec;

use crate::args::GenArgs;
use crate::manifest::{create_dir, Invocation};

pub struct GenOutput {
    pub train: Manifest,
    pub test: Manifest,
}

pub fn run(args: &GenArgs, inv: &Invocation) -> Result<GenOutput> {
    let spec = DatasetSpec::new(args.variant, args.r, args.n_train, args.n_test, args.seed)?;
    let (train, test) = generate_dataset(&spec)?;
    let root = inv.resolve(&args.out);
    create_dir(&root)?;
    let write = |ds, name: &str| {
        let dir = root.join(name);
        write_dataset(ds, &dir, Some(&inv.command_line)).with_context(|| format!("writing {}", dir.display()))
    };
    Ok(GenOutput { train: write(&train, "train")?, test: write(&test, "test")? })
}
