//! Orchestration behind the `cfaug` binary: dataset generation, confounding
//! sweeps, the augmentation experiment and the property suite.

pub mod args;
pub mod cnf_table;
pub mod config;
pub mod exit;
pub mod experiment;
pub mod gen;
pub mod manifest;
pub mod par;
pub mod props;
pub mod stats;

use std::ffi::OsString;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command, SUBCOMMANDS};
use manifest::Invocation;

/// Parse `argv` and run the subcommand. Config file entries are spliced in
/// first, so the recorded command line shows every effective flag.
pub fn run_from(argv: Vec<OsString>) -> Result<()> {
    let argv = config::expand_args(argv, &SUBCOMMANDS)?;
    let command_line = Invocation::from_args(&argv).command_line;
    let cli = Cli::try_parse_from(argv)?;
    let inv = Invocation { command_line, out_root: cli.out_root.clone() };
    match &cli.command {
        Command::Gen(a) => {
            let out = gen::run(a, &inv)?;
            for (name, m) in [("train", &out.train), ("test", &out.test)] {
                println!("{name}\t{}\t{}", m.n_records, m.sha256);
            }
        }
        Command::CnfTable(a) => {
            cnf_table::run(a, &inv)?;
        }
        Command::Experiment(a) => {
            experiment::run(a, &inv)?;
        }
        Command::Props(a) => {
            props::run(a, &inv)?;
        }
    }
    Ok(())
}
