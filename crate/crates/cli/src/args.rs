use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::experiment::Method;
use crate::props::Fault;

pub const SUBCOMMANDS: [&str; 4] = ["gen", "cnf-table", "experiment", "props"];

const CNF_TABLE_COLUMNS: &str = "\
CSV columns (schema cnf-table/1):
  variant              dataset family
  factor               style factor paired with the digit
  r                    gate probability
  n                    samples per seed
  n_seeds              number of seeds
  cnf_empirical_mean   plug-in CNF(digit, factor) averaged over seeds
  cnf_empirical_sd     sample standard deviation over seeds (empty for one seed)
  cnf_exact            CNF computed from the model's exact distributions
  closed_form          2 [ln K + p_m ln p_m + (K-1) p_o ln p_o]";

const EXPERIMENT_COLUMNS: &str = "\
Files written to --out: runs.csv, summary.csv, table.md, manifest.json.

runs.csv (schema experiment-runs/1), one row per method, seed and style factor:
  method, group           training method and its simulated intervention
  seed                    experiment seed
  factor                  style factor
  n_train, n_added        training-set size and number of added instances
  test_accuracy           accuracy on the unconfounded test split
  pooled_cnf              CNF(digit, factor) over the provenance of the training set
  cond_mi                 I(factor; prediction | digit) on the test split
  term1, mi_factor_digit  the two terms whose difference equals cond_mi
  decomposition_residual  |cond_mi - (term1 - mi_factor_digit)|

summary.csv (schema experiment-summary/1), one row per method and style factor:
  method, group, factor, n_seeds,
  test_accuracy_mean, test_accuracy_sd, pooled_cnf_mean, pooled_cnf_sd,
  cond_mi_mean, cond_mi_sd   (sd columns are empty for one seed)";

const PROPS_COLUMNS: &str = "\
With --out, props.csv (schema props/1) holds one row per property:
  property, trials, max_residual, tolerance, passed";

#[derive(Debug, Parser)]
#[command(name = "cfaug", version, about = "Confounded image datasets, counterfactual augmentation and confounding measures")]
pub struct Cli {
    /// JSON file whose keys mirror the subcommand's long flags; flags on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory that relative --out paths are resolved against.
    #[arg(long, global = true, env = "CFAUG_OUT_ROOT", value_name = "DIR")]
    pub out_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the train and test splits of a dataset.
    Gen(GenArgs),
    /// Sweep the confounding measure over gate probabilities.
    #[command(after_long_help = CNF_TABLE_COLUMNS)]
    CnfTable(CnfTableArgs),
    /// Compare augmentation strategies by test accuracy and confounding.
    #[command(after_long_help = EXPERIMENT_COLUMNS)]
    Experiment(ExperimentArgs),
    /// Run the property suite on random models and instances.
    #[command(after_long_help = PROPS_COLUMNS)]
    Props(PropsArgs),
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct GenArgs {
    #[arg(long, default_value = "dcm")]
    pub variant: cfaug::Variant,
    #[arg(long, default_value_t = 0.95)]
    pub r: f64,
    #[arg(long, default_value_t = 60_000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives train/ and test/.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct CnfTableArgs {
    #[arg(long, default_value = "cm")]
    pub variant: cfaug::Variant,
    /// Style factor paired with the digit; defaults to the variant's first.
    #[arg(long)]
    pub factor: Option<cfaug::datagen::Factor>,
    #[arg(long, value_delimiter = ',', default_value = "0.10,0.20,0.50,0.90,0.95")]
    pub r: Vec<f64>,
    #[arg(long, default_value_t = 60_000)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    /// Worker threads across (r, seed) cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for cnf_table.csv and its manifest; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "dcm")]
    pub variant: cfaug::Variant,
    #[arg(long, default_value_t = 0.95)]
    pub r: f64,
    #[arg(long, default_value_t = 60_000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
    /// Methods to compare: erm (alias none), erm-uc, erm-rw (alias
    /// replicate-uc), do-x, do-z0-zcnf, do-zcnf, do-z0.
    #[arg(long, value_delimiter = ',', default_value = "erm,erm-uc,erm-rw,do-x,do-z0-zcnf,do-zcnf,do-z0")]
    pub strategies: Vec<Method>,
    /// Cell-mass threshold of the counterfactual filter.
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Cap on the number of added instances (1000, 2000, 5000, 10000, 20000 or 50000).
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Counterfactuals drawn per selected instance.
    #[arg(long, default_value_t = 1)]
    pub per_instance: usize,
    /// Allow counterfactuals to resample a factor to its current value.
    #[arg(long)]
    pub include_current: bool,
    /// Keep counterfactuals whose factors already occur in the dataset.
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Worker threads across seeds.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct PropsArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random models or instances per property.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Deliberately break the models under test (negative control).
    #[arg(long, value_name = "KIND")]
    pub inject_fault: Option<Fault>,
    /// Directory for props.csv and its manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
