//! Run configurations. Every subcommand's arguments double as its
//! `config.json`, so a saved config replays the run exactly.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ledgerscope::focus::FocusConfig;

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SmurfArgs {
    /// Transaction CSV with columns src,dst,amount,timestamp
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, or a path ending in `.json` for the report alone
    #[arg(long)]
    pub output: PathBuf,
    /// Also report compression rate per window of this many days
    #[arg(long)]
    pub window_days: Option<u32>,
    /// Window overlap fraction for --window-days
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct FocusArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 14)]
    pub window_days: u32,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = 256)]
    pub sketch_dim: usize,
    /// Number of past windows each window is compared against
    #[arg(long, default_value_t = 4)]
    pub history: usize,
    #[arg(long, default_value_t = 2)]
    pub plots_per_dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub source_prob: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dest_prob: f64,
    /// Isolation-forest trees per plot
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Isolation-forest subsample size
    #[arg(long, default_value_t = 256)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FocusArgs {
    pub fn focus_config(&self) -> FocusConfig {
        FocusConfig {
            window_days: self.window_days,
            overlap: self.overlap,
            sketch_dim: self.sketch_dim,
            history: self.history,
            plots_per_dim: self.plots_per_dim,
            source_prob: self.source_prob,
            dest_prob: self.dest_prob,
            n_trees: self.trees,
            max_samples: self.max_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory
    #[arg(long)]
    pub output: PathBuf,
    /// Calendar year (UTC) whose months are projected
    #[arg(long)]
    pub year: i32,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 12)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    /// Single-population ledger; roles drawn from low-activity accounts
    Accounting,
    /// Client/customer ledger; sender and receiver are clients
    Czech,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct InjectArgs {
    /// Output directory for ledger.csv and ground_truth.json
    #[arg(long)]
    pub output: PathBuf,
    /// Inject into this ledger instead of a generated one (czech style
    /// treats ids starting with `client` as clients)
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Style::Accounting)]
    pub style: Style,
    /// Number of intermediaries
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Decoy structures to add
    #[arg(long, default_value_t = 1)]
    pub decoys: usize,
    #[arg(long)]
    pub camouflage_prob: Option<f64>,
    #[arg(long)]
    pub inter_intermediary_prob: Option<f64>,
    /// Generated ledger size (defaults follow --style)
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub transactions: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct EvalArgs {
    /// Output directory for results.csv and summary.json
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Style::Accounting)]
    pub preset: Style,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub decoys: usize,
    /// Also time detection at these candidate-set sizes (scaling.json)
    #[arg(long, value_delimiter = ',')]
    pub scaling_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Everything needed to rerun one invocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunConfig {
    Smurf(SmurfArgs),
    Focus(FocusArgs),
    Discover(DiscoverArgs),
    Inject(InjectArgs),
    Eval(EvalArgs),
}

impl RunConfig {
    pub fn output(&self) -> &Path {
        match self {
            RunConfig::Smurf(a) => &a.output,
            RunConfig::Focus(a) => &a.output,
            RunConfig::Discover(a) => &a.output,
            RunConfig::Inject(a) => &a.output,
            RunConfig::Eval(a) => &a.output,
        }
    }

    pub fn set_output(&mut self, path: PathBuf) {
        match self {
            RunConfig::Smurf(a) => a.output = path,
            RunConfig::Focus(a) => a.output = path,
            RunConfig::Discover(a) => a.output = path,
            RunConfig::Inject(a) => a.output = path,
            RunConfig::Eval(a) => a.output = path,
        }
    }

    /// Rewrites paths as absolute so the config replays from any directory.
    pub fn absolutize(&mut self) -> std::io::Result<()> {
        let abs = |p: &mut PathBuf| -> std::io::Result<()> {
            *p = std::path::absolute(&*p)?;
            Ok(())
        };
        match self {
            RunConfig::Smurf(a) => {
                abs(&mut a.input)?;
                abs(&mut a.output)
            }
            RunConfig::Focus(a) => {
                abs(&mut a.input)?;
                abs(&mut a.output)
            }
            RunConfig::Discover(a) => {
                abs(&mut a.input)?;
                abs(&mut a.output)
            }
            RunConfig::Inject(a) => {
                if let Some(input) = a.input.as_mut() {
                    abs(input)?;
                }
                abs(&mut a.output)
            }
            RunConfig::Eval(a) => abs(&mut a.output),
        }
    }

    pub fn input(&self) -> Option<&Path> {
        match self {
            RunConfig::Smurf(a) => Some(&a.input),
            RunConfig::Focus(a) => Some(&a.input),
            RunConfig::Discover(a) => Some(&a.input),
            RunConfig::Inject(a) => a.input.as_deref(),
            RunConfig::Eval(_) => None,
        }
    }
}

/// `config.json` as written next to the outputs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigFile {
    pub version: String,
    #[serde(flatten)]
    pub run: RunConfig,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        focus: FocusArgs,
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let args = Wrap::parse_from(["x", "--input", "l.csv", "--output", "o"]).focus;
        assert_eq!(
            args.focus_config(),
            FocusConfig {
                seed: 0,
                ..FocusConfig::default()
            }
        );
        let file = ConfigFile {
            version: "0".into(),
            run: RunConfig::Focus(args),
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains(r#""subcommand":"focus""#));
        assert_eq!(serde_json::from_str::<ConfigFile>(&text).unwrap(), file);
    }
}
