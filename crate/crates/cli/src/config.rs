//! Experiment parameters. Every command's flags double as a serializable
//! record that is embedded in its output and can be replayed.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use matchwelfare::analysis::Suite;
use matchwelfare::generators::GeneratorSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lemma5,
    Lemma6,
    Lemma8,
    Lemma9,
    N3worst,
    Quasi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum N3Mech {
    Rp,
    Hm,
    Uniform,
}

impl N3Mech {
    pub fn name(self) -> &'static str {
        match self {
            N3Mech::Rp => "rp",
            N3Mech::Hm => "hm",
            N3Mech::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn spec(&self) -> Result<GeneratorSpec, CliError> {
        let need_n = || self.n.ok_or_else(|| CliError::Usage(format!("--n is required for {:?}", self.family)));
        Ok(match self.family {
            Family::Lemma5 => GeneratorSpec::Lemma5 { n: need_n()? },
            Family::Lemma6 => GeneratorSpec::Lemma6 { n: need_n()?, k: self.k },
            Family::Lemma8 => GeneratorSpec::Lemma8 { n: need_n()? },
            Family::Lemma9 => GeneratorSpec::Lemma9 { n: need_n()?, k: self.k },
            Family::N3worst => GeneratorSpec::N3Worst {
                eps: self.eps.ok_or_else(|| CliError::Usage("--eps is required for n3worst".into()))?,
            },
            Family::Quasi => {
                let n = need_n()?;
                GeneratorSpec::QuasiRandom {
                    n,
                    eps: self.eps.unwrap_or(1.0 / (n as f64).powi(3)),
                    k: self.k.unwrap_or_else(|| ceil_sqrt(n)),
                    seed: self.seed,
                }
            }
        })
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let r = n.isqrt();
    if r * r < n {
        r + 1
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Profile JSON file.
    #[arg(long)]
    pub profile: PathBuf,
    /// rp, uniform, hm, sd or opt.
    #[arg(long)]
    pub mech: String,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: Mode,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    #[arg(long, value_parser = parse_suite)]
    pub suite: Suite,
    /// Comma-separated sizes; `a..b` is an inclusive range.
    #[arg(long, value_parser = parse_sizes, default_value = "")]
    pub sizes: Sizes,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo samples where exact evaluation is out of reach.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct N3Args {
    #[arg(long, value_enum)]
    pub mech: N3Mech,
    #[arg(long, default_value_t = 0.02)]
    pub grid: f64,
    #[arg(long, default_value_t = 40)]
    pub refine: usize,
    /// Directory for the summary and the per-class surface CSVs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Grid step of the dumped surfaces.
    #[arg(long, default_value_t = 0.1)]
    pub surface_grid: f64,
}

/// The full parameter record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Generate(GenerateArgs),
    Eval(EvalArgs),
    Bounds(BoundsArgs),
    N3(N3Args),
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Usage(format!("malformed embedded config: {e}")))
    }

    /// Points the output of this run somewhere else.
    pub fn redirect(&mut self, out: PathBuf) {
        match self {
            ExperimentConfig::Generate(a) => a.out = Some(out),
            ExperimentConfig::Eval(a) => a.out = Some(out),
            ExperimentConfig::Bounds(a) => a.out = Some(out),
            ExperimentConfig::N3(a) => a.out_dir = Some(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sizes(pub Vec<usize>);

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: matchwelfare::Error| e.to_string())
}

pub fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad size `{x}`: {e}"));
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(Sizes(out))
}
