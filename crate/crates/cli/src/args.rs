use std::path::PathBuf;

use advmanifold::{Strategy, Variant, Which};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "advmanifold", version, about = "On-manifold adversarial examples on Gaussian data")]
pub struct Cli {
    /// `key=value` file supplying any flag not given on the command line.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a P-PCA model to a dataset and write it as JSON.
    FitPpca(FitPpcaArgs),
    /// Apply the optimal generative or eigenspace attack to every row of a dataset.
    Attack(AttackArgs),
    /// Closed-form (and optionally Monte-Carlo) excess risk, one row per multiplier.
    ExcessRisk(ExcessRiskArgs),
    /// Adversarially trained spectrum, closed form next to the min-max simulation.
    Shift(ShiftArgs),
    /// Point clouds for the four panels of the two-dimensional demonstration.
    Demo2d(Demo2dArgs),
    /// Compare the covariance spectra of a clean and an adversarial dataset.
    Spectra(SpectraArgs),
    /// Run the oracle suite and print one PASS/FAIL line per property.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Generative,
    Eigenspace,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Generative => "generative",
            Mode::Eigenspace => "eigenspace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Top,
    Bottom,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Top => Which::Top,
            WhichArg::Bottom => Which::Bottom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Literal,
    Definitional,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Literal => Variant::Literal,
            VariantArg::Definitional => Variant::Definitional,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitPpcaArgs {
    /// Dataset CSV, one sample per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Latent dimension, `1 <= q < d`.
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// P-PCA model JSON for generative attacks; fitted from the data with `--q` when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Latent dimension (generative) or subspace dimension (eigenspace).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum, default_value = "top")]
    pub which: WhichArg,
    /// Norm budget; the multiplier is solved per sample.
    #[arg(long, conflicts_with = "multiplier", required_unless_present = "multiplier")]
    pub epsilon: Option<f64>,
    /// Lagrange multiplier held fixed for every sample.
    #[arg(long = "L")]
    pub multiplier: Option<f64>,
    #[arg(long, default_value_t = Strategy::One, value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Required for sampling strategies 2 and 3.
    #[arg(long)]
    pub seed: Option<u64>,
    /// The last column holds ±1 labels; each class is attacked under its own model.
    #[arg(long)]
    pub labeled: bool,
    /// Adversarial dataset CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-sample report CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExcessRiskArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Source eigenvalues, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "rankq", required_unless_present = "rankq")]
    pub lambdas: Vec<f64>,
    /// Use the rank-q spectrum `(q, q-1, ..., 1, 0, ...)` of dimension `--d`.
    #[arg(long)]
    pub rankq: bool,
    /// Ambient dimension for `--rankq` (default `q + 1`).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: usize,
    /// Multipliers, comma-separated.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub multipliers: Vec<f64>,
    #[arg(long, default_value_t = Strategy::One, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, value_enum, default_value = "literal")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "top")]
    pub which: WhichArg,
    /// Monte-Carlo sample count.
    #[arg(long, requires = "seed")]
    pub mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Source eigenvalues, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "data", required_unless_present = "data")]
    pub lambdas: Vec<f64>,
    /// Dataset whose sample covariance is the source.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub q: usize,
    #[arg(long = "L", conflicts_with = "epsilon", required_unless_present = "epsilon")]
    pub multiplier: Option<f64>,
    /// Root-mean-square perturbation norm; the multiplier is re-solved every iterate.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = Strategy::One, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Demo2dArgs {
    /// Source eigenvalues of the two axes.
    #[arg(long, value_delimiter = ',', default_value = "4,1")]
    pub lambdas: Vec<f64>,
    #[arg(long = "L", default_value_t = 4.0)]
    pub multiplier: f64,
    /// Points per panel.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Latent radius of the constraint illustrated in panel (c).
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving `panel_a.csv` .. `panel_d.csv`.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub adv: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the attack-direction profile in the clean eigenbasis.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: u64,
    /// Run only the named checks (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

/// Appends `--key value` for every `key=value` line of `text` whose flag is not
/// already present in `argv`. `true` adds a bare switch and `false` adds nothing.
pub fn merge_config(argv: &[String], text: &str) -> Result<Vec<String>, String> {
    let mut merged = argv.to_vec();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", lineno + 1));
        }
        let flag = format!("--{key}");
        let given = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match value {
            "true" => merged.push(flag),
            "false" => {}
            _ => {
                merged.push(flag);
                merged.push(value.to_string());
            }
        }
    }
    Ok(merged)
}

/// The value of `--config` in raw arguments, if any.
pub fn config_path(argv: &[String]) -> Option<PathBuf> {
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let args = argv("advmanifold shift --q 2 --L 4");
        let merged = merge_config(&args, "# comment\nmode = eigenspace\nL=9\nlambdas=4,1\n").unwrap();
        assert_eq!(merged, argv("advmanifold shift --q 2 --L 4 --mode eigenspace --lambdas 4,1"));
        let merged = merge_config(&argv("x excess-risk"), "rankq=true\nlabeled=false\n").unwrap();
        assert_eq!(merged, argv("x excess-risk --rankq"));
        assert!(merge_config(&args, "novalue\n").is_err());
    }

    #[test]
    fn config_path_forms() {
        assert_eq!(config_path(&argv("a --config c.txt b")), Some(PathBuf::from("c.txt")));
        assert_eq!(config_path(&argv("a --config=c.txt")), Some(PathBuf::from("c.txt")));
        assert_eq!(config_path(&argv("a b")), None);
    }
}
