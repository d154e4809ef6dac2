use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use selfish_core::chain::Compensation;
use selfish_core::delay::DEFAULT_K_CAP;
use selfish_core::evaluate::BoundaryRule;
use selfish_core::optimizer::{DEFAULT_EPS, DEFAULT_TRUNCATION};
use selfish_core::Variant;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "selfish", version, about = "Selfish-mining policies, revenue bounds and thresholds")]
pub struct Cli {
    /// Report failures as a single-line JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound the optimal revenue and write an epsilon-optimal policy.
    Optimize(OptimizeArgs),
    /// Smallest hashrate at which deviating from honest mining pays.
    Threshold(ThresholdArgs),
    /// Bounds and reference revenues over an (alpha, gamma) grid.
    Sweep(SweepArgs),
    /// Monte Carlo revenue of a policy.
    Simulate(SimulateArgs),
    /// Exact revenue of a policy.
    Evaluate(EvaluateArgs),
    /// Print a policy as an (a, h) action table.
    Render(RenderArgs),
    /// Catch-up probability and deviation gain under network delay.
    Delay(DelayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Standard,
    Uniform,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Uniform => Variant::UniformTieBreak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryArg {
    ForcedAdopt,
    Sm1Tail,
}

impl From<BoundaryArg> for BoundaryRule {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::ForcedAdopt => BoundaryRule::ForcedAdopt,
            BoundaryArg::Sm1Tail => BoundaryRule::Sm1Tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompensationArg {
    Printed,
    Discounted,
}

impl From<CompensationArg> for Compensation {
    fn from(c: CompensationArg) -> Self {
        match c {
            CompensationArg::Printed => Compensation::Printed,
            CompensationArg::Discounted => Compensation::Discounted,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArg {
    /// Directory receiving the output files and their manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long = "T", visible_alias = "truncation", default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: u32,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps_prime: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    pub variant: VariantArg,
    /// Boundary compensation used by the over-paying model.
    #[arg(long, value_enum, default_value_t = CompensationArg::Printed)]
    pub compensation: CompensationArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    pub variant: VariantArg,
    #[arg(long = "T", visible_alias = "truncation", default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: u32,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Width at which the search over alpha stops.
    #[arg(long, default_value_t = 1e-4)]
    pub alpha_tol: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Comma-separated hashrates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// Comma-separated connectivities.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    pub variant: VariantArg,
    #[arg(long = "T", visible_alias = "truncation", default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: u32,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PolicyArgs {
    /// `honest`, `sm1`, or a policy JSON file.
    #[arg(long)]
    pub policy: String,
    /// Overrides the parameters stored in a policy file (see --force).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Truncation for the built-in policies.
    #[arg(long = "T", visible_alias = "truncation", default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: u32,
    /// Accept parameters that differ from those stored in the policy file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent runs with seeds seed + k * seed-stride.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed_stride: u64,
    /// Behaviour at the truncation; defaults to sm1-tail for `sm1` and
    /// forced-adopt otherwise.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Behaviour at the truncation; defaults to sm1-tail for `sm1` and
    /// forced-adopt otherwise.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RenderArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Largest a and h shown.
    #[arg(long, default_value_t = 8)]
    pub view: u32,
    /// Also write the table to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DelayArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Block creation rate.
    #[arg(long)]
    pub lambda: f64,
    /// Delay from the attacker to the honest network.
    #[arg(long)]
    pub d_ah: f64,
    /// Delay from the honest network to the attacker.
    #[arg(long)]
    pub d_ha: f64,
    /// Baseline revenue the deviation is compared against.
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_K_CAP)]
    pub k_cap: u64,
    #[command(flatten)]
    pub out: OutArg,
}
